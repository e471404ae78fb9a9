"""Design matrices for every model variant.

Rows are indexed by origin day ``t`` with response dated ``t + h``. All column
builders are vectorized over origin indices into the hourly dataset; a
:class:`FeatureBuilder` caches the daily fuel series, portfolio averages and
seasonal forecast grids shared by the many fits of a backtest.

Every column carries a provenance tag naming the latest information it reads
relative to the row's origin:

``origin``     data dated on or before the origin
``published``  a day-ahead forecast for origin + 1, published on the origin
``calendar``   deterministic calendar value of the target day
``seasonal``   a seasonal model trained strictly before the fit origin
``target``     data dated on the target day (current-model estimation only)
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InsufficientHistory, MissingSeasonalModel, StaleQuote
from .ingest import COMMODITIES, MAX_MATURITY, FuturesStore, HourlyDataset
from .seasonal import SeasonalModel, SeasonalSet

WEEKDAY_COLUMNS = ("mon", "fri", "sat", "sun")
SEASON_COLUMNS = ("winter", "spring", "summer")
AR_COLUMNS = ("price_t", "price_t-1", "price_t-6", "price_last_hour_t")
RL_COLUMNS = ("res", "load")
FUEL_COLUMNS = COMMODITIES
AR_LAGS = {"price_t": 0, "price_t-1": 1, "price_t-6": 6}
MAX_AR_LAG = 6
DEFAULT_WINDOW = 1095
PORTFOLIO_SPAN = 30

# --------------------------------------------------------------------------- calendar

@dataclass(frozen=True)
class CalendarFeatures:
    mon: int = 0
    fri: int = 0
    sat: int = 0
    sun: int = 0
    winter: int = 0
    spring: int = 0
    summer: int = 0

    def as_tuple(self) -> tuple[int, ...]:
        return (self.mon, self.fri, self.sat, self.sun, self.winter, self.spring, self.summer)


def calendar_features(date: dt.date) -> CalendarFeatures:
    """Weekday dummies Mon/Fri/Sat/Sun and meteorological season dummies (autumn base)."""
    wd = date.weekday()
    m = date.month
    return CalendarFeatures(
        mon=int(wd == 0), fri=int(wd == 4), sat=int(wd == 5), sun=int(wd == 6),
        winter=int(m in (12, 1, 2)), spring=int(m in (3, 4, 5)), summer=int(m in (6, 7, 8)))


def calendar_matrix(days: np.ndarray) -> np.ndarray:
    """(n, 7) calendar dummies for datetime64[D] days, column order as CalendarFeatures."""
    days = np.asarray(days, dtype="datetime64[D]")
    wd = (days.astype(np.int64) + 3) % 7  # 1970-01-01 was a Thursday
    month = days.astype("datetime64[M]").astype(np.int64) % 12 + 1
    out = np.zeros((len(days), 7))
    out[:, 0] = wd == 0
    out[:, 1] = wd == 4
    out[:, 2] = wd == 5
    out[:, 3] = wd == 6
    out[:, 4] = np.isin(month, (12, 1, 2))
    out[:, 5] = np.isin(month, (3, 4, 5))
    out[:, 6] = np.isin(month, (6, 7, 8))
    return out


# --------------------------------------------------------------------------- portfolio

@dataclass(frozen=True)
class PortfolioLagSpec:
    horizon_months: int
    entries: tuple[tuple[str, int, int], ...]  # (delivery, lag_months, maturity_months)


def horizon_months(h: int) -> int:
    return h // 30


def maturity_for_horizon(h: int) -> int:
    """Futures maturity in months matched to a horizon of ``h`` days."""
    return min(max(math.ceil(h / 30), 1), MAX_MATURITY)


def portfolio_lag_spec(h: int) -> PortfolioLagSpec:
    """Delivery/lag/maturity entries for horizon ``h`` days.

    With ``m = h // 30``: D0 uses lags max(m,1)..12 at maturity = lag, D-1 lags
    max(m,2)..12 at maturity = lag - 1, D+1 lags m..11 at maturity = lag + 1.
    """
    m = horizon_months(h)
    entries = [("D0", lag, lag) for lag in range(max(m, 1), 13)]
    entries += [("Dm1", lag, lag - 1) for lag in range(max(m, 2), 13)]
    entries += [("Dp1", lag, lag + 1) for lag in range(m, 12)]
    return PortfolioLagSpec(m, tuple(entries))


# --------------------------------------------------------------------------- model spec

@dataclass(frozen=True)
class ModelSpec:
    """Declarative model variant: variable groups plus method flags."""

    name: str
    groups: tuple[str, ...]
    constrained: bool = False
    differencing: bool = False
    current: bool = False
    short_term_hybrid: bool = False
    portfolio: bool = False
    seasonal_rl: bool = False  # RES/load from seasonal forecasts in estimation and prediction
    naive: bool = False

    @property
    def unconstrained(self) -> bool:
        return not self.constrained and not self.naive

    def uses(self, group: str) -> bool:
        return group in self.groups


# --------------------------------------------------------------------------- design

@dataclass
class DesignMatrix:
    """Estimation matrix and prediction row for one (spec, origin, horizon, hour)."""

    names: list[str]
    groups: list[str]  # bound group per column
    provenance: list[str]
    X: np.ndarray
    y: np.ndarray
    rows: np.ndarray  # origin day index of each estimation row
    x_pred: np.ndarray
    origin: int
    horizon: int
    hour: int
    level: float = 0.0  # added back to the prediction (differenced specs)
    info_rows: np.ndarray | None = None  # latest day index read per estimation row
    info_pred: int = -1  # latest day index read by the prediction row

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def to_csv(self, path) -> None:
        """Dump estimation rows and the prediction row for debugging."""
        import csv
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["row", "origin_index", "y", *self.names])
            for i in range(self.n):
                w.writerow(["est", int(self.rows[i]), repr(float(self.y[i])), *[repr(float(v)) for v in self.X[i]]])
            w.writerow(["pred", self.origin, "", *[repr(float(v)) for v in self.x_pred]])


class FeatureBuilder:
    """Shared, read-only column source over a dataset, futures store and seasonal models."""

    def __init__(self, data: HourlyDataset, futures: FuturesStore | None = None,
                 seasonal: SeasonalSet | None = None, max_horizon: int = 400):
        self.data = data
        self.futures = futures if futures is not None else FuturesStore({})
        self.seasonal = seasonal
        self.n_days = data.n_days
        self.start = np.datetime64(data.start_day, "D")
        self.max_horizon = max_horizon
        self._fuel: dict[tuple[str, int], np.ndarray] = {}
        self._port: dict[tuple[str, int], np.ndarray] = {}
        self._grid: dict[int, np.ndarray] = {}
        self._cal = calendar_matrix(self.start + np.arange(self.n_days + max_horizon + 1))

    # ---- raw series
    def fuel(self, commodity: str, maturity: int) -> np.ndarray:
        """Carried-forward settle per dataset day (NaN where stale)."""
        key = (commodity, maturity)
        if key not in self._fuel:
            days = self.start + np.arange(self.n_days)
            self._fuel[key] = self.futures.series(commodity, maturity, days)
        return self._fuel[key]

    def portfolio_series(self, commodity: str, maturity: int) -> np.ndarray:
        """Trailing 30-calendar-day mean of actual quotes ending on each day."""
        key = (commodity, maturity)
        if key not in self._port:
            curve = self.futures.curves.get(commodity)
            vals = np.zeros(self.n_days)
            cnt = np.zeros(self.n_days)
            if curve is not None:
                col = curve.settles[:, maturity - 1]
                idx = (curve.dates - self.start).astype(np.int64)
                ok = ~np.isnan(col) & (idx >= 0) & (idx < self.n_days)
                vals[idx[ok]] = col[ok]
                cnt[idx[ok]] = 1
            cs = np.concatenate([[0.0], np.cumsum(vals)])
            cc = np.concatenate([[0.0], np.cumsum(cnt)])
            hi = np.arange(1, self.n_days + 1)
            lo = np.maximum(hi - PORTFOLIO_SPAN, 0)
            with np.errstate(invalid="ignore", divide="ignore"):
                mean = (cs[hi] - cs[lo]) / (cc[hi] - cc[lo])
            mean[hi - PORTFOLIO_SPAN < 0] = np.nan  # incomplete trailing window
            self._port[key] = mean
        return self._port[key]

    def seasonal_model(self, target: str, origin: int) -> SeasonalModel:
        day = self.data.day(origin)
        m = self.seasonal.for_origin(target, day) if self.seasonal is not None else None
        if m is None:
            raise MissingSeasonalModel(f"no {target} seasonal model trained before {day}")
        return m

    def seasonal_grid(self, model: SeasonalModel) -> np.ndarray:
        """Model forecasts over the dataset span plus the horizon margin, (days, 24)."""
        key = id(model)
        if key not in self._grid:
            self._grid[key] = model.predict_grid(self.data.start_day, self.n_days + self.max_horizon + 1)
        return self._grid[key]

    def calendar(self, idx: np.ndarray) -> np.ndarray:
        return self._cal[idx]


def _check_rows(rows: np.ndarray, need_back: int, builder: FeatureBuilder):
    if rows.min() - need_back < 0:
        raise InsufficientHistory(
            f"estimation window needs data from day index {rows.min() - need_back}, dataset starts at 0")


def _columns(spec: ModelSpec, b: FeatureBuilder, ts: np.ndarray, h: int, hour: int, fit_origin: int,
             mode: str):
    """Regressor columns for origins ``ts``.

    ``mode`` is ``"estimate"`` or ``"predict"``; they differ only for the
    current-method alignments. Returns (names, bound groups, provenance, matrix,
    latest day index read per row).
    """
    hr = hour - 1
    price = b.data["price"]
    names, groups, prov, cols = [], [], [], []
    info = ts.copy()
    tgt = ts + h

    if spec.uses("week_dummies"):
        cal = b.calendar(tgt)
        for j, nm in enumerate(WEEKDAY_COLUMNS):
            names.append(nm); groups.append("calendar"); prov.append("calendar"); cols.append(cal[:, j])
    if spec.uses("annual_seasons"):
        cal = b.calendar(tgt)
        for j, nm in enumerate(SEASON_COLUMNS):
            names.append(nm); groups.append("calendar"); prov.append("calendar"); cols.append(cal[:, 4 + j])
    if spec.uses("autoreg"):
        for nm, lag in AR_LAGS.items():
            names.append(nm); groups.append("autoregressive"); prov.append("origin")
            cols.append(price[ts - lag, hr])
        names.append("price_last_hour_t"); groups.append("autoregressive"); prov.append("origin")
        cols.append(price[ts, 23])
    if spec.uses("res_load"):
        current_rl = spec.current or spec.short_term_hybrid
        for nm in RL_COLUMNS:
            if current_rl and mode == "estimate":
                col = b.data[f"{nm}_actual"][tgt, hr]
                tag = "target"
                info = np.maximum(info, tgt)
            elif current_rl or spec.seasonal_rl:
                model = b.seasonal_model(nm, fit_origin)
                col = b.seasonal_grid(model)[tgt, hr]
                tag = "seasonal"
            else:
                if ts.max() + 1 >= b.n_days:
                    raise InsufficientHistory("day-ahead forecast for origin + 1 is not in the dataset")
                col = b.data[f"{nm}_da_fc"][ts + 1, hr]
                tag = "published"
            names.append(nm); groups.append(nm); prov.append(tag); cols.append(col)
    if spec.uses("fuels"):
        if spec.portfolio:
            lag_spec = portfolio_lag_spec(h)
            for c in FUEL_COLUMNS:
                for delivery, lag, mat in lag_spec.entries:
                    src = ts - 30 * lag
                    if src.min() - PORTFOLIO_SPAN + 1 < 0:
                        raise InsufficientHistory(f"portfolio {c} lag {lag} reaches before the dataset")
                    names.append(f"{c}_{delivery}_L{lag}"); groups.append(c); prov.append("origin")
                    cols.append(b.portfolio_series(c, mat)[src])
        else:
            for c in FUEL_COLUMNS:
                if spec.current and mode == "estimate":
                    col = b.fuel(c, 1)[tgt]
                    tag = "target"
                    info = np.maximum(info, tgt)
                elif spec.current:
                    col = b.fuel(c, maturity_for_horizon(h))[ts]
                    tag = "origin"
                else:
                    col = b.fuel(c, 1)[ts]
                    tag = "origin"
                names.append(c); groups.append(c); prov.append(tag); cols.append(col)
    X = np.column_stack(cols) if cols else np.zeros((len(ts), 0))
    return names, groups, prov, X, info


def assemble_design(builder: FeatureBuilder, spec: ModelSpec, horizon: int, hour: int, origin: int,
                    window: int = DEFAULT_WINDOW) -> DesignMatrix:
    """Estimation rows for origins ``origin - horizon - window + 1 .. origin - horizon``
    plus the prediction row at ``origin``.

    The window keeps exactly ``window`` rows; any history needed for lags or
    differencing is read from before the window start.
    """
    h = int(horizon)
    if h < 1:
        raise ValueError("horizon must be >= 1 day")
    if not 1 <= hour <= 24:
        raise ValueError("hour must lie in 1..24")
    T = int(origin)
    if T >= builder.n_days:
        raise InsufficientHistory(f"origin index {T} beyond dataset end")
    rows = np.arange(T - h - window + 1, T - h + 1)
    back = MAX_AR_LAG + (1 if spec.differencing else 0)
    _check_rows(rows, back, builder)
    hr = hour - 1
    price = builder.data["price"]

    names, groups, prov, X, info = _columns(spec, builder, rows, h, hour, T, "estimate")
    _, _, _, xp, info_p = _columns(spec, builder, np.array([T]), h, hour, T, "predict")
    xp = xp[0]
    y = price[rows + h, hr].copy()
    level = 0.0
    if spec.differencing:
        y = y - price[rows, hr]
        dummy = np.array([g == "calendar" for g in groups], dtype=bool)
        if len(names):
            _, _, _, Xprev, _ = _columns(spec, builder, rows - 1, h, hour, T, "estimate")
            _, _, _, xprev, _ = _columns(spec, builder, np.array([T - 1]), h, hour, T, "predict")
            X = np.where(dummy, X, X - Xprev)
            xp = np.where(dummy, xp, xp - xprev[0])
        level = float(price[T, hr])
    bad = [nm for j, nm in enumerate(names) if not (np.all(np.isfinite(X[:, j])) and np.isfinite(xp[j]))]
    if bad:
        fuel_bad = [nm for nm in bad if nm.split("_")[0] in FUEL_COLUMNS]
        if fuel_bad:
            raise StaleQuote(f"no fresh quote for {', '.join(fuel_bad[:4])} at origin {builder.data.day(T)}")
        raise InsufficientHistory(f"non-finite values in {', '.join(bad[:4])}")
    return DesignMatrix(names, groups, prov, X, y, rows, xp, T, h, hour, level,
                        info_rows=info, info_pred=int(info_p[0]))


# --------------------------------------------------------------------------- noise regressors

def noise_series(n_days: int, count: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-day white-noise and random-walk columns, (n_days, count) each.

    Each family has its own stream, so a shorter ``n_days`` yields a prefix of
    the longer series.
    """
    rw, rb = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
    white = rw.standard_normal((n_days, count))
    walk = np.cumsum(rb.standard_normal((n_days, count)), axis=0)
    return white, walk


def add_noise_regressors(design: DesignMatrix, count: int, kind: str = "both", seed: int = 0,
                         n_days: int | None = None) -> DesignMatrix:
    """Append ``count`` white-noise and/or ``count`` random-walk columns.

    Noise is a per-day series indexed by origin, so the prediction row continues
    the same paths. Columns take the group ``noise`` (bounded to [0, inf)).
    """
    if count == 0:
        return design
    if kind not in ("both", "white", "brownian"):
        raise ValueError(f"unknown noise kind {kind!r}")
    n_days = n_days if n_days is not None else int(design.origin) + 1
    white, walk = noise_series(n_days, count, seed)
    idx = design.rows
    names, blocks_x, blocks_p = [], [], []
    if kind in ("both", "white"):
        names += [f"noise_white_{i + 1}" for i in range(count)]
        blocks_x.append(white[idx]); blocks_p.append(white[design.origin])
    if kind in ("both", "brownian"):
        names += [f"noise_bm_{i + 1}" for i in range(count)]
        blocks_x.append(walk[idx]); blocks_p.append(walk[design.origin])
    return replace(design,
                   names=design.names + names,
                   groups=design.groups + ["noise"] * len(names),
                   provenance=design.provenance + ["origin"] * len(names),
                   X=np.hstack([design.X, *blocks_x]),
                   x_pred=np.concatenate([design.x_pred, *blocks_p]))


def autoregressive_features(data: HourlyDataset, origin: int, hour: int) -> dict[str, float]:
    """Price_t, Price_{t-1}, Price_{t-6} at ``hour`` and the hour-24 price of day t."""
    if origin - MAX_AR_LAG < 0 or origin >= data.n_days:
        raise InsufficientHistory(f"autoregressive lags need 6 days before origin index {origin}")
    p = data["price"]
    out = {nm: float(p[origin - lag, hour - 1]) for nm, lag in AR_LAGS.items()}
    out["price_last_hour_t"] = float(p[origin, 23])
    return out


def fuel_features(futures: FuturesStore, origin: dt.date, mode: str, horizon: int,
                  target: dt.date | None = None) -> dict[str, float]:
    """Fuel prices under one of the three alignments."""
    from .ingest import last_quote_on_or_before
    if mode == "front_month":
        day, mat = origin, 1
    elif mode == "maturity_h":
        day, mat = origin, maturity_for_horizon(horizon)
    elif mode == "contemporaneous":
        day, mat = (target if target is not None else origin + dt.timedelta(days=horizon)), 1
    else:
        raise ValueError(f"unknown fuel mode {mode!r}")
    return {c: last_quote_on_or_before(futures, day, c, mat) for c in FUEL_COLUMNS}


def portfolio_features(builder: FeatureBuilder, origin: int, horizon: int, commodity: str) -> dict[str, float]:
    """Averaged lagged futures for one commodity at one origin."""
    out = {}
    for delivery, lag, mat in portfolio_lag_spec(horizon).entries:
        src = origin - 30 * lag
        if src - PORTFOLIO_SPAN + 1 < 0:
            raise InsufficientHistory(f"portfolio lag {lag} reaches before the dataset")
        v = builder.portfolio_series(commodity, mat)[src]
        if not np.isfinite(v):
            raise InsufficientHistory(f"no {commodity} M{mat} quotes in the 30 days to index {src}")
        out[f"{commodity}_{delivery}_L{lag}"] = float(v)
    return out
