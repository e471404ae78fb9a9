"""Forecast metrics, Diebold-Mariano and ADF tests, and report rendering.

Errors are ``actual - prediction``. Metrics pool all hours of all target days
in a group (24N errors). The DM test compares daily L1 losses summed over the
24 hours with a Newey-West long-run variance. ADF p-values interpolate in a
simulated Dickey-Fuller quantile table.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import norm

from .dftable import PROBS
from .dftable_values import QUANTILES, SIZES
from .errors import DegenerateVariance, EmptyGroup, EmptyPlotInput, SingularRegression
from .models import COMPONENTS, ForecastRecord

DM_MAX_LAG = 30
DM_MIN_DAYS = 30
ADF_MIN_OBS = 50


# --------------------------------------------------------------------------- metrics

@dataclass(frozen=True)
class MetricsResult:
    model: str
    horizon: int
    group: str  # "overall" or a year
    rmse: float
    mae: float
    n_days: int


def _valid(r: ForecastRecord) -> bool:
    return math.isfinite(r.prediction) and math.isfinite(r.actual)


def compute_metrics(records: Iterable[ForecastRecord], grouping: str = "overall") -> list[MetricsResult]:
    """RMSE and MAE per (model, horizon) and, for ``grouping="year"``, target year.

    Flagged records without a prediction and records without an actual are
    left out.
    """
    if grouping not in ("overall", "year"):
        raise ValueError(f"unknown grouping {grouping!r}")
    groups: dict[tuple[str, int, str], list[ForecastRecord]] = {}
    for r in records:
        g = "overall" if grouping == "overall" else str(r.target.year)
        groups.setdefault((r.model, r.horizon, g), []).append(r)
    if not groups:
        raise EmptyGroup("no records to evaluate")
    out = []
    for (model, h, g), recs in sorted(groups.items()):
        ok = [r for r in recs if _valid(r)]
        if not ok:
            raise EmptyGroup(f"no valid forecasts for model {model}, horizon {h}, group {g}")
        e = np.array([r.actual - r.prediction for r in ok])
        out.append(MetricsResult(model, h, g, float(np.sqrt(np.mean(e ** 2))), float(np.mean(np.abs(e))),
                                 len({r.target for r in ok})))
    return out


# --------------------------------------------------------------------------- Diebold-Mariano

@dataclass(frozen=True)
class DmResult:
    model_a: str
    model_b: str
    horizon: int
    statistic: float
    p_value: float  # one-sided, small when A is more accurate
    n_days: int
    hac_lag: int
    loss: str = "L1-daily"


def hac_lag(horizon: int) -> int:
    return min(max(horizon - 1, 0), DM_MAX_LAG)


def newey_west_variance(d: np.ndarray, q: int) -> float:
    """Bartlett-kernel long-run variance of ``d`` with ``q`` lags."""
    d = np.asarray(d, float)
    n = len(d)
    x = d - d.mean()
    omega = float(x @ x) / n
    for k in range(1, q + 1):
        omega += 2.0 * (1.0 - k / (q + 1)) * float(x[k:] @ x[:-k]) / n
    return omega


def dm_statistic(d: np.ndarray, q: int) -> tuple[float, float]:
    """(statistic, one-sided p) for a loss-differential series."""
    d = np.asarray(d, float)
    omega = newey_west_variance(d, q)
    if not omega > 1e-300 * max(1.0, float(np.max(np.abs(d))) ** 2) or not math.isfinite(omega):
        raise DegenerateVariance("loss differential has no variance; the forecasts do not differ")
    stat = float(d.mean() / math.sqrt(omega / len(d)))
    return stat, float(norm.cdf(stat))


def loss_differential(records_a: Iterable[ForecastRecord], records_b: Iterable[ForecastRecord],
                      horizon: int) -> tuple[list, np.ndarray]:
    """Per target day: sum over hours of |e_A| minus sum of |e_B|, on days both cover fully."""
    def daily(records):
        acc: dict = {}
        for r in records:
            if r.horizon != horizon or not _valid(r):
                continue
            acc.setdefault(r.target, {})[r.hour] = abs(r.actual - r.prediction)
        return {t: sum(v.values()) for t, v in acc.items() if len(v) == 24}
    a, b = daily(records_a), daily(records_b)
    days = sorted(set(a) & set(b))
    return days, np.array([a[t] - b[t] for t in days])


def dm_test(records_a: Sequence[ForecastRecord], records_b: Sequence[ForecastRecord], horizon: int,
            min_days: int = DM_MIN_DAYS) -> DmResult:
    """One-sided DM test that model A is more accurate than model B at ``horizon``."""
    days, d = loss_differential(records_a, records_b, horizon)
    if len(days) < min_days:
        raise EmptyGroup(f"DM test needs >= {min_days} common target days, got {len(days)}")
    q = hac_lag(horizon)
    stat, p = dm_statistic(d, q)
    name = lambda rs: next((r.model for r in rs), "?")  # noqa: E731
    return DmResult(name(records_a), name(records_b), horizon, stat, p, len(days), q)


# --------------------------------------------------------------------------- ADF

@dataclass(frozen=True)
class AdfResult:
    series_id: str
    lag_order: int
    statistic: float
    p_value: float
    n_obs: int

    @property
    def reject_at_5pct(self) -> bool:
        return self.p_value < 0.05


def df_pvalue(stat: float, n_obs: int) -> float:
    """P(DF <= stat) from the simulated table, linear in 1/n between table sizes."""
    sizes = np.array(SIZES, float)
    table = np.array(QUANTILES)
    inv = 1.0 / np.clip(n_obs, sizes[0], sizes[-1])
    inv_sizes = 1.0 / sizes  # descending
    q = np.array([np.interp(inv, inv_sizes[::-1], table[::-1, j]) for j in range(len(PROBS))])
    return float(np.interp(stat, q, PROBS, left=PROBS[0], right=PROBS[-1]))


def _adf_design(y: np.ndarray, p: int, start: int):
    dy = np.diff(y)
    # equation for dy[t], t = start..len(dy)-1, needs dy[t-p..t-1]
    t = np.arange(start, len(dy))
    cols = [np.ones(len(t)), y[t]]  # y[t] is the level preceding dy[t]
    for i in range(1, p + 1):
        cols.append(dy[t - i])
    return np.column_stack(cols), dy[t]


def _ols(X, z):
    beta, _, rank, _ = np.linalg.lstsq(X, z, rcond=None)
    if rank < X.shape[1]:
        raise SingularRegression("ADF regression is rank deficient")
    resid = z - X @ beta
    return beta, resid


def adf_test(series: Sequence[float], max_lag: int | None = None, series_id: str = "series") -> AdfResult:
    """Augmented Dickey-Fuller test with a constant; lag order by AIC up to ``max_lag``.

    The lag search uses a common sample; the chosen order is refitted on all
    usable observations.
    """
    y = np.asarray(series, float)
    n = len(y)
    if n < ADF_MIN_OBS:
        raise ValueError(f"ADF test needs >= {ADF_MIN_OBS} observations, got {n}")
    if not np.all(np.isfinite(y)):
        raise ValueError("series contains non-finite values")
    if max_lag is None:
        max_lag = int(12 * (n / 100) ** 0.25)
    max_lag = max(0, min(max_lag, n // 2 - 3))
    best_p, best_aic = None, np.inf
    for p in range(max_lag + 1):
        X, z = _adf_design(y, p, max_lag)
        try:
            _, resid = _ols(X, z)
        except SingularRegression:
            continue  # lagged differences collinear with the constant
        m = len(z)
        with np.errstate(divide="ignore"):
            aic = m * float(np.log(float(resid @ resid) / m)) + 2 * X.shape[1]
        if best_p is None or aic < best_aic - 1e-12:
            best_p, best_aic = p, aic
    if best_p is None:
        raise SingularRegression("ADF regression is rank deficient at every lag order")
    X, z = _adf_design(y, best_p, best_p)
    beta, resid = _ols(X, z)
    m, k = X.shape
    rss = float(resid @ resid)
    scale = float(np.mean(z ** 2)) or 1.0
    if rss <= 1e-20 * m * scale:
        # exact fit: the differences are deterministic, only the sign of gamma is informative
        g = float(beta[1] * np.std(X[:, 1]))
        stat = 0.0 if abs(g) <= 1e-8 * math.sqrt(scale) else math.copysign(math.inf, g)
    else:
        cov = rss / (m - k) * np.linalg.inv(X.T @ X)
        stat = float(beta[1] / math.sqrt(cov[1, 1]))
    return AdfResult(series_id, best_p, stat, df_pvalue(stat, m), m)


# --------------------------------------------------------------------------- tables

def _write_rows(rows: list[list[str]]) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _cell(v: float) -> str:
    return "" if v is None or not math.isfinite(v) else f"{v:.2f}"


def render_tables(results: Sequence, shape: str, metric: str = "rmse", horizon: int | None = None,
                  svg_path: str | Path | None = None) -> str:
    """Delimited-text table in one of three layouts, optionally with an SVG heatmap.

    ``by_horizon``: models x horizons; ``by_year``: years x models;
    ``dm_matrix``: model x model one-sided p-values at one horizon (row model A).
    """
    if not results:
        raise EmptyGroup("nothing to tabulate")
    if shape == "by_horizon":
        models = list(dict.fromkeys(r.model for r in results))
        hs = sorted({r.horizon for r in results})
        val = {(r.model, r.horizon): getattr(r, metric) for r in results if r.group == "overall"}
        if not val:
            val = {(r.model, r.horizon): getattr(r, metric) for r in results}
        rows = [["model", *[f"h{h}" for h in hs]]]
        grid = np.array([[val.get((m, h), math.nan) for h in hs] for m in models])
        rows += [[m, *[_cell(v) for v in grid[i]]] for i, m in enumerate(models)]
        rl, cl = models, [str(h) for h in hs]
    elif shape == "by_year":
        models = list(dict.fromkeys(r.model for r in results))
        years = sorted({r.group for r in results if r.group != "overall"})
        if horizon is not None:
            results = [r for r in results if r.horizon == horizon]
        val = {(r.group, r.model): getattr(r, metric) for r in results}
        rows = [["year", *models]]
        grid = np.array([[val.get((y, m), math.nan) for m in models] for y in years])
        rows += [[y, *[_cell(v) for v in grid[i]]] for i, y in enumerate(years)]
        rl, cl = years, models
    elif shape == "dm_matrix":
        hs = sorted({r.horizon for r in results})
        h = horizon if horizon is not None else hs[0]
        sel = [r for r in results if r.horizon == h]
        models = list(dict.fromkeys([r.model_a for r in sel] + [r.model_b for r in sel]))
        pv = {(r.model_a, r.model_b): r.p_value for r in sel}
        grid = np.full((len(models), len(models)), math.nan)
        rows = [["model_a\\model_b", *models]]
        for i, a in enumerate(models):
            row = [a]
            for j, b in enumerate(models):
                if i == j:
                    row.append("—")
                    continue
                v = pv.get((a, b), math.nan)
                grid[i, j] = v
                row.append("" if not math.isfinite(v) else f"{v:.4f}")
            rows.append(row)
        rl, cl = models, models
    else:
        raise ValueError(f"unknown table shape {shape!r}")
    if svg_path is not None:
        _heatmap(grid, rl, cl, svg_path, pvalues=(shape == "dm_matrix"))
    return _write_rows(rows)


# --------------------------------------------------------------------------- SVG output

def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    matplotlib.rcParams["svg.hashsalt"] = "midterm-epf"
    return plt


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, format="svg", metadata={"Date": None})
    import matplotlib.pyplot as plt
    plt.close(fig)
    return path


def _heatmap(grid: np.ndarray, rows: Sequence[str], cols: Sequence[str], path, pvalues: bool = False):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(1.0 + 0.8 * len(cols), 1.0 + 0.45 * len(rows)))
    shade = np.full(grid.shape, np.nan)
    for j in range(grid.shape[1]):
        col = grid[:, j]
        ok = np.isfinite(col)
        if not ok.any():
            continue
        if pvalues:
            shade[:, j] = np.where(col < 0.05, 0.0, np.where(col < 0.1, 1.0, 2.0))
        else:
            lo, hi = np.nanpercentile(col, [33.3, 66.7])
            shade[:, j] = np.where(col <= lo, 0.0, np.where(col <= hi, 1.0, 2.0))
        shade[~ok, j] = np.nan
    ax.imshow(shade, cmap="RdYlGn_r", vmin=0, vmax=2, aspect="auto")
    for i in range(grid.shape[0]):
        for j in range(grid.shape[1]):
            text = "—" if pvalues and i == j else ("" if not np.isfinite(grid[i, j]) else
                                                        f"{grid[i, j]:.{3 if pvalues else 2}f}")
            ax.text(j, i, text, ha="center", va="center", fontsize=7)
    ax.set_xticks(range(len(cols)), labels=list(cols), fontsize=7)
    ax.set_yticks(range(len(rows)), labels=list(rows), fontsize=7)
    fig.tight_layout()
    return _save(fig, path)


def render_coefficient_paths(horizons: Sequence[int], names: Sequence[str], matrix: np.ndarray,
                             path: str | Path, title: str = "") -> Path:
    """One line per regressor of scaled coefficients against horizon."""
    horizons = np.asarray(horizons)
    if horizons.size == 0 or len(names) == 0:
        raise EmptyPlotInput("no horizons or regressors to plot")
    matrix = np.asarray(matrix, float).reshape(len(horizons), len(names))
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7, 4))
    for j, nm in enumerate(names):
        ax.plot(horizons, matrix[:, j], label=nm, linewidth=1.0)
    ax.set_xlabel("horizon (days)")
    ax.set_ylabel("scaled coefficient")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=6, ncol=2)
    fig.tight_layout()
    return _save(fig, path)


def stack_components(records: Sequence[ForecastRecord]) -> tuple[np.ndarray, list[str], np.ndarray]:
    """Cumulative layers (intercept, then each component) per record.

    Returns (x, labels, layers) with ``layers[-1]`` equal to the predictions.
    """
    recs = [r for r in records if math.isfinite(r.prediction)]
    if not recs:
        raise EmptyPlotInput("no forecasts to decompose")
    recs.sort(key=lambda r: (r.target, r.hour))
    labels = ["intercept", *COMPONENTS]
    vals = np.array([[r.intercept, *[r.components.get(c, 0.0) for c in COMPONENTS]] for r in recs])
    layers = np.cumsum(vals, axis=1).T
    layers[-1] = [r.prediction for r in recs]  # identical up to round-off; keep the exact forecast
    return np.arange(len(recs)), labels, layers


def render_components(records: Sequence[ForecastRecord], path: str | Path, title: str = "") -> Path:
    """Stacked contributions whose top envelope is the forecast, plus the actual price."""
    x, labels, layers = stack_components(records)
    recs = sorted((r for r in records if math.isfinite(r.prediction)), key=lambda r: (r.target, r.hour))
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(9, 4))
    prev = np.zeros(len(x))
    for lab, layer in zip(labels, layers):
        if np.allclose(layer, prev):
            prev = layer
            continue
        ax.fill_between(x, prev, layer, step=None, alpha=0.6, label=lab, linewidth=0)
        prev = layer
    ax.plot(x, layers[-1], color="black", linewidth=1.0, label="forecast")
    actual = np.array([r.actual for r in recs])
    if np.isfinite(actual).any():
        ax.plot(x, actual, color="grey", linewidth=0.8, linestyle="--", label="actual")
    ax.set_xlabel("hour index")
    ax.set_ylabel("EUR/MWh")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=6, ncol=3)
    fig.tight_layout()
    return _save(fig, path)
