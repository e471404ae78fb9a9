"""Model catalog and per-origin fit/forecast execution.

A daily fit estimates 24 independent hourly models for one origin and horizon.
Forecast records carry an additive decomposition so that
``intercept + sum(components) == prediction``.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EpfError, InsufficientHistory, UnknownModel
from .features import (DesignMatrix, FeatureBuilder, ModelSpec, add_noise_regressors,
                       assemble_design, DEFAULT_WINDOW)
from .fundamentals import CoefficientBounds, derive_bounds
from .ingest import HourlyDataset
from .solver import FitResult, SolverConfig, fit_elastic_net

ALL_GROUPS = ("week_dummies", "annual_seasons", "autoreg", "res_load", "fuels")

_CATALOG = (
    ModelSpec("naive", (), naive=True),
    ModelSpec("wd", ("week_dummies",)),
    ModelSpec("expert", ALL_GROUPS),
    ModelSpec("constr", ALL_GROUPS, constrained=True),
    ModelSpec("constr-diff", ALL_GROUPS, constrained=True, differencing=True),
    ModelSpec("portfolio", ALL_GROUPS, constrained=True, portfolio=True),
    ModelSpec("short-term", ALL_GROUPS, constrained=True, short_term_hybrid=True),
    ModelSpec("current", ALL_GROUPS, constrained=True, current=True),
    ModelSpec("wd-rl", ("week_dummies", "res_load"), constrained=True, seasonal_rl=True),
    ModelSpec("wd-rl-c", ("week_dummies", "res_load"), constrained=True, current=True),
    ModelSpec("wd-arl-c", ("week_dummies", "autoreg", "res_load"), constrained=True, current=True),
    ModelSpec("wd-f", ("week_dummies", "fuels"), constrained=True),
    ModelSpec("wd-f-c", ("week_dummies", "fuels"), constrained=True, current=True),
)

# component label per column (bound) group
COMPONENT_OF = {"autoregressive": "autoreg", "res": "res", "load": "load", "co2": "co2", "gas": "gas",
                "coal": "coal", "oil": "oil", "noise": "noise"}
COMPONENTS = ("weekday", "season", "autoreg", "res", "load", "co2", "gas", "coal", "oil", "noise", "level")


def model_catalog() -> list[ModelSpec]:
    """The 13 model variants, in table order."""
    return list(_CATALOG)


def get_spec(name: str) -> ModelSpec:
    for s in _CATALOG:
        if s.name == name:
            return s
    raise UnknownModel(f"unknown model {name!r}; choose from {', '.join(s.name for s in _CATALOG)}")


def column_bounds(design: DesignMatrix, spec: ModelSpec, bounds: CoefficientBounds) -> tuple[np.ndarray, np.ndarray]:
    """Physical lower/upper bound per design column."""
    p = len(design.names)
    if not spec.constrained:
        return np.full(p, -np.inf), np.full(p, np.inf)
    lo, up = np.empty(p), np.empty(p)
    for j, g in enumerate(design.groups):
        if g == "noise":
            lo[j], up[j] = 0.0, np.inf
        else:
            lo[j], up[j] = bounds.get(g)
    return lo, up


def _component(name: str, group: str) -> str:
    if group == "calendar":
        return "weekday" if name in ("mon", "fri", "sat", "sun") else "season"
    return COMPONENT_OF[group]


@dataclass(frozen=True)
class ForecastRecord:
    model: str
    origin: dt.date
    horizon: int
    target: dt.date
    hour: int
    prediction: float
    actual: float
    intercept: float
    components: dict[str, float]
    flags: tuple[str, ...] = ()

    @property
    def error(self) -> float:
        return self.actual - self.prediction


@dataclass
class DailyFit:
    """24 hourly fits sharing one origin, horizon and window."""

    spec: ModelSpec
    origin: int
    horizon: int
    fits: list[FitResult | None]
    designs: list[DesignMatrix | None]
    flags: list[tuple[str, ...]]
    window: tuple[int, int] | None = None  # first and last estimation origin index


def fit_daily(spec: ModelSpec, builder: FeatureBuilder, origin: int, horizon: int,
              bounds: CoefficientBounds | None = None, config: SolverConfig = SolverConfig(),
              window: int = DEFAULT_WINDOW, noise: tuple[int, str, int] | None = None) -> DailyFit:
    """Fit the 24 hourly models of ``spec`` at ``origin`` for ``horizon`` days.

    Errors in one hour are recorded as flags on that hour; the other hours
    still fit. ``noise`` is ``(count, kind, seed)`` for spurious-regressor runs.
    """
    if spec.naive:
        raise ValueError("the naive benchmark has no fit; use naive_forecast")
    bounds = bounds if bounds is not None else derive_bounds()
    fits, designs, flags = [], [], []
    span = None
    for hour in range(1, 25):
        try:
            d = assemble_design(builder, spec, horizon, hour, origin, window)
            if noise is not None and noise[0] > 0:
                d = add_noise_regressors(d, noise[0], noise[1], noise[2], n_days=builder.n_days)
            lo, up = column_bounds(d, spec, bounds)
            fit = fit_elastic_net(d.X, d.y, d.names, lo, up, config)
        except EpfError as exc:
            fits.append(None)
            designs.append(None)
            flags.append((exc.code,))
            continue
        span = (int(d.rows[0]), int(d.rows[-1]))
        fits.append(fit)
        designs.append(d)
        flags.append(() if fit.converged else ("solver.NonConvergence",))
    return DailyFit(spec, origin, horizon, fits, designs, flags, span)


def decompose(fit: FitResult, design: DesignMatrix) -> tuple[float, dict[str, float], float]:
    """(intercept, components, prediction) for a design's prediction row."""
    comps = {c: 0.0 for c in COMPONENTS}
    contrib = fit.coefficients * design.x_pred
    for nm, g, v in zip(design.names, design.groups, contrib):
        comps[_component(nm, g)] += float(v)
    comps["level"] = float(design.level)
    pred = fit.intercept + float(sum(comps.values()))
    return fit.intercept, comps, pred


def forecast_daily(daily: DailyFit, data: HourlyDataset) -> list[ForecastRecord]:
    """24 records for the fit's target day; flagged hours carry NaN predictions."""
    T = daily.origin
    origin_day = data.day(T)
    target_day = origin_day + dt.timedelta(days=daily.horizon)
    tidx = T + daily.horizon
    out = []
    for hour, (fit, design, flags) in enumerate(zip(daily.fits, daily.designs, daily.flags), start=1):
        actual = float(data["price"][tidx, hour - 1]) if tidx < data.n_days else math.nan
        if fit is None:
            out.append(ForecastRecord(daily.spec.name, origin_day, daily.horizon, target_day, hour,
                                      math.nan, actual, math.nan, {}, flags))
            continue
        intercept, comps, pred = decompose(fit, design)
        out.append(ForecastRecord(daily.spec.name, origin_day, daily.horizon, target_day, hour,
                                  pred, actual, intercept, comps, flags))
    return out


def naive_forecast(data: HourlyDataset, origin: int, horizon: int, hour: int) -> float:
    """Last price for Tue-Thu targets, else the last price on the target's weekday."""
    target_wd = (data.day(origin) + dt.timedelta(days=horizon)).weekday()
    if target_wd in (1, 2, 3):
        src = origin
    else:
        src = origin - (data.day(origin).weekday() - target_wd) % 7
    if src < 0 or origin >= data.n_days:
        raise InsufficientHistory(f"naive forecast needs day index {src}")
    return float(data["price"][src, hour - 1])


def naive_records(data: HourlyDataset, origin: int, horizon: int) -> list[ForecastRecord]:
    origin_day = data.day(origin)
    target_day = origin_day + dt.timedelta(days=horizon)
    tidx = origin + horizon
    out = []
    for hour in range(1, 25):
        actual = float(data["price"][tidx, hour - 1]) if tidx < data.n_days else math.nan
        try:
            pred = naive_forecast(data, origin, horizon, hour)
            flags: tuple[str, ...] = ()
        except EpfError as exc:
            pred, flags = math.nan, (exc.code,)
        comps = {c: 0.0 for c in COMPONENTS}
        out.append(ForecastRecord("naive", origin_day, horizon, target_day, hour, pred, actual,
                                  pred, comps, flags))
    return out


def run_cell(spec: ModelSpec, builder: FeatureBuilder, origin: int, horizon: int,
             bounds: CoefficientBounds | None = None, config: SolverConfig = SolverConfig(),
             window: int = DEFAULT_WINDOW, noise=None) -> tuple[list[ForecastRecord], DailyFit | None]:
    """Fit and forecast one (model, origin, horizon) cell."""
    if spec.naive:
        return naive_records(builder.data, origin, horizon), None
    daily = fit_daily(spec, builder, origin, horizon, bounds, config, window, noise)
    return forecast_daily(daily, builder.data), daily


def coefficient_path(spec: ModelSpec, builder: FeatureBuilder, horizons: Sequence[int], origin: int,
                     hour: int, bounds: CoefficientBounds | None = None,
                     config: SolverConfig = SolverConfig(), window: int = DEFAULT_WINDOW,
                     noise=None) -> tuple[np.ndarray, list[str], np.ndarray]:
    """Scaled coefficients per horizon for one hour at a fixed origin.

    Returns (horizons, regressor names, matrix horizon x regressor). Names are
    the union over horizons in first-seen order; absent entries are NaN.
    """
    bounds = bounds if bounds is not None else derive_bounds()
    rows = []
    for h in horizons:
        d = assemble_design(builder, spec, h, hour, origin, window)
        if noise is not None and noise[0] > 0:
            d = add_noise_regressors(d, noise[0], noise[1], noise[2], n_days=builder.n_days)
        lo, up = column_bounds(d, spec, bounds)
        fit = fit_elastic_net(d.X, d.y, d.names, lo, up, config)
        rows.append(dict(zip(d.names, fit.coefficients_scaled)))
    names: list[str] = []
    for r in rows:
        names += [n for n in r if n not in names]
    mat = np.array([[r.get(n, np.nan) for n in names] for r in rows])
    return np.asarray(horizons), names, mat
