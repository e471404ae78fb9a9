"""Penalized-spline additive models for long-horizon load and RES forecasts.

The model is an additive P-spline GAM with an unpenalized linear trend::

    load ~ ps(HoD, 24) + ps(DoW, 7) + cp(SoY, 12) + ti(HoD, SoY; 12, 6)
           + ti(HoD, DoW; 12, 6) + trend
    res  ~ ps(HoD, 24) + cp(SoY, 12) + ti(HoD, SoY; 12, 6) + trend

``ps`` terms are uniform cubic B-splines on the covariate range, ``cp`` terms are
cyclic cubic B-splines, ``ti`` terms are row-wise tensor products of
sum-to-zero constrained marginals. Penalties are second-order differences
(circulant for cyclic margins) and each term's smoothing parameter is chosen by
GCV.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.interpolate import BSpline
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from .errors import BasisError, InsufficientSpan, SingularFit

SOY_PERIOD = 8765.76  # hours in a meteorological year of 365.24 days
EPOCH = dt.date(2000, 1, 1)
FORMAT_VERSION = 1
LAMBDA_GRID = 10.0 ** np.arange(-2, 5)
GCV_PASSES = 2
MIN_TRAIN_DAYS = 1095

# covariate -> (lower, upper, periodic)
COVARIATES = {
    "HoD": (0.0, 23.0, False),
    "DoW": (0.0, 6.0, False),
    "SoY": (0.0, SOY_PERIOD, True),
}


@dataclass(frozen=True)
class Margin:
    covariate: str
    k: int
    cyclic: bool = False


@dataclass(frozen=True)
class SplineTermSpec:
    """One smooth term: ``ps``/``cp`` with one margin or ``ti`` with two."""

    name: str
    kind: str
    margins: tuple[Margin, ...]
    order: int = 2

    def __post_init__(self):
        if self.kind not in ("ps", "cp", "ti"):
            raise BasisError(f"unknown term kind {self.kind!r}")
        if len(self.margins) != (2 if self.kind == "ti" else 1):
            raise BasisError(f"{self.kind} term {self.name} has {len(self.margins)} margins")
        for m in self.margins:
            if m.covariate not in COVARIATES:
                raise BasisError(f"unknown covariate {m.covariate!r}")
            if m.k < 4:
                raise BasisError(f"term {self.name}: cubic basis needs k >= 4, got {m.k}")
            if m.cyclic and not COVARIATES[m.covariate][2]:
                raise BasisError(f"term {self.name}: {m.covariate} is not periodic")
        if self.kind == "cp" and not self.margins[0].cyclic:
            raise BasisError(f"cp term {self.name} needs a cyclic margin")


def ps(cov: str, k: int) -> SplineTermSpec:
    return SplineTermSpec(f"ps({cov},{k})", "ps", (Margin(cov, k),))


def cp(cov: str, k: int) -> SplineTermSpec:
    return SplineTermSpec(f"cp({cov},{k})", "cp", (Margin(cov, k, True),))


def ti(cov1: str, k1: int, cov2: str, k2: int) -> SplineTermSpec:
    m = tuple(Margin(c, k, COVARIATES[c][2]) for c, k in ((cov1, k1), (cov2, k2)))
    return SplineTermSpec(f"ti({cov1}{k1},{cov2}{k2})", "ti", m)


def formula(target: str) -> list[SplineTermSpec]:
    if target == "load":
        return [ps("HoD", 24), ps("DoW", 7), cp("SoY", 12), ti("HoD", 12, "SoY", 6), ti("HoD", 12, "DoW", 6)]
    if target == "res":
        return [ps("HoD", 24), cp("SoY", 12), ti("HoD", 12, "SoY", 6)]
    raise ValueError(f"unknown seasonal target {target!r}")


# --------------------------------------------------------------------------- bases

def bspline_basis(x: np.ndarray, lo: float, hi: float, k: int) -> np.ndarray:
    """Cubic B-spline basis with ``k`` functions on equally spaced knots over [lo, hi]."""
    n_int = k - 3
    h = (hi - lo) / n_int
    knots = lo + h * np.arange(-3, n_int + 4)
    x = np.clip(np.asarray(x, float), lo, hi)
    return BSpline.design_matrix(x, knots, 3).toarray()


def cyclic_basis(x: np.ndarray, period: float, k: int) -> np.ndarray:
    """Cyclic cubic B-spline basis with ``k`` functions over one period.

    Built from ``k + 3`` ordinary B-splines on ``k`` equal intervals whose last
    three columns are folded onto the first three, so value and the first two
    derivatives agree at the period boundary.
    """
    h = period / k
    knots = h * np.arange(-3, k + 4)
    x = np.mod(np.asarray(x, float), period)
    # guard the right end against round-off after the modulo
    x = np.where(x >= period, 0.0, x)
    raw = BSpline.design_matrix(x, knots, 3).toarray()
    out = raw[:, :k].copy()
    out[:, :3] += raw[:, k:]
    return out


def difference_penalty(k: int, order: int = 2, cyclic: bool = False) -> np.ndarray:
    if cyclic:
        D = np.zeros((k, k))
        coef = np.diff(np.eye(order + 1), order, axis=0)[0]
        for i in range(k):
            for j, c in enumerate(coef):
                D[i, (i + j) % k] += c
    else:
        D = np.diff(np.eye(k), order, axis=0)
    return D.T @ D


def margin_basis(m: Margin, x: np.ndarray) -> np.ndarray:
    lo, hi, _ = COVARIATES[m.covariate]
    if m.cyclic:
        return cyclic_basis(x, hi, m.k)
    return bspline_basis(x, lo, hi, m.k)


def sum_to_zero(colsums: np.ndarray) -> np.ndarray:
    """Orthonormal basis (k, k-1) of the null space of the constraint row."""
    c = np.asarray(colsums, float).reshape(-1, 1)
    q, _ = np.linalg.qr(c, mode="complete")
    return q[:, 1:]


def row_tensor(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return (a[:, :, None] * b[:, None, :]).reshape(a.shape[0], -1)


def covariates(days: np.ndarray, hours: np.ndarray) -> dict[str, np.ndarray]:
    """Covariate values for local days (datetime64[D]) and hours 1..24.

    The absolute hour index ``t`` counts from a fixed epoch so that the trend
    and the season-of-year phase are consistent across fits.
    """
    days = np.asarray(days, dtype="datetime64[D]")
    hours = np.asarray(hours)
    dnum = (days - np.datetime64(EPOCH, "D")).astype(np.int64)
    t = dnum * 24.0 + (hours - 1)
    return {
        "HoD": (hours - 1).astype(float),
        # 2000-01-01 was a Saturday
        "DoW": ((dnum + 5) % 7).astype(float),
        "SoY": np.mod(t, SOY_PERIOD),
        "t": t,
    }


@dataclass
class TermBasis:
    """A term's evaluated constrained basis and penalty."""

    spec: SplineTermSpec
    constraints: list[np.ndarray]  # raw-margin column sums on the training data
    penalty: np.ndarray

    def zs(self) -> list[np.ndarray]:
        return [sum_to_zero(c) for c in self.constraints]

    def evaluate(self, cov: dict[str, np.ndarray]) -> np.ndarray:
        parts = [margin_basis(m, cov[m.covariate]) @ z for m, z in zip(self.spec.margins, self.zs())]
        return parts[0] if len(parts) == 1 else row_tensor(parts[0], parts[1])


def build_basis(spec: SplineTermSpec, cov: dict[str, np.ndarray]) -> tuple[np.ndarray, np.ndarray, TermBasis]:
    """Constrained design block and penalty for one term on training covariates."""
    raws, constraints, pens = [], [], []
    for m in spec.margins:
        x = cov[m.covariate]
        n_distinct = len(np.unique(x))
        if m.k > n_distinct:
            raise BasisError(f"term {spec.name}: k={m.k} exceeds {n_distinct} distinct {m.covariate} values")
        raw = margin_basis(m, x)
        constraints.append(raw.sum(axis=0))
        z = sum_to_zero(constraints[-1])
        raws.append(raw @ z)
        pens.append(z.T @ difference_penalty(m.k, spec.order, m.cyclic) @ z)
    if len(raws) == 1:
        X, P = raws[0], pens[0]
    else:
        X = row_tensor(raws[0], raws[1])
        P = np.kron(pens[0], np.eye(pens[1].shape[0])) + np.kron(np.eye(pens[0].shape[0]), pens[1])
    return X, P, TermBasis(spec, constraints, P)


# --------------------------------------------------------------------------- fitting

def penalized_solve(XtX: np.ndarray, Xty: np.ndarray, S: np.ndarray) -> tuple[np.ndarray, tuple]:
    A = XtX + S
    try:
        fac = cho_factor(A, lower=True)
    except LinAlgError:
        raise SingularFit("penalized normal equations are not positive definite") from None
    if not np.all(np.isfinite(fac[0])) or np.min(np.abs(np.diag(fac[0]))) < 1e-10 * np.sqrt(np.max(np.diag(A))):
        raise SingularFit("penalized normal equations are numerically singular")
    return cho_solve(fac, Xty), fac


def _gcv(XtX, Xty, yty, n, S):
    theta, fac = penalized_solve(XtX, Xty, S)
    rss = yty - 2 * theta @ Xty + theta @ XtX @ theta
    edf = np.trace(cho_solve(fac, XtX))
    if n - edf <= 0:
        return np.inf, theta
    return n * max(rss, 0.0) / (n - edf) ** 2, theta


def _penalty_matrix(blocks, pens, lambdas, p):
    S = np.zeros((p, p))
    for (a, b), P, lam in zip(blocks, pens, lambdas):
        S[a:b, a:b] = lam * P
    return S


@dataclass
class SeasonalModel:
    target: str
    terms: list[TermBasis]
    lambdas: list[float]
    theta: np.ndarray  # [intercept, term coefficients..., trend]
    trend_center: float
    trend_scale: float
    train_start: dt.date
    train_end: dt.date
    gcv: float = float("nan")
    floor_zero: bool = field(default=False)

    @property
    def intercept(self) -> float:
        return float(self.theta[0])

    @property
    def trend_slope(self) -> float:
        """Trend slope in units per hour."""
        return float(self.theta[-1] / self.trend_scale)

    def design(self, cov: dict[str, np.ndarray]) -> np.ndarray:
        n = len(cov["t"])
        cols = [np.ones((n, 1))] + [tb.evaluate(cov) for tb in self.terms]
        cols.append(((cov["t"] - self.trend_center) / self.trend_scale)[:, None])
        return np.hstack(cols)

    def predict(self, days: np.ndarray, hours: np.ndarray) -> np.ndarray:
        days = np.asarray(days, dtype="datetime64[D]")
        hours = np.asarray(hours)
        days, hours = np.broadcast_arrays(days, hours)
        cov = covariates(days.ravel(), hours.ravel())
        out = self.design(cov) @ self.theta
        if self.floor_zero:
            out = np.maximum(out, 0.0)
        return out.reshape(days.shape)

    def predict_grid(self, first_day: dt.date, n_days: int) -> np.ndarray:
        """(n_days, 24) forecast array starting at ``first_day``."""
        days = np.datetime64(first_day, "D") + np.arange(n_days)
        return self.predict(days[:, None], np.arange(1, 25)[None, :])


def fit_seasonal(y: np.ndarray, start_day: dt.date, target: str = "load",
                 specs: Sequence[SplineTermSpec] | None = None,
                 lambda_grid: Sequence[float] = LAMBDA_GRID, passes: int = GCV_PASSES,
                 min_days: int = MIN_TRAIN_DAYS, lambdas: Sequence[float] | None = None) -> SeasonalModel:
    """Fit the additive model to a (days, 24) hourly series starting at ``start_day``.

    Smoothing parameters are picked per term by GCV over ``lambda_grid``,
    coordinate-wise, ``passes`` sweeps; pass ``lambdas`` to fix them instead.
    Penalties are rescaled to the norm of their term's Gram block so one grid
    serves all terms.
    """
    y = np.asarray(y, float)
    if y.ndim != 2 or y.shape[1] != 24:
        raise ValueError("y must have shape (days, 24)")
    n_days = y.shape[0]
    if n_days < min_days:
        raise InsufficientSpan(f"seasonal fit needs >= {min_days} days, got {n_days}")
    if not np.all(np.isfinite(y)):
        raise ValueError("seasonal target contains non-finite values")
    specs = list(formula(target) if specs is None else specs)
    days = np.datetime64(start_day, "D") + np.arange(n_days)
    cov = covariates(np.repeat(days, 24), np.tile(np.arange(1, 25), n_days))
    yv = y.ravel()
    n = len(yv)

    t_center = float(cov["t"].mean())
    t_scale = float(cov["t"].std()) or 1.0
    blocks_X = [np.ones((n, 1))]
    terms, pens, blocks = [], [], []
    col = 1
    for spec in specs:
        X, P, tb = build_basis(spec, cov)
        scale = np.linalg.norm(X.T @ X) / max(np.linalg.norm(P), 1e-300)
        tb.penalty = P * scale
        blocks_X.append(X)
        terms.append(tb)
        pens.append(tb.penalty)
        blocks.append((col, col + X.shape[1]))
        col += X.shape[1]
    blocks_X.append(((cov["t"] - t_center) / t_scale)[:, None])
    X = np.hstack(blocks_X)
    p = X.shape[1]
    XtX = X.T @ X
    Xty = X.T @ yv
    yty = float(yv @ yv)

    if lambdas is not None:
        lam = [float(v) for v in lambdas]
        if len(lam) != len(terms):
            raise ValueError("one smoothing parameter per term required")
        score, theta = _gcv(XtX, Xty, yty, n, _penalty_matrix(blocks, pens, lam, p))
    else:
        lam = [float(np.median(lambda_grid))] * len(terms)
        score, theta = _gcv(XtX, Xty, yty, n, _penalty_matrix(blocks, pens, lam, p))
        for _ in range(passes):
            for j in range(len(terms)):
                for cand in lambda_grid:
                    trial = list(lam)
                    trial[j] = float(cand)
                    s, th = _gcv(XtX, Xty, yty, n, _penalty_matrix(blocks, pens, trial, p))
                    if s < score - 1e-12 * abs(score):
                        score, theta, lam = s, th, trial
    end = start_day + dt.timedelta(days=n_days - 1)
    return SeasonalModel(target, terms, lam, theta, t_center, t_scale, start_day, end, float(score),
                         floor_zero=(target == "res"))


def forecast_seasonal(model: SeasonalModel, day: dt.date, hour: int) -> float:
    """Point forecast for one local day and hour 1..24."""
    return float(model.predict(np.array([np.datetime64(day, "D")]), np.array([hour]))[0])


# --------------------------------------------------------------------------- schedule

def expanding_refit_schedule(start_day: dt.date, end_day: dt.date,
                             min_days: int = MIN_TRAIN_DAYS) -> list[tuple[dt.date, int]]:
    """(train_end, forecast year) pairs for yearly expanding refits.

    A fit ends on each 31 December that the data fully covers, once at least
    ``min_days`` days lie before it, and serves the following year.
    """
    if (end_day - start_day).days + 1 < min_days:
        raise InsufficientSpan(f"seasonal schedule needs >= {min_days} days of data")
    out = []
    for year in range(start_day.year, end_day.year + 1):
        train_end = dt.date(year, 12, 31)
        if train_end > end_day:
            break
        if (train_end - start_day).days + 1 >= min_days:
            out.append((train_end, year + 1))
    if not out:
        raise InsufficientSpan("no complete year with enough history before it")
    return out


@dataclass
class SeasonalSet:
    """Fitted models keyed by target, each a list ordered by train_end."""

    models: dict[str, list[SeasonalModel]]

    def for_origin(self, target: str, origin: dt.date) -> SeasonalModel | None:
        """Latest model whose training data ends strictly before ``origin``."""
        best = None
        for m in self.models.get(target, []):
            if m.train_end < origin:
                best = m
        return best


def fit_schedule(series: np.ndarray, start_day: dt.date, target: str,
                 end_day: dt.date | None = None, **kwargs) -> list[SeasonalModel]:
    """Fit one model per entry of the expanding refit schedule."""
    n_days = series.shape[0]
    last = start_day + dt.timedelta(days=n_days - 1)
    if end_day is not None:
        last = min(last, end_day)
    out = []
    for train_end, _ in expanding_refit_schedule(start_day, last):
        n = (train_end - start_day).days + 1
        out.append(fit_seasonal(series[:n], start_day, target, **kwargs))
    return out


# --------------------------------------------------------------------------- persistence

def _margin_text(m: Margin) -> str:
    return f"{m.covariate}:{m.k}:{int(m.cyclic)}"


def save_model(model: SeasonalModel, path: str | Path) -> None:
    rows = [
        ["version", FORMAT_VERSION],
        ["target", model.target],
        ["span", model.train_start.isoformat(), model.train_end.isoformat()],
        ["trend", repr(model.trend_center), repr(model.trend_scale)],
        ["gcv", repr(model.gcv)],
    ]
    for tb, lam in zip(model.terms, model.lambdas):
        s = tb.spec
        rows.append(["term", s.name, s.kind, s.order, repr(lam), *[_margin_text(m) for m in s.margins]])
        for c in tb.constraints:
            rows.append(["constraint", s.name, *[repr(float(v)) for v in c]])
        rows.append(["penalty_scale", s.name, repr(_penalty_scale(tb))])
    rows.append(["theta", *[repr(float(v)) for v in model.theta]])
    with Path(path).open("w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)


def _raw_penalty(spec: SplineTermSpec, constraints) -> np.ndarray:
    pens = []
    for m, c in zip(spec.margins, constraints):
        z = sum_to_zero(c)
        pens.append(z.T @ difference_penalty(m.k, spec.order, m.cyclic) @ z)
    if len(pens) == 1:
        return pens[0]
    return np.kron(pens[0], np.eye(pens[1].shape[0])) + np.kron(np.eye(pens[0].shape[0]), pens[1])


def _penalty_scale(tb: TermBasis) -> float:
    raw = _raw_penalty(tb.spec, tb.constraints)
    return float(np.linalg.norm(tb.penalty) / np.linalg.norm(raw))


def load_model(path: str | Path) -> SeasonalModel:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    head = {r[0]: r[1:] for r in rows if r[0] in ("version", "target", "span", "trend", "gcv", "theta")}
    if int(head["version"][0]) != FORMAT_VERSION:
        raise ValueError(f"unsupported seasonal model version {head['version'][0]}")
    specs, lambdas, cons, scales = [], [], {}, {}
    for r in rows:
        if r[0] == "term":
            margins = []
            for text in r[5:]:
                cov, k, cyc = text.split(":")
                margins.append(Margin(cov, int(k), bool(int(cyc))))
            specs.append(SplineTermSpec(r[1], r[2], tuple(margins), int(r[3])))
            lambdas.append(float(r[4]))
        elif r[0] == "constraint":
            cons.setdefault(r[1], []).append(np.array([float(v) for v in r[2:]]))
        elif r[0] == "penalty_scale":
            scales[r[1]] = float(r[2])
    terms = []
    for s in specs:
        P = _raw_penalty(s, cons[s.name]) * scales[s.name]
        terms.append(TermBasis(s, cons[s.name], P))
    target = head["target"][0]
    return SeasonalModel(
        target, terms, lambdas, np.array([float(v) for v in head["theta"]]),
        float(head["trend"][0]), float(head["trend"][1]),
        dt.date.fromisoformat(head["span"][0]), dt.date.fromisoformat(head["span"][1]),
        float(head["gcv"][0]), floor_zero=(target == "res"))
