"""Box-constrained elastic net by cyclical coordinate descent.

The objective on standardized data is

    (1/2n) ||y - X b||^2 + lam * (alpha * ||b||_1 + (1 - alpha)/2 * ||b||^2)

subject to ``lower <= b <= upper``. Updates work on the Gram matrix
``G = X'X/n`` and ``c = X'y/n`` so one sweep costs O(p^2) regardless of n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import DegenerateResponse

ALPHA_FLOOR = 0.001


@dataclass(frozen=True)
class SolverConfig:
    alpha: float = 0.5
    grid_size: int = 100
    grid_ratio: float = 1e-4
    tol: float = 1e-7
    max_sweeps: int = 10000

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not 0.0 < self.grid_ratio < 1.0:
            raise ValueError(f"grid_ratio must lie in (0, 1), got {self.grid_ratio}")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.grid_size < 1 or self.max_sweeps < 1:
            raise ValueError("grid_size and max_sweeps must be positive")


def soft_threshold(z: float, t: float) -> float:
    """sign(z) * max(|z| - t, 0)."""
    if t < 0:
        raise ValueError("threshold must be non-negative")
    if abs(z) <= t:
        return 0.0
    return math.copysign(abs(z) - t, z)


@njit(cache=True, nogil=True)
def _sweep(G, c, lower, upper, l1, l2, beta, Gb, idx, m):
    max_delta = 0.0
    p = beta.shape[0]
    for q in range(m):
        j = idx[q]
        gjj = G[j, j]
        rho = c[j] - Gb[j] + gjj * beta[j]
        if rho > l1:
            b = (rho - l1) / (gjj + l2)
        elif rho < -l1:
            b = (rho + l1) / (gjj + l2)
        else:
            b = 0.0
        if b < lower[j]:
            b = lower[j]
        elif b > upper[j]:
            b = upper[j]
        delta = b - beta[j]
        if delta != 0.0:
            beta[j] = b
            for k in range(p):
                Gb[k] += G[k, j] * delta
            if abs(delta) > max_delta:
                max_delta = abs(delta)
    return max_delta


@njit(cache=True, nogil=True)
def _sweep_until_converged(G, c, lower, upper, lam, alpha, tol, max_sweeps, beta, Gb):
    # active-set cycling: full sweeps alternate with sweeps over the nonzero
    # coordinates until a full sweep changes nothing beyond tol
    p = beta.shape[0]
    l1 = lam * alpha
    l2 = lam * (1.0 - alpha)
    full = np.arange(p)
    active = np.empty(p, dtype=np.int64)
    sweeps = 0
    while sweeps < max_sweeps:
        sweeps += 1
        if _sweep(G, c, lower, upper, l1, l2, beta, Gb, full, p) < tol:
            return sweeps, True
        m = 0
        for j in range(p):
            if beta[j] != 0.0:
                active[m] = j
                m += 1
        while sweeps < max_sweeps:
            sweeps += 1
            if _sweep(G, c, lower, upper, l1, l2, beta, Gb, active, m) < tol:
                break
    return max_sweeps, False


@njit(cache=True, nogil=True)
def _cd_path(G, c, lower, upper, lambdas, alpha, tol, max_sweeps, beta0):
    p = G.shape[0]
    L = lambdas.shape[0]
    betas = np.zeros((L, p))
    sweeps = np.zeros(L, dtype=np.int64)
    converged = np.zeros(L, dtype=np.bool_)
    beta = beta0.copy()
    Gb = G @ beta
    for i in range(L):
        s, ok = _sweep_until_converged(G, c, lower, upper, lambdas[i], alpha, tol, max_sweeps, beta, Gb)
        betas[i, :] = beta
        sweeps[i] = s
        converged[i] = ok
    return betas, sweeps, converged


def _start(lower: np.ndarray, upper: np.ndarray, beta0=None) -> np.ndarray:
    b = np.zeros(len(lower)) if beta0 is None else np.array(beta0, dtype=float)
    return np.clip(b, lower, upper)


def fit_constrained(X: np.ndarray, y: np.ndarray, lower: np.ndarray, upper: np.ndarray,
                    lam: float, config: SolverConfig = SolverConfig(), beta0=None):
    """Minimize the box-constrained elastic-net objective at a single ``lam``.

    Returns ``(beta, converged)``. On non-convergence the last iterate is
    returned with ``converged=False``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    G = X.T @ X / n
    c = X.T @ y / n
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    betas, _, conv = _cd_path(G, c, lower, upper, np.array([float(lam)]), config.alpha,
                              config.tol, config.max_sweeps, _start(lower, upper, beta0))
    return betas[0], bool(conv[0])


def objective(X, y, beta, lam, alpha) -> float:
    n = X.shape[0]
    r = y - X @ beta
    return r @ r / (2 * n) + lam * (alpha * np.abs(beta).sum() + (1 - alpha) / 2 * beta @ beta)


def lambda_grid(X: np.ndarray, y: np.ndarray, config: SolverConfig = SolverConfig()) -> np.ndarray:
    """Descending log-spaced grid from the smallest all-zero penalty."""
    n = X.shape[0]
    alpha = max(config.alpha, ALPHA_FLOOR)
    if X.shape[1] == 0:
        return np.array([0.0])
    lam_max = float(np.max(np.abs(X.T @ y)) / (n * alpha))
    if not lam_max > 0.0:
        return np.array([0.0])
    if config.grid_size == 1:
        return np.array([lam_max])
    return lam_max * config.grid_ratio ** (np.arange(config.grid_size) / (config.grid_size - 1))


@dataclass(frozen=True)
class NormalizationStats:
    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: float
    y_std: float
    kept: np.ndarray  # bool mask over the original columns


def normalization_stats(X: np.ndarray, y: np.ndarray) -> NormalizationStats:
    # population (1/n) moments, so every standardized column has unit second moment
    x_mean = X.mean(axis=0)
    x_std = X.std(axis=0)
    kept = x_std > 1e-12 * np.maximum(1.0, np.abs(x_mean))
    return NormalizationStats(x_mean, x_std, float(y.mean()), float(y.std()), kept)


def bounds_to_standardized(lower, upper, stats: NormalizationStats):
    """Map physical bounds of the kept columns to the standardized scale."""
    if not stats.y_std > 0:
        raise DegenerateResponse("response has zero variance in the estimation window")
    scale = stats.x_std[stats.kept] / stats.y_std
    lower = np.asarray(lower, dtype=float)[stats.kept]
    upper = np.asarray(upper, dtype=float)[stats.kept]
    with np.errstate(invalid="ignore"):
        lo = np.where(np.isinf(lower), lower, lower * scale)
        up = np.where(np.isinf(upper), upper, upper * scale)
    return lo, up


def bic(rss: float, n: int, df: int) -> float:
    if rss <= 0.0:
        return -math.inf
    return n * math.log(rss / n) + df * math.log(n)


def bic_select(lambdas: np.ndarray, betas: np.ndarray, rss: np.ndarray, n: int):
    """Index of the BIC-minimizing path entry; ties go to the larger penalty.

    ``lambdas`` must be in descending order. df = nonzero slopes + intercept.
    Returns ``(index, bic_values, dfs)``.
    """
    dfs = (betas != 0.0).sum(axis=1) + 1
    values = np.array([bic(r, n, int(d)) for r, d in zip(rss, dfs)])
    best = 0
    for i in range(1, len(values)):
        if values[i] < values[best]:
            best = i
    return best, values, dfs


@dataclass
class FitResult:
    names: list[str]
    intercept: float
    coefficients: np.ndarray
    coefficients_scaled: np.ndarray
    lambda_selected: float
    lambdas: np.ndarray
    bic_path: np.ndarray
    residuals: np.ndarray
    df: int
    converged: bool = True
    dropped: list[str] = field(default_factory=list)
    stats: NormalizationStats | None = None

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.intercept + np.asarray(x, dtype=float) @ self.coefficients

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.coefficients))


def fit_elastic_net(X: np.ndarray, y: np.ndarray, names, lower=None, upper=None,
                    config: SolverConfig = SolverConfig()) -> FitResult:
    """Standardize, fit the lambda path with warm starts, pick by BIC, destandardize.

    ``lower``/``upper`` are physical-unit bounds per column (default unbounded).
    Zero-variance columns are dropped and reported with coefficient 0.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    names = list(names)
    lower = np.full(p, -np.inf) if lower is None else np.asarray(lower, dtype=float)
    upper = np.full(p, np.inf) if upper is None else np.asarray(upper, dtype=float)
    stats = normalization_stats(X, y)
    dropped = [nm for nm, k in zip(names, stats.kept) if not k]
    coef = np.zeros(p)
    coef_s = np.zeros(p)

    if not stats.y_std > 0 or not stats.kept.any():
        resid = y - stats.y_mean
        return FitResult(names, stats.y_mean, coef, coef_s, 0.0, np.array([0.0]),
                         np.array([bic(float(resid @ resid), n, 1)]), resid, 1, True, dropped, stats)

    kept = stats.kept
    Xs = (X[:, kept] - stats.x_mean[kept]) / stats.x_std[kept]
    ys = (y - stats.y_mean) / stats.y_std
    lo_s, up_s = bounds_to_standardized(lower, upper, stats)
    lambdas = lambda_grid(Xs, ys, config)
    G = Xs.T @ Xs / n
    c = Xs.T @ ys / n
    betas, _, conv = _cd_path(G, c, lo_s, up_s, lambdas, config.alpha, config.tol,
                              config.max_sweeps, _start(lo_s, up_s))
    resid_s = ys[:, None] - Xs @ betas.T
    rss = np.einsum("ij,ij->j", resid_s, resid_s)
    best, bic_values, dfs = bic_select(lambdas, betas, rss, n)

    beta_s = betas[best]
    coef_s[kept] = beta_s
    phys = beta_s * stats.y_std / stats.x_std[kept]
    coef[kept] = np.clip(phys, lower[kept], upper[kept])
    intercept = stats.y_mean - float(coef[kept] @ stats.x_mean[kept])
    residuals = y - intercept - X @ coef
    return FitResult(names, intercept, coef, coef_s, float(lambdas[best]), lambdas, bic_values,
                     residuals, int(dfs[best]), bool(conv[best]), dropped, stats)
