"""Dickey-Fuller t-statistic distribution, constant-only case, by simulation."""

from __future__ import annotations

import numpy as np

PROBS = np.array([0.001, 0.005, 0.01, 0.025, 0.05, 0.075, 0.1, 0.15, 0.2, 0.3, 0.4, 0.5,
                  0.6, 0.7, 0.8, 0.85, 0.9, 0.925, 0.95, 0.975, 0.99, 0.995, 0.999])


def df_statistics(n: int, reps: int, seed: int = 0, chunk: int = 2000) -> np.ndarray:
    """t-statistics on gamma in dy_t = c + gamma * y_{t-1} + e_t for ``reps`` random walks.

    ``n`` is the number of regression observations (series length n + 1).
    """
    rng = np.random.default_rng(seed)
    out = np.empty(reps)
    done = 0
    while done < reps:
        k = min(chunk, reps - done)
        e = rng.standard_normal((k, n))
        y = np.cumsum(e, axis=1)  # y_1..y_n with y_0 = 0
        x = np.concatenate([np.zeros((k, 1)), y[:, :-1]], axis=1)  # y_{t-1}
        xc = x - x.mean(axis=1, keepdims=True)
        zc = e - e.mean(axis=1, keepdims=True)
        sxx = np.einsum("ij,ij->i", xc, xc)
        sxz = np.einsum("ij,ij->i", xc, zc)
        szz = np.einsum("ij,ij->i", zc, zc)
        g = sxz / sxx
        s2 = (szz - g * sxz) / (n - 2)
        out[done:done + k] = g / np.sqrt(s2 / sxx)
        done += k
    return out


def df_quantiles(n: int, reps: int, seed: int = 0, probs: np.ndarray = PROBS) -> np.ndarray:
    return np.quantile(df_statistics(n, reps, seed), probs)
