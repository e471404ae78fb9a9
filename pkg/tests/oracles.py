"""Independent reference computations used only by the tests."""

import numpy as np


def prox_gradient_elastic_net(X, y, lower, upper, lam, alpha, max_iter=1_000_000, tol=1e-11):
    """Accelerated proximal-projected gradient (FISTA with adaptive restart) for
    the box-constrained elastic net. Shares no code with the coordinate-descent path.

    Stops when the gradient-mapping norm falls below ``tol`` or after ``max_iter``
    iterations.
    """
    n, p = X.shape
    G = X.T @ X / n
    c = X.T @ y / n
    L = np.linalg.eigvalsh(G).max() + 1e-12
    t = 1.0 / L
    shrink = t * lam * alpha
    ridge = 1.0 + t * lam * (1 - alpha)

    def step(v):
        w = v - t * (G @ v - c)
        z = np.sign(w) * np.maximum(np.abs(w) - shrink, 0.0) / ridge
        return np.clip(z, lower, upper)

    x = np.clip(np.zeros(p), lower, upper)
    yk = x.copy()
    mom = 1.0
    for _ in range(max_iter):
        x_new = step(yk)
        if np.dot(yk - x_new, x_new - x) > 0:  # adaptive restart
            mom = 1.0
            yk = x
            continue
        mom_new = (1 + np.sqrt(1 + 4 * mom * mom)) / 2
        yk = x_new + (mom - 1) / mom_new * (x_new - x)
        x, mom = x_new, mom_new
        if np.max(np.abs(x - step(x))) / t < tol:
            break
    return x


def elastic_net_objective(X, y, beta, lam, alpha):
    n = X.shape[0]
    r = y - X @ beta
    return r @ r / (2 * n) + lam * (alpha * np.abs(beta).sum() + (1 - alpha) / 2 * beta @ beta)


def brute_force_1d(x, y, lam, alpha, lo, hi, grid=200001):
    """Grid minimizer of the one-column objective on [lo, hi]."""
    n = len(y)
    bs = np.linspace(lo, hi, grid)
    r = y[None, :] - bs[:, None] * x[None, :]
    obj = (r * r).sum(axis=1) / (2 * n) + lam * (alpha * np.abs(bs) + (1 - alpha) / 2 * bs**2)
    return bs[np.argmin(obj)]


def kkt_residual(X, y, beta, lower, upper, lam, alpha):
    """Largest violation of the box-constrained elastic-net optimality conditions."""
    n = X.shape[0]
    g = -(X.T @ (y - X @ beta)) / n + lam * (1 - alpha) * beta
    l1 = lam * alpha
    worst = 0.0
    for j, b in enumerate(beta):
        at_lo = np.isfinite(lower[j]) and abs(b - lower[j]) <= 1e-12
        at_hi = np.isfinite(upper[j]) and abs(b - upper[j]) <= 1e-12
        if b > 0:
            right = left = g[j] + l1
        elif b < 0:
            right = left = g[j] - l1
        else:
            right, left = g[j] + l1, g[j] - l1
        # directional derivatives: increasing needs right >= 0, decreasing needs left <= 0
        viol = 0.0
        if not at_hi:
            viol = max(viol, -right)
        if not at_lo:
            viol = max(viol, left)
        worst = max(worst, viol)
    return worst


def random_instance(rng, n_max=200, p_max=20):
    n = int(rng.integers(20, n_max + 1))
    p = int(rng.integers(1, p_max + 1))
    X = rng.standard_normal((n, p))
    X = (X - X.mean(0)) / X.std(0)
    beta = rng.standard_normal(p) * (rng.random(p) < 0.6)
    y = X @ beta + rng.standard_normal(n) * 0.5
    y = (y - y.mean()) / y.std()
    lo = -rng.uniform(0, 2, p)
    hi = rng.uniform(0, 2, p)
    # some boxes exclude zero
    shift = rng.random(p) < 0.2
    lo[shift] += 0.5 * rng.random(shift.sum()) + abs(lo[shift])
    hi[shift] = lo[shift] + rng.uniform(0.1, 1.0, shift.sum())
    lam = float(np.max(np.abs(X.T @ y)) / n * 10 ** rng.uniform(-3, 0))
    alpha = float(rng.choice([0.5, 1.0, 0.2, 0.9]))
    return X, y, lo, hi, lam, alpha
