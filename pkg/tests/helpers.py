"""Independent reference implementations used as oracles.

Everything here is deliberately naive (double loops, explicit projection
matrices, lstsq refits) and shares no code with the package internals.
"""

from __future__ import annotations

import numpy as np


def ref_weighted_moments(x, y, w):
    """Brute-force O(n p^2) centered weighted moments with 1/n scaling."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    w = np.asarray(w, float)
    n, p = x.shape
    mu_y = sum(w[t] * y[t] for t in range(n)) / n
    mu_x = np.array([sum(w[t] * x[t, i] for t in range(n)) / n for i in range(p)])
    gram = np.zeros((p, p))
    cross = np.zeros(p)
    for i in range(p):
        for j in range(p):
            gram[i, j] = sum(
                w[t] * (x[t, i] - mu_x[i]) * (x[t, j] - mu_x[j]) for t in range(n)
            ) / n
        cross[i] = sum(w[t] * (x[t, i] - mu_x[i]) * (y[t] - mu_y) for t in range(n)) / n
    return mu_y, mu_x, gram, cross


def ref_wls(x, y, w, model):
    """Weighted least squares with intercept via sqrt-weight scaling and
    lstsq. Returns (alpha, beta)."""
    x = np.asarray(x, float)
    idx = list(model)
    design = np.column_stack([np.ones(len(y)), x[:, idx]])
    sw = np.sqrt(np.asarray(w, float))
    coef, *_ = np.linalg.lstsq(sw[:, None] * design, sw * np.asarray(y, float), rcond=None)
    return coef[0], coef[1:]


def ref_projection_sigma2(x, y, w, model):
    """Residual mean square through the explicit projection matrices: the
    weighted centering projector P_W and the model projector P(J)."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    w = np.asarray(w, float)
    n = len(y)
    sqrt_w = np.sqrt(w)
    p_w = np.outer(sqrt_w, sqrt_w) / n
    p_w_perp = np.eye(n) - p_w
    xj = x[:, list(model)]
    a = p_w_perp @ (sqrt_w[:, None] * xj)
    p_j = a @ np.linalg.solve(a.T @ a, a.T)
    m = np.eye(n) - p_w - p_j
    wy = sqrt_w * y
    return float(wy @ m @ wy) / n


def ref_oga(x, y, k):
    """Plain orthogonal greedy algorithm: unweighted centered correlation
    scan (normalized by column standard deviation, first-index ties), full
    lstsq refit per step. Returns (indices, alphas, betas, sigma2s)."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    n, p = x.shape
    xc = x - x.mean(axis=0)
    sd = np.sqrt((xc**2).mean(axis=0))
    selected: list[int] = []
    alphas, betas, sigma2s = [], [], []
    resid = y.copy()
    for _ in range(k):
        best_j, best_score = -1, -np.inf
        for j in range(p):
            if j in selected or sd[j] ** 2 <= 1e-12:
                continue
            score = abs(np.mean(xc[:, j] * resid)) / sd[j]
            if score > best_score:
                best_score, best_j = score, j
        if best_j < 0:
            break
        selected.append(best_j)
        design = np.column_stack([np.ones(n), x[:, selected]])
        coef, *_ = np.linalg.lstsq(design, y, rcond=None)
        fitted = design @ coef
        resid = y - fitted
        alphas.append(coef[0])
        betas.append(coef[1:].copy())
        sigma2s.append(float(np.mean(resid**2)))
    return selected, alphas, betas, sigma2s


def random_instance(seed, n, p, *, weighted=True, noise=0.5):
    """Seeded correlated design, response, and normalized positive weights."""
    rng = np.random.default_rng(seed)
    base = rng.standard_normal((n, p))
    mix = np.eye(p) + 0.4 * rng.standard_normal((p, p)) / np.sqrt(p)
    x = base @ mix
    beta = np.zeros(p)
    k = max(1, p // 3)
    beta[rng.choice(p, size=k, replace=False)] = rng.standard_normal(k)
    y = 0.3 + x @ beta + noise * rng.standard_normal(n)
    if weighted:
        raw = rng.gamma(2.0, 1.0, size=n) + 0.05
        w = raw / raw.mean()
    else:
        w = np.ones(n)
    return x, y, w


def ols_sandwich(design, y):
    """OLS coefficients with heteroskedasticity-robust standard errors."""
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    bread = np.linalg.inv(design.T @ design)
    meat = design.T @ (design * (resid**2)[:, None])
    cov = bread @ meat @ bread
    return coef, np.sqrt(np.diag(cov))
