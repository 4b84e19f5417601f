"""Population-level prediction error of a fitted model under the test-input
law: exact quadratic forms for correctly specified populations and a chunked,
seeded Monte Carlo estimator that also covers misspecified ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model_core import FitResult, SingularModelError

__all__ = [
    "Misspec",
    "Population",
    "regression_function",
    "population_projection",
    "population_residual_variance",
    "mcpe_analytic",
    "cpe_analytic",
    "mcpe_monte_carlo",
]


@dataclass(frozen=True)
class Misspec:
    """Nonlinear component a*g(x_1) added to the regression function.

    kind "quadratic" uses g(t) = t^2, kind "sine" uses g(t) = sin(t).
    """

    kind: str
    amplitude: float

    def __post_init__(self):
        if self.kind not in ("quadratic", "sine"):
            raise ValueError(f"misspec kind must be 'quadratic' or 'sine', got {self.kind!r}")

    def g(self, first_coord: np.ndarray) -> np.ndarray:
        if self.kind == "quadratic":
            return first_coord**2
        return np.sin(first_coord)


@dataclass
class Population:
    """True data-generating law: linear coefficients, Gaussian input moments
    for both domains, noise level, and an optional misspecification term.

    ``cov_te_min_eig`` records a declared lower bound on the smallest test
    covariance eigenvalue; ``c_diff`` (when given) asserts the moderate-shift
    bound on the first- and second-moment differences between domains.
    """

    alpha: float
    beta: np.ndarray
    mu_tr: np.ndarray
    mu_te: np.ndarray
    cov_tr: np.ndarray
    cov_te: np.ndarray
    noise_sd: float
    misspec: Misspec | None = None
    c_diff: float | None = None
    cov_te_min_eig: float | None = None
    chol_tr: np.ndarray = field(init=False, repr=False)
    chol_te: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float)
        self.mu_tr = np.asarray(self.mu_tr, dtype=float)
        self.mu_te = np.asarray(self.mu_te, dtype=float)
        self.cov_tr = np.asarray(self.cov_tr, dtype=float)
        self.cov_te = np.asarray(self.cov_te, dtype=float)
        p = self.beta.shape[0]
        for name in ("mu_tr", "mu_te"):
            if getattr(self, name).shape != (p,):
                raise ValueError(f"{name} must have length p={p}")
        for name in ("cov_tr", "cov_te"):
            if getattr(self, name).shape != (p, p):
                raise ValueError(f"{name} must be {p}x{p}")
        if not np.all(np.isfinite(self.beta)):
            raise ValueError("beta contains non-finite entries")
        if self.noise_sd <= 0:
            raise ValueError(f"noise_sd must be > 0, got {self.noise_sd}")
        try:
            self.chol_tr = np.linalg.cholesky(self.cov_tr)
            self.chol_te = np.linalg.cholesky(self.cov_te)
        except np.linalg.LinAlgError as err:
            raise ValueError("population covariance is not positive definite") from err
        if self.c_diff is not None:
            mean_gap = float(np.linalg.norm(self.mu_te - self.mu_tr))
            spec_gap = float(np.abs(np.linalg.eigvalsh(self.cov_te - self.cov_tr)).max())
            if mean_gap > self.c_diff or spec_gap > self.c_diff:
                raise ValueError(
                    f"moderate-shift bound violated: mean gap {mean_gap:.3g}, "
                    f"covariance gap {spec_gap:.3g} vs declared {self.c_diff:.3g}"
                )

    @property
    def p(self) -> int:
        return self.beta.shape[0]


def regression_function(pop: Population, x: np.ndarray) -> np.ndarray:
    """E[y | x]: the linear part plus the misspecification term when present.
    Shared by both domains (covariate shift leaves it unchanged)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    out = pop.alpha + x @ pop.beta
    if pop.misspec is not None:
        out = out + pop.misspec.amplitude * pop.misspec.g(x[:, 0])
    return out


def _check_model(pop: Population, model) -> np.ndarray:
    idx = np.asarray([int(j) for j in model])
    if idx.size == 0:
        raise ValueError("model must be non-empty")
    if np.any(idx < 0) or np.any(idx >= pop.p):
        raise ValueError(f"model indices outside [0, {pop.p}): {tuple(idx)}")
    return idx


def population_projection(pop: Population, model) -> tuple[float, np.ndarray]:
    """Coefficients (alpha(J), beta(J)) of the best linear predictor of the
    response restricted to model J under the test-input law, assuming the
    full linear model is correct."""
    if pop.misspec is not None:
        raise ValueError("population projection requires a correctly specified population")
    idx = _check_model(pop, model)
    sub = pop.cov_te[np.ix_(idx, idx)]
    target = (pop.cov_te @ pop.beta)[idx]
    try:
        lower = np.linalg.cholesky(sub)
    except np.linalg.LinAlgError as err:
        raise SingularModelError(tuple(idx)) from err
    if np.any(np.diag(lower) ** 2 <= 1e-10 * np.diag(sub)):
        raise SingularModelError(tuple(idx))
    beta_j = np.linalg.solve(sub, target)
    alpha_j = pop.alpha + pop.beta @ pop.mu_te - beta_j @ pop.mu_te[idx]
    return float(alpha_j), beta_j


def population_residual_variance(pop: Population, model) -> float:
    """E[(y^te(x) - y^te(x|J))^2]: the test-law variance left after the best
    linear predictor restricted to J. Non-increasing under set inclusion."""
    idx = _check_model(pop, model)
    _, beta_j = population_projection(pop, model)
    total = pop.beta @ (pop.cov_te @ pop.beta)
    explained = beta_j @ (pop.cov_te[np.ix_(idx, idx)] @ beta_j)
    return max(float(total - explained), 0.0)


def _quadratic_gap(pop: Population, fit: FitResult) -> float:
    idx = _check_model(pop, fit.model)
    dbeta = pop.beta.copy()
    dbeta[idx] -= fit.beta
    quad = float(dbeta @ (pop.cov_te @ dbeta))
    mean_gap = float((pop.alpha - fit.alpha) + dbeta @ pop.mu_te)
    return quad + mean_gap**2


def mcpe_analytic(pop: Population, fit: FitResult) -> float:
    """Exact conditional expectation of the squared gap between the
    population linear predictor and the fitted predictor over test inputs:
    (beta - beta*)' Sigma_te (beta - beta*) plus the squared mean gap."""
    if pop.misspec is not None:
        raise ValueError("analytic prediction error requires a correctly specified "
                         "population; use mcpe_monte_carlo")
    return _quadratic_gap(pop, fit)


def cpe_analytic(pop: Population, fit: FitResult) -> float:
    """Conditional prediction error against the true regression function.
    Coincides with :func:`mcpe_analytic` under correct specification; kept
    as a separate name so reports label unweighted-pipeline results
    correctly."""
    if pop.misspec is not None:
        raise ValueError("analytic prediction error requires a correctly specified "
                         "population; use mcpe_monte_carlo")
    return _quadratic_gap(pop, fit)


def mcpe_monte_carlo(
    pop: Population,
    fit: FitResult,
    n_draws: int,
    seed: int,
    *,
    chunk_size: int = 262_144,
) -> tuple[float, float]:
    """Monte Carlo estimate (with standard error) of the mean squared gap
    between the population regression target and the fitted predictor over
    fresh test-input draws.

    Draws are partitioned into chunks with seeds derived in a fixed order,
    and chunk sums are combined in that order, so the estimate is a pure
    function of (n_draws, seed, chunk_size).
    """
    if n_draws < 100:
        raise ValueError(f"n_draws must be >= 100, got {n_draws}")
    idx = _check_model(pop, fit.model)
    n_chunks = math.ceil(n_draws / chunk_size)
    seeds = np.random.SeedSequence(seed).spawn(n_chunks)
    s1 = 0.0
    s2 = 0.0
    left = n_draws
    for child in seeds:
        m = min(chunk_size, left)
        left -= m
        rng = np.random.default_rng(child)
        x = pop.mu_te + rng.standard_normal((m, pop.p)) @ pop.chol_te.T
        target = pop.alpha + x @ pop.beta
        if pop.misspec is not None:
            target = target + pop.misspec.amplitude * pop.misspec.g(x[:, 0])
        dev = target - (fit.alpha + x[:, idx] @ fit.beta)
        sq = dev * dev
        s1 += float(sq.sum())
        s2 += float((sq * sq).sum())
    mean = s1 / n_draws
    var = max(s2 / n_draws - mean**2, 0.0) * n_draws / (n_draws - 1)
    return mean, math.sqrt(var / n_draws)
