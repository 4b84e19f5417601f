"""Weighted empirical moments, centered weighted Gram systems, and weighted
least-squares fitting.

Everything here is a pure function of immutable inputs; values can be shared
freely across threads. Moments use 1/n normalization throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

__all__ = [
    "Dataset",
    "WeightVector",
    "WeightedMoments",
    "FitResult",
    "SingularModelError",
    "IncrementalCholesky",
    "weighted_moments",
    "wls_fit",
    "residual_sigma2",
    "predict",
]

# Relative pivot tolerance for declaring a Gram submatrix singular.
PIVOT_RTOL = 1e-10


class SingularModelError(ValueError):
    """Raised when the weighted Gram submatrix of a model is numerically
    singular (smallest Cholesky pivot below the relative tolerance)."""

    def __init__(self, model, message: str | None = None):
        self.model = tuple(int(j) for j in model)
        super().__init__(message or f"singular weighted Gram submatrix for model {self.model}")


def _as_float_array(a, name: str, ndim: int) -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class Dataset:
    """Training sample: covariate matrix (n rows, p columns) and response.

    The covariate matrix is kept column-major so greedy correlation scans
    stream one column at a time.
    """

    x: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self):
        x = _as_float_array(self.x, "x", 2)
        y = _as_float_array(self.y, "y", 1)
        n, p = x.shape
        if n < 2 or p < 1:
            raise ValueError(f"need n >= 2 and p >= 1, got n={n}, p={p}")
        if y.shape[0] != n:
            raise ValueError(f"x has {n} rows but y has length {y.shape[0]}")
        if self.feature_names is not None:
            names = tuple(self.feature_names)
            if len(names) != p:
                raise ValueError(f"{len(names)} feature names for p={p} columns")
            object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "x", np.asfortranarray(x))
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class WeightVector:
    """Per-observation trimmed, normalized importance weights.

    Invariant: entries are finite, non-negative, not all zero, and average
    exactly one (the normalization of the trimmed importance values).
    """

    w: np.ndarray

    def __post_init__(self):
        w = _as_float_array(self.w, "w", 1)
        if np.any(w < 0.0):
            raise ValueError("weights must be non-negative")
        if not np.any(w > 0.0):
            raise ValueError("weights are identically zero")
        mean = w.mean()
        if abs(mean - 1.0) > 1e-12:
            raise ValueError(f"weights must average 1 (got mean {mean!r}); normalize first")
        object.__setattr__(self, "w", w)

    @classmethod
    def unit(cls, n: int) -> "WeightVector":
        return cls(np.ones(n))

    @property
    def n(self) -> int:
        return self.w.shape[0]

    @property
    def is_unit(self) -> bool:
        return bool(np.all(self.w == 1.0))


@dataclass(frozen=True)
class WeightedMoments:
    """Weighted first and centered second moments of (x, y).

    ``gram`` is the centered weighted second-moment matrix of the covariates
    and ``cross`` the centered weighted cross-moment with the response; both
    equal the projection forms built from the weighted centering projector.
    """

    mu_y: float
    mu_x: np.ndarray
    gram: np.ndarray
    cross: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mu_x", np.asarray(self.mu_x, dtype=float))
        object.__setattr__(self, "gram", np.asarray(self.gram, dtype=float))
        object.__setattr__(self, "cross", np.asarray(self.cross, dtype=float))
        if not np.allclose(self.gram, self.gram.T, rtol=0.0, atol=1e-10):
            raise ValueError("gram matrix is not symmetric")

    @property
    def p(self) -> int:
        return self.mu_x.shape[0]


@dataclass(frozen=True)
class FitResult:
    """Weighted least-squares fit on an ordered index set.

    ``sigma2`` is the weighted residual mean square; it is left unset by
    :func:`wls_fit` and filled from :func:`residual_sigma2`.
    """

    model: tuple[int, ...]
    alpha: float
    beta: np.ndarray
    sigma2: float | None = None
    weighted: bool = True

    def __post_init__(self):
        model = tuple(int(j) for j in self.model)
        if len(set(model)) != len(model):
            raise ValueError(f"model has repeated indices: {model}")
        if any(j < 0 for j in model):
            raise ValueError(f"model has negative indices: {model}")
        beta = _as_float_array(self.beta, "beta", 1)
        if beta.shape[0] != len(model):
            raise ValueError(f"beta has length {beta.shape[0]} for model of size {len(model)}")
        if self.sigma2 is not None and self.sigma2 < 0.0:
            raise ValueError(f"sigma2 must be >= 0, got {self.sigma2}")
        object.__setattr__(self, "model", model)
        object.__setattr__(self, "beta", beta)

    def with_sigma2(self, sigma2: float) -> "FitResult":
        return replace(self, sigma2=float(sigma2))


def _check_lengths(data: Dataset, w: WeightVector) -> None:
    if w.n != data.n:
        raise ValueError(f"weight vector has length {w.n} for n={data.n} observations")


def weighted_moments(data: Dataset, w: WeightVector) -> WeightedMoments:
    """Weighted mean of y, weighted means of the covariates, and the centered
    weighted second-moment matrix/cross-moment vector, all with 1/n scaling.

    Computed as U'U/n and U'v/n with U the row-wise sqrt(w)-scaled centered
    covariates, which coincides with both the direct centered sum and the
    centering-projector form because the weights average one.
    """
    _check_lengths(data, w)
    n = data.n
    mu_y = float(w.w @ data.y) / n
    mu_x = (w.w @ data.x) / n
    sqw = np.sqrt(w.w)
    u = sqw[:, None] * (data.x - mu_x)
    ytil = sqw * (data.y - mu_y)
    gram = (u.T @ u) / n
    gram = 0.5 * (gram + gram.T)
    cross = (u.T @ ytil) / n
    return WeightedMoments(mu_y=mu_y, mu_x=mu_x, gram=gram, cross=cross)


def _cholesky_spd(a: np.ndarray, model, rel_tol: float = PIVOT_RTOL) -> np.ndarray:
    """Lower Cholesky factor of a symmetric matrix, failing loudly when any
    pivot falls below ``rel_tol`` times the corresponding diagonal entry."""
    try:
        lower = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as err:
        raise SingularModelError(model) from err
    pivots = np.diag(lower) ** 2
    if np.any(pivots <= rel_tol * np.diag(a)):
        raise SingularModelError(model)
    return lower


class IncrementalCholesky:
    """Cholesky factor of a growing SPD matrix, extended one index at a time.

    Adding an index costs O(k^2); a full refactorization every
    ``refresh_every`` additions guards against drift on long greedy paths.
    """

    def __init__(self, capacity: int, rel_tol: float = PIVOT_RTOL, refresh_every: int = 25):
        self.rel_tol = rel_tol
        self.refresh_every = refresh_every
        self.k = 0
        self._since_refresh = 0
        self._lower = np.zeros((capacity, capacity))
        self._gram = np.zeros((capacity, capacity))

    def extend(self, model, col: np.ndarray, diag: float) -> None:
        """Add one index whose Gram column against the current set is ``col``
        and whose own Gram diagonal is ``diag``. Raises SingularModelError
        when the new pivot is below tolerance."""
        k = self.k
        self._gram[k, :k] = col
        self._gram[:k, k] = col
        self._gram[k, k] = diag
        self._since_refresh += 1
        if self._since_refresh >= self.refresh_every:
            sub = self._gram[: k + 1, : k + 1]
            self._lower[: k + 1, : k + 1] = _cholesky_spd(sub, model, self.rel_tol)
            self._since_refresh = 0
        else:
            if k > 0:
                row = scipy.linalg.solve_triangular(
                    self._lower[:k, :k], col, lower=True, check_finite=False
                )
            else:
                row = np.empty(0)
            pivot = diag - row @ row
            if pivot <= self.rel_tol * diag or diag <= 0.0:
                raise SingularModelError(model)
            self._lower[k, :k] = row
            self._lower[k, k] = np.sqrt(pivot)
        self.k = k + 1

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        k = self.k
        lower = self._lower[:k, :k]
        half = scipy.linalg.solve_triangular(lower, rhs, lower=True, check_finite=False)
        return scipy.linalg.solve_triangular(lower.T, half, lower=False, check_finite=False)


def wls_fit(
    moments: WeightedMoments,
    model,
    *,
    weighted: bool = True,
    rel_tol: float = PIVOT_RTOL,
) -> FitResult:
    """Weighted least-squares coefficients for the given index set.

    Solves gram[J,J] beta = cross[J] by SPD Cholesky and recovers the
    intercept from the weighted means. ``sigma2`` is left unset.
    """
    model = tuple(int(j) for j in model)
    p = moments.p
    if not 1 <= len(model) <= p:
        raise ValueError(f"model size must be in [1, {p}], got {len(model)}")
    if any(not 0 <= j < p for j in model):
        raise ValueError(f"model indices out of range [0, {p}): {model}")
    idx = np.asarray(model)
    sub = moments.gram[np.ix_(idx, idx)]
    lower = _cholesky_spd(sub, model, rel_tol)
    half = scipy.linalg.solve_triangular(lower, moments.cross[idx], lower=True, check_finite=False)
    beta = scipy.linalg.solve_triangular(lower.T, half, lower=False, check_finite=False)
    alpha = moments.mu_y - beta @ moments.mu_x[idx]
    return FitResult(model=model, alpha=float(alpha), beta=beta, sigma2=None, weighted=weighted)


def residual_sigma2(data: Dataset, w: WeightVector, fit: FitResult) -> float:
    """Weighted residual mean square (1/n) sum_t w_t (y_t - yhat_t)^2.

    Equals the projection form built from the weighted centering projector
    and the model's weighted projection matrix.
    """
    _check_lengths(data, w)
    idx = np.asarray(fit.model)
    resid = data.y - fit.alpha - data.x[:, idx] @ fit.beta
    return float(w.w @ (resid * resid)) / data.n


def predict(fit: FitResult, x_new: np.ndarray) -> float | np.ndarray:
    """Fitted value alpha + beta' x[J] for one covariate vector (1-D input)
    or one value per row (2-D input)."""
    x_new = np.asarray(x_new, dtype=float)
    if not np.all(np.isfinite(x_new)):
        raise ValueError("x_new contains non-finite entries")
    idx = np.asarray(fit.model)
    if x_new.ndim == 1:
        return float(fit.alpha + fit.beta @ x_new[idx])
    if x_new.ndim == 2:
        return fit.alpha + x_new[:, idx] @ fit.beta
    raise ValueError(f"x_new must be 1- or 2-dimensional, got shape {x_new.shape}")
