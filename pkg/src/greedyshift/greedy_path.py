"""Greedy construction of the nested model sequence J_1 ⊂ J_2 ⊂ ... by
weighted correlation with the current residual.

With unit weights this is exactly the orthogonal greedy algorithm (forward
selection with full least-squares refits); general weights tilt every inner
product toward the test-input distribution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model_core import (
    Dataset,
    FitResult,
    IncrementalCholesky,
    SingularModelError,
    WeightVector,
)

__all__ = ["GreedyPath", "PathExhaustedError", "greedy_step", "build_path"]

# Columns whose weighted variance falls below this are never candidates.
VARIANCE_TOL = 1e-12


class PathExhaustedError(RuntimeError):
    """No admissible candidate column remains (all selected or degenerate)."""


@dataclass
class GreedyPath:
    """Nested greedy fits: the k-th entry has cardinality k + 1 and extends
    the previous one by a single index. ``stop_reason`` records clamping or
    early truncation (singularity, exhaustion); None means the requested
    number of steps completed."""

    fits: list[FitResult]
    sigma2_trace: np.ndarray
    weighted: bool
    stop_reason: str | None = None

    def __post_init__(self):
        self.sigma2_trace = np.asarray(self.sigma2_trace, dtype=float)
        if len(self.fits) != self.sigma2_trace.shape[0]:
            raise ValueError("one sigma2 per fit required")
        if not self.fits:
            raise ValueError("empty greedy path")
        prev: tuple[int, ...] = ()
        for k, fit in enumerate(self.fits):
            if len(fit.model) != k + 1 or fit.model[:k] != prev:
                raise ValueError(f"path models are not nested prefixes at step {k + 1}")
            prev = fit.model
        atol = 1e-10 * max(1.0, float(self.sigma2_trace[0]))
        if np.any(np.diff(self.sigma2_trace) > atol):
            raise ValueError("sigma2 trace increases along the path")

    @property
    def k(self) -> int:
        return len(self.fits)

    @property
    def models(self) -> list[tuple[int, ...]]:
        return [fit.model for fit in self.fits]


def greedy_step(data: Dataset, w: WeightVector, current, residual: np.ndarray) -> int:
    """Index maximizing the absolute weighted correlation between a centered
    candidate column and the current fit residual, normalized by the column's
    weighted standard deviation. Ties break to the smallest index.
    """
    current = set(int(j) for j in current)
    n, p = data.n, data.p
    if len(current) >= p:
        raise ValueError("no candidate columns left outside the current model")
    residual = np.asarray(residual, dtype=float)
    if residual.shape != (n,):
        raise ValueError(f"residual must have shape ({n},), got {residual.shape}")
    mu_x = (w.w @ data.x) / n
    centered_sq = (w.w @ (data.x * data.x)) / n - mu_x**2
    wr = w.w * residual
    numer = (wr @ data.x) / n - mu_x * (wr.sum() / n)
    scores = np.full(p, -np.inf)
    ok = centered_sq > VARIANCE_TOL
    with np.errstate(invalid="ignore"):
        scores[ok] = np.abs(numer[ok]) / np.sqrt(centered_sq[ok])
    scores[list(current)] = -np.inf
    if not np.any(np.isfinite(scores)):
        raise PathExhaustedError("all remaining columns have zero weighted variance")
    return int(np.argmax(scores))


def build_path(
    data: Dataset,
    w: WeightVector,
    k_max: int,
    *,
    rel_tol: float = 1e-10,
    refresh_every: int = 25,
) -> GreedyPath:
    """Iterate greedy selection and weighted least-squares refits for up to
    ``k_max`` steps.

    k_max is clamped to min(p, n - 2); clamping, a singular step, or
    candidate exhaustion truncate the path with the reason recorded rather
    than raising. The Gram factorization is extended incrementally while
    residuals come from the full refit at every step.
    """
    if k_max < 1:
        raise ValueError(f"k_max must be >= 1, got {k_max}")
    n, p = data.n, data.p
    cap = min(p, n - 2)
    steps = min(k_max, cap)
    stop_reason = None if steps == k_max else f"k_max clamped from {k_max} to {steps}"

    weighted = not w.is_unit
    sqw = np.sqrt(w.w)
    mu_y = float(w.w @ data.y) / n
    mu_x = (w.w @ data.x) / n
    u = np.asfortranarray(sqw[:, None] * (data.x - mu_x))
    ytil = sqw * (data.y - mu_y)
    diag_gram = np.einsum("ij,ij->j", u, u) / n
    active = diag_gram > VARIANCE_TOL
    sd = np.sqrt(np.where(active, diag_gram, 1.0))

    chol = IncrementalCholesky(steps, rel_tol=rel_tol, refresh_every=refresh_every)
    selected: list[int] = []
    cross: list[float] = []
    fits: list[FitResult] = []
    sigma2s: list[float] = []
    resid = ytil

    for step in range(steps):
        scores = np.abs(u.T @ resid) / (n * sd)
        scores[~active] = -np.inf
        if selected:
            scores[selected] = -np.inf
        if not np.any(np.isfinite(scores)):
            stop_reason = f"exhausted: no admissible candidate at step {step + 1}"
            break
        j = int(np.argmax(scores))
        candidate_model = tuple(selected) + (j,)
        gram_col = (u[:, selected].T @ u[:, j]) / n if selected else np.empty(0)
        try:
            chol.extend(candidate_model, gram_col, float(diag_gram[j]))
        except SingularModelError:
            stop_reason = f"singular Gram submatrix at step {step + 1} (column {j})"
            break
        selected.append(j)
        cross.append(float(u[:, j] @ ytil) / n)
        beta = chol.solve(np.asarray(cross))
        resid = ytil - u[:, selected] @ beta
        sigma2 = float(resid @ resid) / n
        alpha = mu_y - beta @ mu_x[selected]
        fits.append(
            FitResult(
                model=tuple(selected),
                alpha=float(alpha),
                beta=beta.copy(),
                sigma2=sigma2,
                weighted=weighted,
            )
        )
        sigma2s.append(sigma2)

    if not fits:
        raise SingularModelError((), "greedy path could not take a single step")
    return GreedyPath(
        fits=fits,
        sigma2_trace=np.asarray(sigma2s),
        weighted=weighted,
        stop_reason=stop_reason,
    )
