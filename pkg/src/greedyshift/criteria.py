"""Information criteria evaluated along a greedy path.

The weighted criterion penalizes the weighted residual mean square by
(1 + s_a (#J + 1) d_n^2); the unweighted analogue uses c_n^2 and the plain
residual mean square. Selection is the first argmin over the path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .greedy_path import GreedyPath

__all__ = ["CriterionTrace", "hdiwic_value", "hdic_value", "select_k"]


@dataclass(frozen=True)
class CriterionTrace:
    """Criterion values along a path plus the selected iteration count.

    ``penalty_rate`` is the squared rate unit (d_n^2 or c_n^2) and
    ``selected_k`` is 1-based; ties go to the smallest k (parsimony).
    """

    values: np.ndarray
    penalty_rate: float
    s_a: float
    selected_k: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if not 1 <= self.selected_k <= values.shape[0]:
            raise ValueError(f"selected_k={self.selected_k} outside [1, {values.shape[0]}]")
        if self.values[self.selected_k - 1] != self.values.min():
            raise ValueError("selected_k does not attain the criterion minimum")


def _penalized(sigma2: float, model_size: int, rate: float, s_a: float) -> float:
    if sigma2 < 0:
        raise ValueError(f"sigma2 must be >= 0, got {sigma2}")
    if model_size < 1:
        raise ValueError(f"model_size must be >= 1, got {model_size}")
    return (1.0 + s_a * (model_size + 1) * rate**2) * sigma2


def hdiwic_value(sigma2: float, model_size: int, d_n: float, s_a: float) -> float:
    """(1 + s_a (#J + 1) d_n^2) times the weighted residual mean square."""
    return _penalized(sigma2, model_size, d_n, s_a)


def hdic_value(sigma2_tr: float, model_size: int, c_n: float, s_a: float) -> float:
    """(1 + s_a (#J + 1) c_n^2) times the unweighted residual mean square."""
    return _penalized(sigma2_tr, model_size, c_n, s_a)


def select_k(path: GreedyPath, rate: float, s_a: float) -> CriterionTrace:
    """Evaluate the criterion at every step of the path and pick the first
    argmin. ``rate`` is the unsquared rate unit (d_n for the weighted
    criterion, c_n for the unweighted one)."""
    sizes = np.arange(1, path.k + 1)
    values = (1.0 + s_a * (sizes + 1) * rate**2) * path.sigma2_trace
    selected = int(np.argmin(values)) + 1
    return CriterionTrace(values=values, penalty_rate=rate**2, s_a=s_a, selected_k=selected)
