"""Importance weights (trimmed density ratios) and the tuning schedules
c_n, d_n, b_n, K_n that drive the weighted greedy pipeline.

All importance evaluation happens in log space so that extreme density
ratios neither overflow nor collapse before trimming and normalization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg
from scipy.special import logsumexp

from .model_core import WeightVector

__all__ = [
    "ScheduleConfig",
    "ImportanceModel",
    "compute_cn",
    "compute_dn",
    "compute_bn",
    "compute_kn",
    "raw_importance",
    "log_importance",
    "fit_gaussian_importance",
    "build_weights",
]


@dataclass(frozen=True)
class ScheduleConfig:
    """Constants behind the tuning schedules.

    q is the declared moment exponent of the importance, eta the noise tail
    exponent in (0, 2]; m_eta defaults to its lower bound 1/eta + 1/2.
    The remaining constants scale the trimming level (m_w), the iteration
    cap (m_k), and the criterion penalty (s_a).
    """

    q: float = 2.0
    eta: float = 2.0
    m_w: float = 1.0
    m_eta: float | None = None
    m_k: float = 5.0
    s_a: float = 2.0

    def __post_init__(self):
        if self.q <= 0:
            raise ValueError(f"q must be > 0, got {self.q}")
        if not 0 < self.eta <= 2:
            raise ValueError(f"eta must be in (0, 2], got {self.eta}")
        if self.m_eta is None:
            object.__setattr__(self, "m_eta", 1.0 / self.eta + 0.5)
        elif self.m_eta < 1.0 / self.eta + 0.5 - 1e-12:
            raise ValueError(f"m_eta must be >= 1/eta + 1/2 = {1.0 / self.eta + 0.5}")
        for name in ("m_w", "m_k", "s_a"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")


def _check_np(n: int, p: int) -> None:
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    if p < 2:
        raise ValueError(f"need p >= 2 (log p must be positive), got {p}")


def compute_cn(n: int, p: int) -> float:
    """Base rate unit sqrt(log p / n)."""
    _check_np(n, p)
    return math.sqrt(math.log(p) / n)


def compute_dn(n: int, p: int, cfg: ScheduleConfig) -> float:
    """Effective rate unit: c_n when q > 1, otherwise
    c_n^{2q/(1+q)} (log n)^{1/eta + 1/2}."""
    cn = compute_cn(n, p)
    if cfg.q > 1.0:
        return cn
    return cn ** (2.0 * cfg.q / (1.0 + cfg.q)) * math.log(n) ** (1.0 / cfg.eta + 0.5)


def compute_bn(n: int, p: int, cfg: ScheduleConfig) -> float:
    """Trimming level: m_w c_n^{-2/(1+q)} when q <= 1, otherwise
    m_w c_n^{-1} (log n)^{-m_eta}."""
    cn = compute_cn(n, p)
    if cfg.q > 1.0:
        return cfg.m_w / cn * math.log(n) ** (-cfg.m_eta)
    return cfg.m_w * cn ** (-2.0 / (1.0 + cfg.q))


def compute_kn(n: int, p: int, cfg: ScheduleConfig, mode: str = "iwoga") -> int:
    """Iteration cap floor(m_k / d_n) ("iwoga") or floor(m_k / c_n) ("oga"),
    clamped to [1, min(p, n - 2)] so the Gram submatrix can stay invertible."""
    if mode == "iwoga":
        rate = compute_dn(n, p, cfg)
    elif mode == "oga":
        rate = compute_cn(n, p)
    else:
        raise ValueError(f"mode must be 'iwoga' or 'oga', got {mode!r}")
    k = math.floor(cfg.m_k / rate)
    return int(min(max(k, 1), min(p, n - 2)))


# ---------------------------------------------------------------------------
# Importance models
# ---------------------------------------------------------------------------


def _spd_factor(cov: np.ndarray, name: str) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor and log-determinant, with the SPD sanity check
    (smallest pivot above 1e-10 of the matching diagonal entry)."""
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ValueError(f"{name} must be square, got shape {cov.shape}")
    if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-8 * max(1.0, abs(cov).max())):
        raise ValueError(f"{name} is not symmetric")
    try:
        lower = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as err:
        raise ValueError(f"{name} is not positive definite") from err
    if np.any(np.diag(lower) ** 2 <= 1e-10 * np.diag(cov)):
        raise ValueError(f"{name} is numerically singular")
    logdet = 2.0 * float(np.sum(np.log(np.diag(lower))))
    return lower, logdet


@dataclass
class ImportanceModel:
    """Density ratio between test and training input laws.

    kind "gaussian": ratio of two multivariate normal densities given by
    (mean_tr, cov_tr, mean_te, cov_te), evaluated in log space.
    kind "function": a user-supplied vectorized map from covariate rows to
    strictly positive raw importances.
    kind "precomputed": fixed non-negative raw values aligned with the
    training rows they will reweight.
    """

    kind: str
    mean_tr: np.ndarray | None = None
    cov_tr: np.ndarray | None = None
    mean_te: np.ndarray | None = None
    cov_te: np.ndarray | None = None
    ratio_fn: Callable[[np.ndarray], np.ndarray] | None = None
    values: np.ndarray | None = None
    _chol_tr: np.ndarray = field(init=False, repr=False, default=None)
    _chol_te: np.ndarray = field(init=False, repr=False, default=None)
    _logdet_tr: float = field(init=False, repr=False, default=0.0)
    _logdet_te: float = field(init=False, repr=False, default=0.0)

    def __post_init__(self):
        if self.kind == "gaussian":
            if any(v is None for v in (self.mean_tr, self.cov_tr, self.mean_te, self.cov_te)):
                raise ValueError("gaussian importance model needs means and covariances")
            self.mean_tr = np.asarray(self.mean_tr, dtype=float)
            self.mean_te = np.asarray(self.mean_te, dtype=float)
            self.cov_tr = np.asarray(self.cov_tr, dtype=float)
            self.cov_te = np.asarray(self.cov_te, dtype=float)
            self._chol_tr, self._logdet_tr = _spd_factor(self.cov_tr, "training covariance")
            self._chol_te, self._logdet_te = _spd_factor(self.cov_te, "test covariance")
        elif self.kind == "function":
            if self.ratio_fn is None:
                raise ValueError("function importance model needs ratio_fn")
        elif self.kind == "precomputed":
            if self.values is None:
                raise ValueError("precomputed importance model needs values")
            vals = np.asarray(self.values, dtype=float)
            if not np.all(np.isfinite(vals)) or np.any(vals < 0):
                raise ValueError("precomputed importances must be finite and non-negative")
            self.values = vals
        else:
            raise ValueError(f"unknown importance kind {self.kind!r}")

    @classmethod
    def gaussian(cls, mean_tr, cov_tr, mean_te, cov_te) -> "ImportanceModel":
        return cls(kind="gaussian", mean_tr=mean_tr, cov_tr=cov_tr,
                   mean_te=mean_te, cov_te=cov_te)

    @classmethod
    def from_function(cls, ratio_fn) -> "ImportanceModel":
        return cls(kind="function", ratio_fn=ratio_fn)

    @classmethod
    def precomputed(cls, values) -> "ImportanceModel":
        return cls(kind="precomputed", values=values)


def _gaussian_logpdf(x: np.ndarray, mean: np.ndarray, chol: np.ndarray, logdet: float) -> np.ndarray:
    dev = x - mean
    half = scipy.linalg.solve_triangular(chol, dev.T, lower=True, check_finite=False)
    quad = np.einsum("ij,ij->j", half, half)
    p = mean.shape[0]
    return -0.5 * (p * math.log(2.0 * math.pi) + logdet + quad)


def log_importance(model: ImportanceModel, x: np.ndarray) -> np.ndarray:
    """Log density ratio per covariate row; -inf marks a zero raw value
    (only possible for precomputed models)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if model.kind == "gaussian":
        if not np.all(np.isfinite(x)):
            raise ValueError("covariates contain non-finite entries")
        lr = (_gaussian_logpdf(x, model.mean_te, model._chol_te, model._logdet_te)
              - _gaussian_logpdf(x, model.mean_tr, model._chol_tr, model._logdet_tr))
        if not np.all(np.isfinite(lr)):
            raise ValueError("non-finite log density ratio (support violation)")
        return lr
    if model.kind == "function":
        vals = np.asarray(model.ratio_fn(x), dtype=float)
        if vals.shape != (x.shape[0],):
            raise ValueError(f"ratio_fn returned shape {vals.shape} for {x.shape[0]} rows")
        if not np.all(np.isfinite(vals)) or np.any(vals <= 0.0):
            raise ValueError("importance function must return finite positive values "
                             "(support violation)")
        return np.log(vals)
    if model.kind == "precomputed":
        if model.values.shape[0] != x.shape[0]:
            raise ValueError(f"{model.values.shape[0]} precomputed values for "
                             f"{x.shape[0]} rows")
        with np.errstate(divide="ignore"):
            return np.log(model.values)
    raise ValueError(f"unknown importance kind {model.kind!r}")


def raw_importance(model: ImportanceModel, x: np.ndarray) -> float | np.ndarray:
    """Raw importance w(x) >= 0 for one covariate vector (1-D input) or one
    value per row (2-D input)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if model.kind == "precomputed":
        if single:
            raise ValueError("precomputed importances are per-row; pass the full matrix")
        if model.values.shape[0] != x.shape[0]:
            raise ValueError(f"{model.values.shape[0]} precomputed values for "
                             f"{x.shape[0]} rows")
        return model.values.copy()
    out = np.exp(log_importance(model, x))
    return float(out[0]) if single else out


def _oas_intensity(sample_cov: np.ndarray, n: int) -> float:
    """Oracle-approximating shrinkage intensity toward (tr S / p) I."""
    p = sample_cov.shape[0]
    tr_s = float(np.trace(sample_cov))
    tr_s2 = float(np.sum(sample_cov * sample_cov))
    denom = (n + 1.0 - 2.0 / p) * (tr_s2 - tr_s**2 / p)
    if denom <= 0.0:
        return 1.0
    num = (1.0 - 2.0 / p) * tr_s2 + tr_s**2
    return min(1.0, num / denom)


def _regularize_covariance(cov: np.ndarray, n: int, shrinkage, name: str) -> np.ndarray:
    p = cov.shape[0]
    if shrinkage == "oas":
        rho = _oas_intensity(cov, n)
    elif shrinkage is None:
        rho = 0.0
    else:
        rho = float(shrinkage)
        if not 0.0 <= rho <= 1.0:
            raise ValueError(f"shrinkage must be in [0, 1], got {rho}")
    if rho > 0.0:
        mu = np.trace(cov) / p
        cov = (1.0 - rho) * cov
        cov[np.diag_indices_from(cov)] += rho * mu
    try:
        _spd_factor(cov, name)
    except ValueError:
        # ridge floor for positive-definiteness
        cov = cov.copy()
        cov[np.diag_indices_from(cov)] += 1e-8 * np.trace(cov) / p
        try:
            _spd_factor(cov, name)
        except ValueError as err:
            raise ValueError(f"degenerate {name} after regularization") from err
    return cov


def _fit_gaussian_domain(x: np.ndarray, shrinkage, name: str) -> tuple[np.ndarray, np.ndarray]:
    mean = x.mean(axis=0)
    dev = x - mean
    cov = (dev.T @ dev) / x.shape[0]
    cov = 0.5 * (cov + cov.T)
    return mean, _regularize_covariance(cov, x.shape[0], shrinkage, name)


def fit_gaussian_importance(
    x_train: np.ndarray,
    x_test_inputs: np.ndarray,
    *,
    shrinkage: str | float | None = "oas",
    covariance: str = "pooled",
    mean_threshold: float | None = 1.0,
) -> ImportanceModel:
    """Plug-in Gaussian density ratio from maximum-likelihood moments
    (1/n scaling), regularized so the estimate survives p comparable to n.

    With the defaults the two domains share the pooled covariance (so the
    noisy quadratic parts of the two log densities cancel exactly), the
    covariance gets oracle-approximating shrinkage toward a scaled identity,
    and the mean difference is soft-thresholded at ``mean_threshold`` times
    the universal noise level sqrt(2 log(p) * var_j * (1/n + 1/m)), which
    removes the sqrt(p/n) log-ratio noise while keeping real displacements.
    ``covariance="separate"`` with ``shrinkage=None`` and
    ``mean_threshold=None`` recovers the plain per-domain plug-in.
    """
    x_train = np.asarray(x_train, dtype=float)
    x_test_inputs = np.asarray(x_test_inputs, dtype=float)
    for name, x in (("x_train", x_train), ("x_test_inputs", x_test_inputs)):
        if x.ndim != 2:
            raise ValueError(f"{name} must be 2-dimensional")
        if not np.all(np.isfinite(x)):
            raise ValueError(f"{name} contains non-finite entries")
    p = x_train.shape[1]
    if x_test_inputs.shape[1] != p:
        raise ValueError("training and test inputs have different column counts")
    for name, x in (("x_train", x_train), ("x_test_inputs", x_test_inputs)):
        if x.shape[0] < 2:
            raise ValueError(f"{name} needs at least 2 rows, has {x.shape[0]}")
    if covariance not in ("pooled", "separate"):
        raise ValueError(f"covariance must be 'pooled' or 'separate', got {covariance!r}")

    n, m = x_train.shape[0], x_test_inputs.shape[0]
    mean_tr = x_train.mean(axis=0)
    mean_te = x_test_inputs.mean(axis=0)
    if covariance == "separate":
        _, cov_tr = _fit_gaussian_domain(x_train, shrinkage, "training covariance")
        _, cov_te = _fit_gaussian_domain(x_test_inputs, shrinkage, "test covariance")
    else:
        dev_tr = x_train - mean_tr
        dev_te = x_test_inputs - mean_te
        pooled = (dev_tr.T @ dev_tr + dev_te.T @ dev_te) / (n + m)
        pooled = 0.5 * (pooled + pooled.T)
        cov_tr = cov_te = _regularize_covariance(pooled, n + m, shrinkage,
                                                 "pooled covariance")
    if mean_threshold:
        diag = 0.5 * (np.diag(cov_tr) + np.diag(cov_te))
        tau = mean_threshold * np.sqrt(2.0 * math.log(p) * diag * (1.0 / n + 1.0 / m))
        delta = mean_te - mean_tr
        delta = np.sign(delta) * np.maximum(np.abs(delta) - tau, 0.0)
        mid = 0.5 * (mean_tr + mean_te)
        mean_tr = mid - 0.5 * delta
        mean_te = mid + 0.5 * delta
    return ImportanceModel.gaussian(mean_tr, cov_tr, mean_te, cov_te)


def build_weights(model: ImportanceModel, x_train: np.ndarray, b_n: float) -> WeightVector:
    """Trim raw importances at b_n, then normalize once to mean one.

    v_t = min(w(x_t), b_n), w_t = v_t / mean(v). Trimming and normalization
    run in log space; the single normalizing division makes the mean exactly
    one.
    """
    if not b_n > 0.0:
        raise ValueError(f"b_n must be > 0, got {b_n}")
    logv = np.minimum(log_importance(model, x_train), math.log(b_n))
    log_total = logsumexp(logv)
    if not np.isfinite(log_total):
        raise ValueError("trimmed importance is identically zero on the sample")
    w = np.exp(logv - log_total + math.log(len(logv)))
    return WeightVector(w / w.mean())
