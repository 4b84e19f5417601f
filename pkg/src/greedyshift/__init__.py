"""Importance-weighted orthogonal greedy regression under covariate shift:
trimmed density-ratio weights, weighted greedy paths, information-criterion
stopping, population-level prediction error, and a simulation harness for
convergence-rate experiments.
"""

from .model_core import (
    Dataset,
    FitResult,
    SingularModelError,
    WeightVector,
    WeightedMoments,
    predict,
    residual_sigma2,
    weighted_moments,
    wls_fit,
)
from .weighting import (
    ImportanceModel,
    ScheduleConfig,
    build_weights,
    compute_bn,
    compute_cn,
    compute_dn,
    compute_kn,
    fit_gaussian_importance,
    log_importance,
    raw_importance,
)
from .greedy_path import GreedyPath, PathExhaustedError, build_path, greedy_step
from .criteria import CriterionTrace, hdic_value, hdiwic_value, select_k
from .evaluation import (
    Misspec,
    Population,
    cpe_analytic,
    mcpe_analytic,
    mcpe_monte_carlo,
    population_projection,
    population_residual_variance,
    regression_function,
)
from .simulation import ScenarioConfig, draw_dataset, make_population, true_importance_model

__version__ = "0.1.0"
