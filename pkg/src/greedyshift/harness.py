"""Pipeline composition and the replication machinery behind the CLI:
single fits, replicated rate sweeps over (n, p) grids, greedy-path
diagnostics, and estimated-weight diagnostics, with JSON/CSV persistence.

Replications run in spawned worker processes whose BLAS is pinned to one
thread, and per-replication seeds are derived from (base seed, cell, rep),
so serial and parallel sweeps produce identical aggregates and a fixed
(config, seed) pair reproduces outputs byte for byte.
"""

from __future__ import annotations

import csv
import functools
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from multiprocessing import get_context
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError
from .criteria import select_k
from .evaluation import (
    Population,
    cpe_analytic,
    mcpe_analytic,
    mcpe_monte_carlo,
    population_residual_variance,
)
from .greedy_path import build_path
from .model_core import Dataset, SingularModelError, WeightVector
from .simulation import ScenarioConfig, draw_dataset, make_population, true_importance_model
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
)

__all__ = [
    "NumericalFailure",
    "RunRecord",
    "CellResult",
    "RateSweepResult",
    "run_fit",
    "run_rate_sweep",
    "path_diagnostics",
    "run_weights_diag",
    "read_dataset_csv",
    "read_test_inputs_csv",
    "write_run_record",
    "write_dataset_csv",
    "write_sweep_outputs",
    "default_threads",
]

MC_FALLBACK_DRAWS = 100_000  # Monte Carlo evaluation size for misspecified populations


class NumericalFailure(RuntimeError):
    """A numerical breakdown (singularity, degenerate covariance, failed
    sweep cell) as opposed to an input-validation problem."""


def default_threads() -> int:
    env = os.environ.get("GREEDYSHIFT_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# single fit
# ---------------------------------------------------------------------------


@dataclass
class RunRecord:
    """Machine-readable outcome of one fit/select pipeline run."""

    method: str
    n: int
    p: int
    seed: object
    schedule: dict
    selected_k: int
    selected_model: tuple[int, ...]
    alpha: float
    beta: list[float]
    sigma2_trace: list[float]
    criterion_values: list[float]
    mcpe: float | None
    cpe: float | None
    mcpe_se: float | None
    path_stop_reason: str | None
    wall_time_ms: int
    library_version: str
    scenario: dict | None = None
    input_files: dict | None = None

    def __post_init__(self):
        if not 1 <= self.selected_k <= self.schedule["k_n"]:
            raise ValueError(f"selected_k={self.selected_k} outside [1, K_n]")
        for name in ("sigma2_trace", "criterion_values"):
            vals = getattr(self, name)
            if not all(math.isfinite(v) for v in vals):
                raise ValueError(f"{name} contains non-finite values")
        for name in ("mcpe", "cpe"):
            val = getattr(self, name)
            if val is not None and not math.isfinite(val):
                raise ValueError(f"{name} is not finite")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["selected_model"] = list(self.selected_model)
        return out


def resolve_schedule(n: int, p: int, schedule: ScheduleConfig, method: str) -> dict:
    mode = "oga" if method == "oga+hdic" else "iwoga"
    return {
        "q": schedule.q,
        "eta": schedule.eta,
        "m_w": schedule.m_w,
        "m_eta": schedule.m_eta,
        "m_k": schedule.m_k,
        "s_a": schedule.s_a,
        "c_n": compute_cn(n, p),
        "d_n": compute_dn(n, p, schedule),
        "b_n": compute_bn(n, p, schedule),
        "k_n": compute_kn(n, p, schedule, mode),
    }


def _stable_eval_seed(seed) -> int:
    # process-independent derivation of an evaluation seed from a run seed
    if isinstance(seed, (int, np.integer)):
        entropy = (int(seed), 0xE7A1)
    else:
        entropy = tuple(int(v) for v in seed) + (0xE7A1,)
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint32)[0])


def _pipeline_weights(
    data: Dataset,
    method: str,
    b_n: float,
    *,
    importance: ImportanceModel | None,
    test_inputs: np.ndarray | None,
) -> WeightVector:
    if method == "oga+hdic":
        return WeightVector.unit(data.n)
    if method == "iwoga+hdiwic":
        if importance is None:
            raise ConfigError("iwoga+hdiwic needs a known importance model")
        return build_weights(importance, data.x, b_n)
    if method == "iwoga+hdiwic_s":
        if test_inputs is None:
            raise ConfigError("iwoga+hdiwic_s needs test inputs to estimate the importance")
        try:
            fitted = fit_gaussian_importance(data.x, test_inputs)
        except ValueError as err:
            raise NumericalFailure(f"importance estimation failed: {err}") from err
        return build_weights(fitted, data.x, b_n)
    raise ConfigError(f"unknown method {method!r}")


def run_fit(
    data: Dataset,
    schedule: ScheduleConfig,
    method: str,
    *,
    population: Population | None = None,
    importance: ImportanceModel | None = None,
    test_inputs: np.ndarray | None = None,
    scenario: ScenarioConfig | None = None,
    input_files: dict | None = None,
    seed: object = 0,
) -> RunRecord:
    """Weights, greedy path, criterion selection, and (when the population
    is known) prediction-error evaluation, bundled into one record.

    For method "iwoga+hdiwic" the importance model is taken from
    ``importance`` or derived from the population; "iwoga+hdiwic_s"
    estimates it from ``test_inputs``; "oga+hdic" runs unweighted.
    """
    t0 = time.perf_counter()
    n, p = data.n, data.p
    resolved = resolve_schedule(n, p, schedule, method)
    if method == "iwoga+hdiwic" and importance is None and population is not None:
        importance = true_importance_model(population)
    try:
        w = _pipeline_weights(
            data, method, resolved["b_n"], importance=importance, test_inputs=test_inputs
        )
        path = build_path(data, w, resolved["k_n"])
    except SingularModelError as err:
        raise NumericalFailure(str(err)) from err
    rate = resolved["c_n"] if method == "oga+hdic" else resolved["d_n"]
    trace = select_k(path, rate, schedule.s_a)
    fit = path.fits[trace.selected_k - 1]

    mcpe = cpe = mcpe_se = None
    if population is not None:
        if population.misspec is None:
            mcpe = mcpe_analytic(population, fit)
            cpe = cpe_analytic(population, fit)
        else:
            mcpe, mcpe_se = mcpe_monte_carlo(
                population, fit, MC_FALLBACK_DRAWS, seed=_stable_eval_seed(seed)
            )
            cpe = mcpe

    wall_ms = int((time.perf_counter() - t0) * 1000)
    return RunRecord(
        method=method,
        n=n,
        p=p,
        seed=seed,
        schedule=resolved,
        selected_k=trace.selected_k,
        selected_model=fit.model,
        alpha=fit.alpha,
        beta=[float(b) for b in fit.beta],
        sigma2_trace=[float(v) for v in path.sigma2_trace],
        criterion_values=[float(v) for v in trace.values],
        mcpe=mcpe,
        cpe=cpe,
        mcpe_se=mcpe_se,
        path_stop_reason=path.stop_reason,
        wall_time_ms=wall_ms,
        library_version=__version__,
        scenario=asdict(scenario) if scenario is not None else None,
        input_files=input_files,
    )


# ---------------------------------------------------------------------------
# worker-side caches and entry points (top level so spawn can import them)
# ---------------------------------------------------------------------------


@functools.lru_cache(maxsize=2)
def _cached_setup(scenario: ScenarioConfig) -> tuple[Population, ImportanceModel | None]:
    pop = make_population(scenario)
    model = true_importance_model(pop) if scenario.weight_mode == "known" else None
    return pop, model


def _rep_seed(base_seed: int, cell: int, rep: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=(int(base_seed), int(cell), int(rep)))


def _sweep_rep(payload) -> tuple:
    scenario, schedule, method, cell, rep, base_seed = payload
    pop, importance = _cached_setup(scenario)
    seed = _rep_seed(base_seed, cell, rep)
    try:
        data, x_te = draw_dataset(pop, scenario.n, seed, n_test=scenario.n_test_inputs)
        rec = run_fit(
            data,
            schedule,
            method,
            population=pop,
            importance=importance,
            test_inputs=x_te,
            seed=(base_seed, cell, rep),
        )
    except (NumericalFailure, ValueError) as err:
        return (cell, rep, None, None, None, repr(err))
    return (cell, rep, rec.selected_k, rec.mcpe, rec.cpe, None)


def _diag_rep(payload) -> tuple:
    scenario, schedule, rep, base_seed = payload
    pop, importance = _cached_setup(scenario)
    seed = _rep_seed(base_seed, 0, rep)
    data, _ = draw_dataset(pop, scenario.n, seed, n_test=scenario.n_test_inputs)
    b_n = compute_bn(scenario.n, scenario.p, schedule)
    k_n = compute_kn(scenario.n, scenario.p, schedule, "iwoga")
    w = build_weights(importance, data.x, b_n)
    path = build_path(data, w, k_n)
    pop_resid = np.array(
        [population_residual_variance(pop, fit.model) for fit in path.fits]
    )
    mcpe = np.array([mcpe_analytic(pop, fit) for fit in path.fits])
    d_n = compute_dn(scenario.n, scenario.p, schedule)
    trace = select_k(path, d_n, schedule.s_a)
    return (rep, pop_resid, mcpe, trace.selected_k)


def _pool(threads: int):
    # spawn + env pinning keeps worker BLAS single-threaded and results
    # independent of the pool size
    for var in ("OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "OMP_NUM_THREADS",
                "NUMEXPR_NUM_THREADS", "VECLIB_MAXIMUM_THREADS"):
        os.environ[var] = "1"
    return ProcessPoolExecutor(max_workers=max(1, threads), mp_context=get_context("spawn"))


# ---------------------------------------------------------------------------
# rate sweeps
# ---------------------------------------------------------------------------


@dataclass
class CellResult:
    """Aggregates for one (n, p) grid cell."""

    n: int
    p: int
    rate: float  # d_n for weighted methods, c_n for oga+hdic
    mcpes: np.ndarray
    cpes: np.ndarray
    k_hats: np.ndarray
    n_failed: int

    @property
    def mean_mcpe(self) -> float:
        return float(np.mean(self.mcpes))

    @property
    def se_mcpe(self) -> float:
        r = len(self.mcpes)
        return float(np.std(self.mcpes, ddof=1) / math.sqrt(r))

    @property
    def mean_cpe(self) -> float:
        return float(np.mean(self.cpes))


@dataclass
class RateSweepResult:
    """Per-cell aggregates plus the fitted log-log rate."""

    method: str
    xi: float
    base_seed: int
    replications: int
    cells: list[CellResult]
    slope: float | None
    slope_se: float | None
    target_exponent: float
    slope_skip_reason: str | None = None
    use_cpe: bool = False

    def cell(self, n: int) -> CellResult:
        for c in self.cells:
            if c.n == n:
                return c
        raise KeyError(f"no cell with n={n}")


def _loglog_slope(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    lx, ly = np.log(x), np.log(y)
    lx_c = lx - lx.mean()
    slope = float(lx_c @ ly / (lx_c @ lx_c))
    fitted = ly.mean() + slope * lx_c
    dof = max(len(x) - 2, 1)
    resid_var = float(np.sum((ly - fitted) ** 2)) / dof
    return slope, math.sqrt(resid_var / float(lx_c @ lx_c))


def target_exponent(method: str, scenario: ScenarioConfig) -> float:
    """(1+2xi)/(1+xi) for the weighted pipelines and for the unweighted one
    under a moderate shift; 2xi/(1+xi) for the unweighted pipeline when the
    mean displacement grows with p (shift_pattern "all")."""
    xi = scenario.xi
    if method == "oga+hdic" and scenario.shift_pattern == "all" and scenario.shift_mean != 0:
        return 2.0 * xi / (1.0 + xi)
    return (1.0 + 2.0 * xi) / (1.0 + xi)


def run_rate_sweep(
    base_scenario: ScenarioConfig,
    schedule: ScheduleConfig,
    method: str,
    n_grid,
    p_grid,
    replications: int,
    *,
    base_seed: int | None = None,
    threads: int | None = None,
) -> RateSweepResult:
    """Full pipeline per grid cell per replication; averages MCPE per cell
    and fits the log-log slope of mean error against the rate unit.

    A cell whose replications all fail aborts the sweep; the slope fit is
    skipped (with a recorded reason) for effectively noiseless scenarios.
    """
    n_grid = [int(n) for n in n_grid]
    p_grid = [int(p) for p in p_grid]
    if len(set(n_grid)) < 4:
        raise ConfigError("rate sweep needs at least 4 distinct n values")
    if replications < 20:
        raise ConfigError("rate sweep needs at least 20 replications")
    if base_seed is None:
        base_seed = base_scenario.seed
    threads = default_threads() if threads is None else threads

    scenarios = [replace(base_scenario, n=n, p=p) for n, p in zip(n_grid, p_grid)]
    payloads = [
        (scenarios[c], schedule, method, c, rep, base_seed)
        for c in range(len(scenarios))
        for rep in range(replications)
    ]
    results: dict[tuple[int, int], tuple] = {}
    with _pool(threads) as pool:
        for out in pool.map(_sweep_rep, payloads, chunksize=1):
            results[(out[0], out[1])] = out

    cells = []
    for c, scen in enumerate(scenarios):
        rows = [results[(c, rep)] for rep in range(replications)]
        good = [r for r in rows if r[5] is None]
        if not good:
            raise NumericalFailure(
                f"cell (n={scen.n}, p={scen.p}) failed in all {replications} "
                f"replications; first error: {rows[0][5]}"
            )
        rate = (
            compute_cn(scen.n, scen.p)
            if method == "oga+hdic"
            else compute_dn(scen.n, scen.p, schedule)
        )
        cells.append(
            CellResult(
                n=scen.n,
                p=scen.p,
                rate=rate,
                mcpes=np.array([r[3] for r in good]),
                cpes=np.array([r[4] for r in good]),
                k_hats=np.array([r[2] for r in good]),
                n_failed=len(rows) - len(good),
            )
        )

    use_cpe = method == "oga+hdic"
    slope = slope_se = None
    skip = None
    if base_scenario.noise_sd < 1e-6:
        skip = "noise_sd below 1e-6: error is bias-dominated, slope not meaningful"
    else:
        rates = np.array([c.rate for c in cells])
        means = np.array([c.mean_cpe if use_cpe else c.mean_mcpe for c in cells])
        slope, slope_se = _loglog_slope(rates, means)
    return RateSweepResult(
        method=method,
        xi=base_scenario.xi,
        base_seed=base_seed,
        replications=replications,
        cells=cells,
        slope=slope,
        slope_se=slope_se,
        target_exponent=target_exponent(method, base_scenario),
        slope_skip_reason=skip,
        use_cpe=use_cpe,
    )


def path_diagnostics(
    scenario: ScenarioConfig,
    schedule: ScheduleConfig,
    replications: int,
    *,
    base_seed: int | None = None,
    threads: int | None = None,
) -> list[dict]:
    """Per-replication greedy-path diagnostics with known weights: the
    population residual variance and the analytic prediction error at every
    step, plus the criterion-selected step."""
    if scenario.weight_mode != "known":
        raise ConfigError("path diagnostics need weight_mode = 'known'")
    if base_seed is None:
        base_seed = scenario.seed
    threads = default_threads() if threads is None else threads
    payloads = [(scenario, schedule, rep, base_seed) for rep in range(replications)]
    rows: dict[int, tuple] = {}
    with _pool(threads) as pool:
        for out in pool.map(_diag_rep, payloads, chunksize=1):
            rows[out[0]] = out
    return [
        {"rep": rep, "pop_resid": rows[rep][1], "mcpe": rows[rep][2],
         "selected_k": rows[rep][3]}
        for rep in range(replications)
    ]


# ---------------------------------------------------------------------------
# estimated-weight diagnostics
# ---------------------------------------------------------------------------


def run_weights_diag(
    scenario: ScenarioConfig,
    schedule: ScheduleConfig,
    replications: int,
    *,
    base_seed: int | None = None,
) -> dict:
    """Compare estimated against true trimmed importances on simulated data.

    Reports, per replication and in the median: the largest normalized-weight
    error max_t |what_t - w_t|, the largest second-moment perturbation
    max_{0<=i<=j<=p} |(1/n) sum_t (v_t - vhat_t) x_ti x_tj| (with x_0 = 1),
    and the largest noise cross-moment max_i |(1/n) sum_t (v_t - vhat_t)
    x_ti eps_t|, each also divided by d_n.
    """
    from .evaluation import regression_function

    if base_seed is None:
        base_seed = scenario.seed
    known = scenario if scenario.weight_mode == "known" else replace(scenario, weight_mode="known")
    pop, true_model = _cached_setup(known)
    b_n = compute_bn(scenario.n, scenario.p, schedule)
    d_n = compute_dn(scenario.n, scenario.p, schedule)
    rows = []
    for rep in range(replications):
        seed = _rep_seed(base_seed, 0, rep)
        data, x_te = draw_dataset(pop, scenario.n, seed, n_test=scenario.n_test_inputs)
        n = data.n
        log_b = math.log(b_n)
        v_true = np.exp(np.minimum(log_importance(true_model, data.x), log_b))
        w_true = v_true / v_true.mean()
        if scenario.weight_mode == "estimated":
            fitted = fit_gaussian_importance(data.x, x_te)
            v_hat = np.exp(np.minimum(log_importance(fitted, data.x), log_b))
        else:
            v_hat = v_true.copy()
        w_hat = v_hat / v_hat.mean()

        dv = v_true - v_hat
        xt = np.column_stack([np.ones(n), data.x])
        moment = xt.T @ (dv[:, None] * xt) / n
        eps = data.y - np.asarray(regression_function(pop, data.x))
        cross = np.abs(xt.T @ (dv * eps)) / n
        rows.append(
            {
                "rep": rep,
                "max_weight_err": float(np.abs(w_hat - w_true).max()),
                "moment_stat": float(np.abs(moment).max()),
                "noise_stat": float(cross.max()),
            }
        )
    med = {
        f"median_{key}": float(np.median([r[key] for r in rows]))
        for key in ("max_weight_err", "moment_stat", "noise_stat")
    }
    return {
        "scenario": asdict(scenario),
        "d_n": d_n,
        "b_n": b_n,
        "replications": replications,
        "rows": [
            {**r, "moment_over_dn": r["moment_stat"] / d_n,
             "noise_over_dn": r["noise_stat"] / d_n}
            for r in rows
        ],
        **med,
        "median_moment_over_dn": med["median_moment_stat"] / d_n,
        "median_noise_over_dn": med["median_noise_stat"] / d_n,
    }


# ---------------------------------------------------------------------------
# CSV and JSON persistence
# ---------------------------------------------------------------------------


def read_dataset_csv(path) -> Dataset:
    """Training CSV: header row, one column named y, remaining numeric
    columns are covariates."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if header.count("y") != 1:
            raise ConfigError(f"{path}: need exactly one column named 'y'")
        y_pos = header.index("y")
        names = [h for h in header if h != "y"]
        if not names:
            raise ConfigError(f"{path}: no covariate columns")
        xs, ys = [], []
        for i, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise ConfigError(
                    f"{path}: row {i} has {len(row)} fields, expected {len(header)}"
                )
            try:
                vals = [float(v) for v in row]
            except ValueError:
                raise ConfigError(f"{path}: row {i} has a non-numeric field") from None
            if not all(math.isfinite(v) for v in vals):
                raise ConfigError(f"{path}: row {i} has a non-finite value")
            ys.append(vals[y_pos])
            xs.append([v for k, v in enumerate(vals) if k != y_pos])
    if len(xs) < 2:
        raise ConfigError(f"{path}: need at least 2 data rows")
    return Dataset(x=np.asarray(xs), y=np.asarray(ys), feature_names=tuple(names))


def read_test_inputs_csv(path, feature_names) -> np.ndarray:
    """Test-inputs CSV with exactly the training covariate headers (any
    order); columns are aligned to the training order."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ConfigError(f"{path}: empty file") from None
        if sorted(header) != sorted(feature_names):
            raise ConfigError(
                f"{path}: covariate headers {header} do not match training "
                f"covariates {list(feature_names)}"
            )
        order = [header.index(name) for name in feature_names]
        rows = []
        for i, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise ConfigError(
                    f"{path}: row {i} has {len(row)} fields, expected {len(header)}"
                )
            try:
                vals = [float(v) for v in row]
            except ValueError:
                raise ConfigError(f"{path}: row {i} has a non-numeric field") from None
            if not all(math.isfinite(v) for v in vals):
                raise ConfigError(f"{path}: row {i} has a non-finite value")
            rows.append([vals[k] for k in order])
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    return np.asarray(rows)


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_dataset_csv(data: Dataset, path) -> None:
    names = data.feature_names or tuple(f"x{j + 1}" for j in range(data.p))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["y", *names])
        for t in range(data.n):
            writer.writerow([_fmt(float(data.y[t]))] + [_fmt(float(v)) for v in data.x[t]])


def write_matrix_csv(x: np.ndarray, names, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(names))
        for row in x:
            writer.writerow([_fmt(float(v)) for v in row])


def write_run_record(record: RunRecord, out_dir) -> None:
    """run.json plus the per-step trace CSV (k, sigma2, criterion)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "run.json", "w") as fh:
        json.dump(record.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(out / "trace.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "sigma2", "criterion"])
        for k, (s2, cv) in enumerate(
            zip(record.sigma2_trace, record.criterion_values), start=1
        ):
            writer.writerow([k, _fmt(s2), _fmt(cv)])


def write_sweep_outputs(result: RateSweepResult, out_dir) -> None:
    """sweep.csv (per-cell aggregates), reps.csv (per-replication detail),
    and sweep.json (slope summary)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "p", "d_n", "mean_mcpe", "se"])
        for c in result.cells:
            writer.writerow([c.n, c.p, _fmt(c.rate), _fmt(c.mean_mcpe), _fmt(c.se_mcpe)])
    with open(out / "reps.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "p", "rep", "selected_k", "mcpe", "cpe"])
        for c in result.cells:
            for rep, (k_hat, mcpe, cpe) in enumerate(zip(c.k_hats, c.mcpes, c.cpes)):
                writer.writerow([c.n, c.p, rep, int(k_hat), _fmt(float(mcpe)),
                                 _fmt(float(cpe))])
    summary = {
        "method": result.method,
        "xi": result.xi,
        "base_seed": result.base_seed,
        "replications": result.replications,
        "slope": result.slope,
        "slope_se": result.slope_se,
        "target_exponent": result.target_exponent,
        "slope_skip_reason": result.slope_skip_reason,
        "error_metric": "cpe" if result.use_cpe else "mcpe",
        "cells": [
            {"n": c.n, "p": c.p, "rate": c.rate, "mean_mcpe": c.mean_mcpe,
             "se_mcpe": c.se_mcpe, "mean_cpe": c.mean_cpe, "n_failed": c.n_failed,
             "mean_k_hat": float(np.mean(c.k_hats))}
            for c in result.cells
        ],
    }
    with open(out / "sweep.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
