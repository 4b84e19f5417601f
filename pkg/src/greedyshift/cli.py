"""Command-line front end: fit, rate-sweep, weights-diag, simulate.

Exit codes: 0 success, 2 validation/configuration error, 3 numerical
failure (singularity or an aborted sweep cell).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, HarnessConfig, load_config
from .harness import (
    NumericalFailure,
    default_threads,
    read_dataset_csv,
    read_test_inputs_csv,
    run_fit,
    run_rate_sweep,
    run_weights_diag,
    write_dataset_csv,
    write_matrix_csv,
    write_run_record,
    write_sweep_outputs,
)
from .model_core import SingularModelError
from .simulation import draw_dataset, make_population

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="greedyshift",
        description="importance-weighted greedy model selection under covariate shift",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, *, threads=False, method=False):
        p.add_argument("--config", required=True, type=Path, help="TOML config file")
        p.add_argument("--out", required=True, type=Path, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        if method:
            p.add_argument("--method", default=None,
                           choices=["iwoga+hdiwic", "iwoga+hdiwic_s", "oga+hdic"])
        if threads:
            p.add_argument("--threads", type=int, default=None,
                           help="worker processes (default: GREEDYSHIFT_THREADS or CPU count)")

    add_common(sub.add_parser("fit", help="one fit/select run"), threads=True, method=True)
    add_common(sub.add_parser("rate-sweep", help="replicated rate-verification sweep"),
               threads=True, method=True)
    add_common(sub.add_parser("weights-diag", help="estimated-weight diagnostics"),
               threads=True)
    add_common(sub.add_parser("simulate", help="emit dataset CSVs for a scenario"),
               threads=True)
    return parser


def _apply_overrides(cfg: HarnessConfig, args) -> HarnessConfig:
    updates = {}
    if getattr(args, "method", None):
        updates["method"] = args.method
    if args.seed is not None and cfg.scenario is not None:
        updates["scenario"] = replace(cfg.scenario, seed=args.seed)
    return replace(cfg, **updates) if updates else cfg


def _cmd_fit(cfg: HarnessConfig, args) -> int:
    if cfg.scenario is not None:
        scenario = cfg.scenario
        pop = make_population(scenario)
        data, x_te = draw_dataset(pop, scenario.n, scenario.seed,
                                  n_test=scenario.n_test_inputs)
        record = run_fit(
            data, cfg.schedule, cfg.method,
            population=pop, test_inputs=x_te, scenario=scenario, seed=scenario.seed,
        )
    else:
        data = read_dataset_csv(cfg.input_train)
        x_te = None
        files = {"train": str(cfg.input_train)}
        if cfg.input_test is not None:
            x_te = read_test_inputs_csv(cfg.input_test, data.feature_names)
            files["test_inputs"] = str(cfg.input_test)
        record = run_fit(
            data, cfg.schedule, cfg.method,
            test_inputs=x_te, input_files=files, seed=args.seed or 0,
        )
    write_run_record(record, args.out)
    extra = "" if record.mcpe is None else f", mcpe={record.mcpe:.6g}"
    print(f"{cfg.method}: selected k={record.selected_k} of K_n={record.schedule['k_n']}"
          f"{extra} -> {args.out}/run.json")
    return 0


def _cmd_rate_sweep(cfg: HarnessConfig, args) -> int:
    if cfg.sweep is None:
        raise ConfigError("rate-sweep needs a [sweep] section in the config")
    scenario = cfg.scenario
    result = run_rate_sweep(
        scenario, cfg.schedule, cfg.method,
        cfg.sweep.n_grid, cfg.sweep.p_grid, cfg.sweep.replications,
        base_seed=scenario.seed,
        threads=args.threads if args.threads is not None else default_threads(),
    )
    write_sweep_outputs(result, args.out)
    if result.slope is None:
        print(f"slope skipped: {result.slope_skip_reason}")
    else:
        print(f"{cfg.method}: slope {result.slope:.3f} +/- {result.slope_se:.3f} "
              f"(target {result.target_exponent:.3f}) -> {args.out}/sweep.csv")
    return 0


def _cmd_weights_diag(cfg: HarnessConfig, args) -> int:
    if cfg.scenario is None:
        raise ConfigError("weights-diag needs a simulated [scenario]")
    report = run_weights_diag(cfg.scenario, cfg.schedule, cfg.diag_replications,
                              base_seed=cfg.scenario.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "diag.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"median max|w_hat - w| = {report['median_max_weight_err']:.4g}, "
          f"moment stat / d_n = {report['median_moment_over_dn']:.4g}, "
          f"noise stat / d_n = {report['median_noise_over_dn']:.4g} "
          f"-> {out}/diag.json")
    return 0


def _cmd_simulate(cfg: HarnessConfig, args) -> int:
    if cfg.scenario is None:
        raise ConfigError("simulate needs a [scenario] section")
    scenario = cfg.scenario
    pop = make_population(scenario)
    data, x_te = draw_dataset(pop, scenario.n, scenario.seed,
                              n_test=scenario.n_test_inputs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = tuple(f"x{j + 1}" for j in range(scenario.p))
    write_dataset_csv(data, out / "train.csv")
    write_matrix_csv(x_te, names, out / "test_inputs.csv")
    print(f"wrote {out}/train.csv ({data.n} rows) and {out}/test_inputs.csv "
          f"({x_te.shape[0]} rows)")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        if args.command == "fit":
            return _cmd_fit(cfg, args)
        if args.command == "rate-sweep":
            return _cmd_rate_sweep(cfg, args)
        if args.command == "weights-diag":
            return _cmd_weights_diag(cfg, args)
        if args.command == "simulate":
            return _cmd_simulate(cfg, args)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (SingularModelError, NumericalFailure) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
