"""Declarative TOML configuration for the command-line harness.

One file describes the data source (a simulated scenario or CSV paths), the
schedule constants, the method, and optional sweep/diagnostic sections. Every
paper-level constant (q, eta, M_w, M_eta, M_k, s_a) is a named key under
[schedule].
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .simulation import ScenarioConfig
from .weighting import ScheduleConfig

__all__ = ["ConfigError", "HarnessConfig", "SweepSpec", "load_config"]

METHODS = ("iwoga+hdiwic", "iwoga+hdiwic_s", "oga+hdic")


class ConfigError(ValueError):
    """Invalid or inconsistent harness configuration."""


@dataclass(frozen=True)
class SweepSpec:
    """Replicated grid for rate verification: (n, p) cells and R."""

    n_grid: tuple[int, ...]
    p_grid: tuple[int, ...]
    replications: int

    def __post_init__(self):
        if len(self.n_grid) != len(self.p_grid):
            raise ConfigError("n_grid and p_grid have different lengths")
        if len(set(self.n_grid)) < 4:
            raise ConfigError("rate sweep needs at least 4 distinct n values")
        if self.replications < 20:
            raise ConfigError("rate sweep needs at least 20 replications")

    @property
    def cells(self) -> list[tuple[int, int]]:
        return list(zip(self.n_grid, self.p_grid))


@dataclass(frozen=True)
class HarnessConfig:
    method: str
    schedule: ScheduleConfig
    scenario: ScenarioConfig | None = None
    input_train: Path | None = None
    input_test: Path | None = None
    sweep: SweepSpec | None = None
    diag_replications: int = 10

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if (self.scenario is None) == (self.input_train is None):
            raise ConfigError("exactly one of [scenario] and [input] must be given")
        if self.scenario is not None:
            mode = self.scenario.weight_mode
            if self.method == "iwoga+hdiwic" and mode != "known":
                raise ConfigError("iwoga+hdiwic uses known weights; set weight_mode = 'known'")
            if self.method == "iwoga+hdiwic_s" and mode != "estimated":
                raise ConfigError(
                    "iwoga+hdiwic_s uses estimated weights; set weight_mode = 'estimated'"
                )
        if self.input_train is not None:
            if self.method == "iwoga+hdiwic":
                raise ConfigError(
                    "iwoga+hdiwic needs the true importance, which CSV input cannot provide; "
                    "use iwoga+hdiwic_s or oga+hdic"
                )
            if self.method == "iwoga+hdiwic_s" and self.input_test is None:
                raise ConfigError("iwoga+hdiwic_s on CSV input needs a test-inputs CSV")
        if self.diag_replications < 1:
            raise ConfigError("diag replications must be >= 1")


def _take(table: dict, known: dict, where: str) -> dict:
    unknown = set(table) - set(known)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")
    out = {}
    for key, target in known.items():
        if key in table:
            out[target] = table[key]
    return out


def _parse_schedule(table: dict) -> ScheduleConfig:
    mapping = {"q": "q", "eta": "eta", "M_w": "m_w", "M_eta": "m_eta", "M_k": "m_k",
               "s_a": "s_a"}
    try:
        return ScheduleConfig(**_take(table, mapping, "[schedule]"))
    except ValueError as err:
        raise ConfigError(f"invalid [schedule]: {err}") from err


def _parse_scenario(table: dict) -> ScenarioConfig:
    mapping = {
        "n": "n",
        "p": "p",
        "xi": "xi",
        "shift_mean": "shift_mean",
        "shift_cov": "shift_cov",
        "noise_sd": "noise_sd",
        "misspec_amplitude": "misspec_amplitude",
        "misspec_kind": "misspec_kind",
        "seed": "seed",
        "weight_mode": "weight_mode",
        "q_declared": "q_declared",
        "shift_pattern": "shift_pattern",
        "n_test_inputs": "n_test_inputs",
    }
    try:
        return ScenarioConfig(**_take(table, mapping, "[scenario]"))
    except (TypeError, ValueError) as err:
        raise ConfigError(f"invalid [scenario]: {err}") from err


def _parse_sweep(table: dict, scenario: ScenarioConfig | None) -> SweepSpec:
    known = {"n_grid": "n_grid", "p": "p", "p_grid": "p_grid",
             "replications": "replications"}
    raw = _take(table, known, "[sweep]")
    if "n_grid" not in raw:
        raise ConfigError("[sweep] needs n_grid")
    n_grid = tuple(int(n) for n in raw["n_grid"])
    if "p_grid" in raw:
        p_grid = tuple(int(p) for p in raw["p_grid"])
    else:
        p_rule = raw.get("p", "n")
        if p_rule == "n":
            p_grid = n_grid
        elif isinstance(p_rule, int):
            p_grid = tuple(p_rule for _ in n_grid)
        else:
            raise ConfigError(f"[sweep] p must be 'n' or an integer, got {p_rule!r}")
    if scenario is None:
        raise ConfigError("rate sweeps need a [scenario] section")
    return SweepSpec(n_grid=n_grid, p_grid=p_grid,
                     replications=int(raw.get("replications", 50)))


def load_config(path) -> HarnessConfig:
    """Parse and validate a harness configuration file."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError as err:
        raise ConfigError(f"config file not found: {path}") from err
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"config file {path} is not valid TOML: {err}") from err

    top_known = {"method", "schedule", "scenario", "input", "sweep", "diag"}
    unknown = set(doc) - top_known
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {sorted(unknown)}")
    method = doc.get("method", "iwoga+hdiwic")
    schedule = _parse_schedule(doc.get("schedule", {}))
    scenario = _parse_scenario(doc["scenario"]) if "scenario" in doc else None

    input_train = input_test = None
    if "input" in doc:
        raw = _take(doc["input"], {"train": "train", "test_inputs": "test_inputs"}, "[input]")
        if "train" not in raw:
            raise ConfigError("[input] needs a train CSV path")
        input_train = (path.parent / raw["train"]).resolve()
        if "test_inputs" in raw:
            input_test = (path.parent / raw["test_inputs"]).resolve()

    sweep = _parse_sweep(doc["sweep"], scenario) if "sweep" in doc else None
    diag_reps = 10
    if "diag" in doc:
        raw = _take(doc["diag"], {"replications": "replications"}, "[diag]")
        diag_reps = int(raw.get("replications", 10))

    return HarnessConfig(
        method=method,
        schedule=schedule,
        scenario=scenario,
        input_train=input_train,
        input_test=input_test,
        sweep=sweep,
        diag_replications=diag_reps,
    )
