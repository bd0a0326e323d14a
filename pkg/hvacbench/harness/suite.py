"""
Benchmark suite: every controller on every test day in closed loop.

Evaluations run in a process pool and are reduced in (scenario, controller)
order, so the cost CSVs do not depend on completion order. Wall times go to
a separate timing table.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np
import pandas as pd

from hvacbench.controllers.base import (
    ControllerKind,
    ControllerSpec,
    load_terminal_table,
    make_controller,
)
from hvacbench.controllers.rbc import RbcConfig
from hvacbench.errors import ConfigurationError, HvacBenchError
from hvacbench.harness.simulate import EpisodeResult, run_episode
from hvacbench.nn.mlp import load_mlp
from hvacbench.scenarios.generator import DayScenario, ScenarioSet
from hvacbench.thermal.setup import BuildingSetup
from hvacbench.training.curves import write_run_manifest

if TYPE_CHECKING:
    from hvacbench.settings import ExperimentConfig

logger = logging.getLogger(__name__)

REFERENCE = ControllerKind.OPT.value
RESULT_COLUMNS = ["scenario", "controller", "status", "total", "energy", "comfort", "power_limit",
                  "energy_kwh", "peak_power", "out_of_distribution", "error"]
TIMING_COLUMNS = ["scenario", "controller", "mean_step_time", "online_time"]

TRAINED_METHODS = {
    ControllerKind.DPC: "dpc",
    ControllerKind.RLC: "rlc",
    ControllerKind.MPC_CL: "mpccl",
}


@dataclass
class RunResult:
    scenario: str
    controller: str
    status: str = "ok"
    total: float = math.nan
    energy: float = math.nan
    comfort: float = math.nan
    power_limit: float = math.nan
    energy_kwh: float = math.nan
    peak_power: float = math.nan
    mean_step_time: float = math.nan
    online_time: float = math.nan
    out_of_distribution: bool = False
    error: str = ""
    episode: EpisodeResult | None = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @classmethod
    def from_episode(cls, episode: EpisodeResult, ood: bool) -> "RunResult":
        return cls(
            scenario=episode.label,
            controller=episode.controller,
            total=episode.total,
            energy=episode.energy,
            comfort=episode.comfort,
            power_limit=episode.power_limit,
            energy_kwh=episode.energy_kwh,
            peak_power=episode.peak_power,
            mean_step_time=episode.mean_step_time,
            online_time=episode.online_time,
            out_of_distribution=ood,
            episode=episode,
        )

    def row(self) -> dict:
        return {c: getattr(self, c) for c in RESULT_COLUMNS}

    def timing_row(self) -> dict:
        return {c: getattr(self, c) for c in TIMING_COLUMNS}


@dataclass
class MetricsTable:
    frame: pd.DataFrame            # indexed by controller

    def relative_error(self, controller: str) -> float:
        return float(self.frame.loc[controller, "relative_error_pct"])

    def mean_cost(self, controller: str) -> float:
        return float(self.frame.loc[controller, "mean_cost"])

    @property
    def controllers(self) -> list[str]:
        return list(self.frame.index)

    def cost_frame(self) -> pd.DataFrame:
        return self.frame[["mean_cost", "mean_energy", "mean_comfort", "mean_power_limit",
                           "relative_error_pct", "ood_mean_cost", "scenarios_ok", "scenarios_failed"]]

    def timing_frame(self) -> pd.DataFrame:
        return self.frame[["mean_online_time", "mean_step_time", "train_wall_time"]]


@dataclass
class SuiteOutcome:
    results: list[RunResult]
    metrics: MetricsTable
    out_dir: Path | None = None

    @property
    def failures(self) -> int:
        return sum(not r.ok for r in self.results)

    @property
    def exit_code(self) -> int:
        return 1 if self.failures else 0


def compute_metrics(results: list[RunResult], train_times: dict[str, float] | None = None) -> MetricsTable:
    """
    Per-controller means over successful days. The relative error is a ratio
    of means: (mean cost / mean OPT cost - 1) * 100.
    """
    train_times = train_times or {}
    frame = results_frame(results)
    ok = frame[frame["status"] == "ok"]
    names = sorted(frame["controller"].unique())
    reference = ok.loc[ok["controller"] == REFERENCE, "total"]
    reference_mean = float(reference.mean()) if len(reference) else math.nan
    timing = pd.DataFrame([r.timing_row() for r in results if r.ok], columns=TIMING_COLUMNS)

    rows = []
    for name in names:
        mine = ok[ok["controller"] == name]
        mean_cost = float(mine["total"].mean()) if len(mine) else math.nan
        if name == REFERENCE:
            relative = 0.0
        elif reference_mean and np.isfinite(reference_mean):
            relative = (mean_cost / reference_mean - 1.0) * 100.0
        else:
            relative = math.nan
        ood = mine[mine["out_of_distribution"]]
        times = timing[timing["controller"] == name]
        rows.append({
            "controller": name,
            "mean_cost": mean_cost,
            "mean_energy": float(mine["energy"].mean()) if len(mine) else math.nan,
            "mean_comfort": float(mine["comfort"].mean()) if len(mine) else math.nan,
            "mean_power_limit": float(mine["power_limit"].mean()) if len(mine) else math.nan,
            "relative_error_pct": relative,
            "ood_mean_cost": float(ood["total"].mean()) if len(ood) else math.nan,
            "scenarios_ok": int(len(mine)),
            "scenarios_failed": int((frame["controller"] == name).sum() - len(mine)),
            "mean_online_time": float(times["online_time"].mean()) if len(times) else math.nan,
            "mean_step_time": float(times["mean_step_time"].mean()) if len(times) else math.nan,
            "train_wall_time": float(train_times.get(name, math.nan)),
        })
    return MetricsTable(pd.DataFrame(rows).set_index("controller"))


def results_frame(results: list[RunResult]) -> pd.DataFrame:
    return pd.DataFrame([r.row() for r in results], columns=RESULT_COLUMNS)


def results_from_frame(frame: pd.DataFrame) -> list[RunResult]:
    missing = set(RESULT_COLUMNS) - set(frame.columns)
    if missing:
        raise ConfigurationError(f"results table is missing columns {sorted(missing)}")
    frame = frame.fillna({"error": ""})
    return [RunResult(**{c: getattr(row, c) for c in RESULT_COLUMNS})
            for row in frame.itertuples(index=False)]


def load_results(directory: str | Path) -> list[RunResult]:
    """Results written by `write_suite`, with wall times merged back in."""
    directory = Path(directory)
    path = directory / "results.csv"
    if not path.is_file():
        raise ConfigurationError(f"no suite results at {path}; run evaluate first")
    results = results_from_frame(pd.read_csv(path, float_precision="round_trip"))
    timing_path = directory / "timing.csv"
    if timing_path.is_file():
        timing = pd.read_csv(timing_path).set_index(["scenario", "controller"])
        for r in results:
            if (r.scenario, r.controller) in timing.index:
                row = timing.loc[(r.scenario, r.controller)]
                r.mean_step_time = float(row["mean_step_time"])
                r.online_time = float(row["online_time"])
    return results


def reference_violations(results: list[RunResult]) -> list[tuple[str, str]]:
    """(scenario, controller) pairs that beat OPT on the same day."""
    opt = {r.scenario: r.total for r in results if r.ok and r.controller == REFERENCE}
    return [(r.scenario, r.controller) for r in results
            if r.ok and r.controller != REFERENCE and r.scenario in opt and r.total < opt[r.scenario] - 1e-9]


def artifact_path(cfg: "ExperimentConfig", kind: ControllerKind, lookahead: int) -> Path:
    return cfg.program_dir(cfg.artifact_dir) / f"{TRAINED_METHODS[kind]}-K{lookahead}.json"


def manifest_path(artifact: Path) -> Path:
    return artifact.with_suffix(".manifest.json")


def rbc_artifact_path(cfg: "ExperimentConfig") -> Path:
    return cfg.program_dir(cfg.artifact_dir) / "rbc.json"


def controller_specs(cfg: "ExperimentConfig") -> list[ControllerSpec]:
    """Specs for every configured controller; trained artifacts must already exist."""
    rbc = cfg.rbc
    tuned = rbc_artifact_path(cfg)
    if tuned.is_file():
        rbc = RbcConfig.model_validate_json(tuned.read_text())
        logger.info("using tuned RBC parameters from %s", tuned)

    specs = []
    for entry in cfg.controllers:
        kind = entry.kind
        if kind == ControllerKind.RBC:
            specs.append(ControllerSpec(kind, rbc=rbc))
        elif kind == ControllerKind.OPT:
            specs.append(ControllerSpec(kind, solver=cfg.opt_solver))
        else:
            for k in entry.lookaheads:
                if kind in (ControllerKind.MPC, ControllerKind.MPC_C):
                    specs.append(ControllerSpec(kind, k, solver=cfg.solver))
                elif kind == ControllerKind.MPC_CL:
                    specs.append(ControllerSpec(kind, k, terminal=load_terminal_table(artifact_path(cfg, kind, k)),
                                                solver=cfg.solver))
                else:
                    path = artifact_path(cfg, kind, k)
                    if not path.is_file():
                        raise ConfigurationError(f"{kind.value} K={k}: policy artifact not found at {path}")
                    specs.append(ControllerSpec(kind, k, policy=load_mlp(path)))
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise ConfigurationError(f"duplicate controllers in config: {names}")
    return specs


def train_wall_times(cfg: "ExperimentConfig", specs: list[ControllerSpec]) -> dict[str, float]:
    times = {}
    for spec in specs:
        if spec.kind not in TRAINED_METHODS:
            continue
        path = manifest_path(artifact_path(cfg, spec.kind, spec.lookahead))
        if path.is_file():
            times[spec.name] = float(json.loads(path.read_text()).get("train_wall_time", math.nan))
    return times


def evaluate_one(task: tuple[ControllerSpec, DayScenario, bool], setup: BuildingSetup) -> RunResult:
    spec, scenario, ood = task
    try:
        episode = run_episode(make_controller(spec, setup), scenario, setup)
    except HvacBenchError as e:
        logger.error("%s on %s failed: %s", spec.name, scenario.label, e)
        return RunResult(scenario.label, spec.name, status="failed", out_of_distribution=ood,
                         error=f"{type(e).__name__}: {e}")
    for note in episode.notes:
        logger.warning("%s on %s: %s", spec.name, scenario.label, note)
    return RunResult.from_episode(episode, ood)


def run_suite(cfg: "ExperimentConfig", setup: BuildingSetup, test_set: ScenarioSet,
              specs: list[ControllerSpec] | None = None, out_dir: str | Path | None = None,
              train_times: dict[str, float] | None = None) -> SuiteOutcome:
    if test_set.program != cfg.program:
        raise ConfigurationError(f"test set is {test_set.program.value}, config asks for {cfg.program.value}")
    specs = controller_specs(cfg) if specs is None else specs
    if not specs:
        raise ConfigurationError("no controllers to evaluate")
    tasks = [(spec, scenario, test_set.is_out_of_distribution(scenario))
             for scenario in test_set for spec in specs]
    logger.info("evaluating %d controllers on %d %s days (%d workers)",
                len(specs), len(test_set), cfg.program.value, cfg.workers)

    evaluate = partial(evaluate_one, setup=setup)
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.workers, len(tasks))) as pool:
            results = list(pool.map(evaluate, tasks))
    else:
        results = [evaluate(task) for task in tasks]
    results.sort(key=lambda r: (r.scenario, r.controller))

    for scenario, controller in reference_violations(results):
        logger.warning("%s beat OPT on %s; the OPT solve is a local optimum there", controller, scenario)

    metrics = compute_metrics(results, train_times)
    outcome = SuiteOutcome(results, metrics)
    if out_dir is not None:
        outcome.out_dir = write_suite(outcome, cfg, test_set, specs, out_dir)
    if outcome.failures:
        logger.error("%d of %d evaluations failed", outcome.failures, len(results))
    return outcome


def write_suite(outcome: SuiteOutcome, cfg: "ExperimentConfig", test_set: ScenarioSet,
                specs: list[ControllerSpec], out_dir: str | Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results_frame(outcome.results).to_csv(out_dir / "results.csv", index=False)
    outcome.metrics.cost_frame().to_csv(out_dir / "metrics.csv")
    pd.DataFrame([r.timing_row() for r in outcome.results], columns=TIMING_COLUMNS).to_csv(
        out_dir / "timing.csv", index=False)
    outcome.metrics.timing_frame().to_csv(out_dir / "timing_summary.csv")
    write_run_manifest(out_dir / "manifest.json", {
        "program": cfg.program.value,
        "global_seed": cfg.global_seed,
        "scenario_labels": test_set.labels,
        "scenario_seeds": [s.seed for s in test_set],
        "reference_peak": test_set.reference_peak,
        "controllers": [s.name for s in specs],
        "failures": outcome.failures,
    })
    logger.info("wrote suite results to %s", out_dir)
    return out_dir
