"""
Command-line entry point.

    gen-scenarios   generate and store the train/test day sets
    tune-rbc        grid-search the rule-based controller on training days
    train           train a DPC policy, an RLC actor/critic or an MPC-CL table
    evaluate        run every configured controller on every test day
    report          metrics, hottest-day and convergence tables from stored results

Exit codes: 0 success, 1 partial failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import pandas as pd

from hvacbench.controllers.base import ControllerKind, save_terminal_table
from hvacbench.controllers.rbc import rbc_grid_search
from hvacbench.errors import ConfigurationError, HvacBenchError
from hvacbench.harness.reports import export_traces, hottest_day_report
from hvacbench.harness.suite import (
    artifact_path,
    compute_metrics,
    controller_specs,
    load_results,
    manifest_path,
    rbc_artifact_path,
    run_suite,
    train_wall_times,
)
from hvacbench.log import setup_logging
from hvacbench.nn.mlp import save_mlp
from hvacbench.scenarios.generator import ScenarioSet, split_train_test
from hvacbench.scenarios.storage import load_scenario_set, save_scenario_set
from hvacbench.scenarios.tariffs import ProgramKind
from hvacbench.settings import ExperimentConfig, load_building_config, load_experiment_config
from hvacbench.training.curves import episodes_to_convergence, load_curve, save_curve, write_run_manifest
from hvacbench.training.dpc import train_dpc
from hvacbench.training.mpccl import train_mpc_cl
from hvacbench.training.ppo import train_rlc

logger = logging.getLogger(__name__)

METHODS = {"dpc": ControllerKind.DPC, "rlc": ControllerKind.RLC, "mpccl": ControllerKind.MPC_CL}
TRAIN_SUB_SEEDS = {
    "dpc": ["dpc-init", "dpc-batches"],
    "rlc": ["rlc-actor", "rlc-critic", "ppo"],
    "mpccl": ["mpccl-batches"],
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hvacbench", description="HVAC demand-response control benchmark")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    parser.add_argument("--config", default=None, help="experiment config (YAML or JSON)")
    parser.add_argument("--building", default=None, help="building config (YAML or JSON)")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-scenarios", help="generate train/test day sets")
    gen.add_argument("--program", choices=[p.value for p in ProgramKind])

    tune = sub.add_parser("tune-rbc", help="grid-search the rule-based controller")
    tune.add_argument("--program", choices=[p.value for p in ProgramKind])

    train = sub.add_parser("train", help="train a learned controller")
    train.add_argument("--method", choices=sorted(METHODS), required=True)
    train.add_argument("--program", choices=[p.value for p in ProgramKind])
    train.add_argument("--lookahead", type=int, default=None)
    train.add_argument("--lr", type=float, default=None)
    train.add_argument("--seed", type=int, default=None)
    train.add_argument("--epochs", type=int, default=None, help="epochs (PPO iterations for rlc)")

    evaluate = sub.add_parser("evaluate", help="evaluate every configured controller")
    evaluate.add_argument("--config", dest="eval_config", default=None)
    evaluate.add_argument("--program", choices=[p.value for p in ProgramKind])

    report = sub.add_parser("report", help="summary tables from stored results")
    report.add_argument("--out", required=True)
    report.add_argument("--program", choices=[p.value for p in ProgramKind])
    return parser


def _with_program(cfg: ExperimentConfig, program: str | None) -> ExperimentConfig:
    return cfg if program is None else cfg.model_copy(update={"program": ProgramKind(program)})


def scenario_dir(cfg: ExperimentConfig, split: str) -> Path:
    return cfg.program_dir(cfg.scenario_dir) / split


def run_dir(cfg: ExperimentConfig) -> Path:
    return cfg.program_dir(cfg.output_dir)


def load_split(cfg: ExperimentConfig, split: str) -> ScenarioSet:
    scenarios = load_scenario_set(scenario_dir(cfg, split))
    if scenarios.program != cfg.program:
        raise ConfigurationError(f"{split} scenarios are {scenarios.program.value}, expected {cfg.program.value}")
    return scenarios


def cmd_gen_scenarios(cfg: ExperimentConfig, building) -> int:
    print(f"🌤️  Generating {cfg.train_days}+{cfg.test_days} {cfg.program.value} days")
    train, test = split_train_test(cfg.seeds(), cfg.hot_day_fraction, building.climate, cfg.program,
                                   building.day_settings(), n_train=cfg.train_days)
    save_scenario_set(scenario_dir(cfg, "train"), train)
    save_scenario_set(scenario_dir(cfg, "test"), test)
    print(f"✅ Scenarios written to {cfg.program_dir(cfg.scenario_dir)} "
          f"({len(test.hot_labels)} hot test days, train peak {train.reference_peak:.1f} C)")
    return 0


def cmd_tune_rbc(cfg: ExperimentConfig, building) -> int:
    if not cfg.rbc_grid:
        raise ConfigurationError("experiment config has an empty rbc_grid")
    setup = building.setup()
    train = load_split(cfg, "train")
    print(f"🔍 RBC grid search on {len(train)} {cfg.program.value} training days")
    best, table = rbc_grid_search(train, setup, cfg.rbc_grid, base=cfg.rbc)
    path = rbc_artifact_path(cfg)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(best.model_dump_json(indent=2))
    frame = pd.DataFrame([{**c.model_dump(), "mean_cost": cost} for c, cost in table])
    frame.to_csv(path.with_name("rbc_grid.csv"), index=False)
    print(f"✅ Best RBC saved to {path}")
    return 0


def cmd_train(cfg: ExperimentConfig, building, args) -> int:
    method = args.method
    kind = METHODS[method]
    run_cfg = getattr(cfg.training, method)
    updates = {"hidden": cfg.hidden_sizes(), "workers": cfg.workers,
               "seed": cfg.global_seed if args.seed is None else args.seed}
    for name in ("lookahead", "lr", "epochs"):
        if getattr(args, name) is not None:
            updates[name] = getattr(args, name)
    run_cfg = run_cfg.model_copy(update=updates)
    ppo = cfg.ppo.model_copy(update={"lr": run_cfg.lr, **({"iterations": args.epochs} if args.epochs else {})})

    setup = building.setup()
    train = list(load_split(cfg, "train"))
    artifact = artifact_path(cfg, kind, run_cfg.lookahead)
    print(f"🧠 Training {kind.value} K={run_cfg.lookahead} on {len(train)} {cfg.program.value} days "
          f"(lr {run_cfg.lr:g}, seed {run_cfg.seed})")

    start = time.perf_counter()
    extra = {}
    if method == "dpc":
        params, curve = train_dpc(train, setup, run_cfg)
        save_mlp(artifact, params, kind=kind.value, lookahead=run_cfg.lookahead, program=cfg.program.value)
    elif method == "rlc":
        actor, critic, curve = train_rlc(train, setup, run_cfg, ppo)
        save_mlp(artifact, actor, kind=kind.value, lookahead=run_cfg.lookahead, program=cfg.program.value)
        critic_path = artifact.with_name(f"{artifact.stem}-critic.json")
        save_mlp(critic_path, critic, kind="critic", lookahead=run_cfg.lookahead, program=cfg.program.value)
        extra["ppo"] = ppo.model_dump()
    else:
        table, curve = train_mpc_cl(train, setup, run_cfg, solver=cfg.solver)
        save_terminal_table(artifact, table, lookahead=run_cfg.lookahead, program=cfg.program.value)
    wall = time.perf_counter() - start

    curve_path = save_curve(run_dir(cfg) / "curves" / f"{method}-K{run_cfg.lookahead}.csv", curve)
    write_run_manifest(manifest_path(artifact), {
        "method": method,
        "program": cfg.program.value,
        "train": run_cfg.model_dump(),
        "sub_seeds": TRAIN_SUB_SEEDS[method],
        "train_wall_time": wall,
        "episodes": curve.episodes[-1] if len(curve) else 0,
        "episodes_to_convergence": episodes_to_convergence(curve),
        "curve": str(curve_path),
        **extra,
    })
    print(f"✅ {kind.value} saved to {artifact} after {wall:.1f} s; curve in {curve_path}")
    return 0


def cmd_evaluate(cfg: ExperimentConfig, building) -> int:
    setup = building.setup()
    test = load_split(cfg, "test")
    specs = controller_specs(cfg)
    print(f"🏁 Evaluating {len(specs)} controllers on {len(test)} {cfg.program.value} test days")
    outcome = run_suite(cfg, setup, test, specs, out_dir=run_dir(cfg), train_times=train_wall_times(cfg, specs))

    report = hottest_day_report(outcome.results, test)
    report.write(run_dir(cfg))
    if cfg.export_traces:
        export_traces(outcome.results, report.label, run_dir(cfg) / "traces")

    print(outcome.metrics.cost_frame()[["mean_cost", "relative_error_pct"]].to_string())
    if outcome.exit_code:
        print(f"⚠️ {outcome.failures} evaluations failed; see logs")
    else:
        print(f"✅ Results written to {outcome.out_dir}")
    return outcome.exit_code


def cmd_report(cfg: ExperimentConfig, out: str) -> int:
    results = load_results(run_dir(cfg))
    test = load_split(cfg, "test")
    try:
        train_times = train_wall_times(cfg, controller_specs(cfg))
    except ConfigurationError as e:
        logger.warning("training times unavailable: %s", e)
        train_times = {}
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics = compute_metrics(results, train_times)
    metrics.cost_frame().to_csv(out_dir / "metrics.csv")
    metrics.timing_frame().to_csv(out_dir / "timing_summary.csv")
    hottest_day_report(results, test).write(out_dir)

    rows = []
    for path in sorted((run_dir(cfg) / "curves").glob("*.csv")):
        curve = load_curve(path)
        rows.append({"run": path.stem, "episodes": curve.episodes[-1], "final_cost": curve.final_cost,
                     "episodes_to_convergence": episodes_to_convergence(curve)})
    pd.DataFrame(rows, columns=["run", "episodes", "final_cost", "episodes_to_convergence"]).to_csv(
        out_dir / "convergence.csv", index=False)
    print(f"📊 Report written to {out_dir}")
    return 1 if any(not r.ok for r in results) else 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(verbose=True if args.verbose else None)
    print("🚀 hvacbench")
    print("=" * 40)
    try:
        config_path = getattr(args, "eval_config", None) or args.config
        cfg = _with_program(load_experiment_config(config_path), getattr(args, "program", None))
        building = load_building_config(args.building)
        if args.command == "gen-scenarios":
            return cmd_gen_scenarios(cfg, building)
        if args.command == "tune-rbc":
            return cmd_tune_rbc(cfg, building)
        if args.command == "train":
            return cmd_train(cfg, building, args)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, building)
        return cmd_report(cfg, args.out)
    except ConfigurationError as e:
        logger.error(f"Configuration error: {e}")
        print(f"❌ {e}")
        return 2
    except HvacBenchError as e:
        logger.error(f"Run failed: {e}")
        print(f"💥 {e}")
        return 1
    except KeyboardInterrupt:
        print("🛑 Stopped by user")
        return 1


if __name__ == "__main__":
    sys.exit(main())
