"""Per-day trace export and the hottest-day / out-of-distribution report."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from hvacbench.errors import ConfigurationError
from hvacbench.harness.suite import REFERENCE, RunResult
from hvacbench.scenarios.generator import ScenarioSet

logger = logging.getLogger(__name__)


def export_traces(results: list[RunResult], label: str, directory: str | Path) -> list[Path]:
    """One CSV per controller for day `label`, written under `directory/label/`."""
    day = [r for r in results if r.scenario == label]
    if not day:
        raise ConfigurationError(f"no results for scenario {label!r}")
    out = Path(directory) / label
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for result in day:
        if result.episode is None:
            logger.warning("no trace for %s on %s (%s)", result.controller, label, result.status)
            continue
        path = out / f"{result.controller}.csv"
        result.episode.trace_frame().to_csv(path, index=False)
        paths.append(path)
    return paths


@dataclass
class HottestDayReport:
    label: str
    mean_t_out: float
    costs: pd.DataFrame             # one row per controller on the hottest day
    flags: pd.DataFrame             # one row per test day
    ood_ratios: pd.DataFrame        # cost on the hottest OOD day over the median day

    def write(self, directory: str | Path) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        self.costs.to_csv(directory / "hottest_day_costs.csv", index=False)
        self.flags.to_csv(directory / "day_flags.csv", index=False)
        self.ood_ratios.to_csv(directory / "ood_ratios.csv", index=False)
        return directory


def day_flags(test_set: ScenarioSet) -> pd.DataFrame:
    return pd.DataFrame({
        "scenario": test_set.labels,
        "mean_t_out": [s.mean_t_out for s in test_set],
        "peak_t_out": [s.peak_t_out for s in test_set],
        "out_of_distribution": [test_set.is_out_of_distribution(s) for s in test_set],
    })


def hottest_day_report(results: list[RunResult], test_set: ScenarioSet) -> HottestDayReport:
    flags = day_flags(test_set)
    hottest = flags.loc[flags["mean_t_out"].idxmax()]
    label = str(hottest["scenario"])

    ood_days = flags[flags["out_of_distribution"]]
    pool = flags if ood_days.empty else ood_days
    hot_label = str(pool.loc[pool["mean_t_out"].idxmax(), "scenario"])

    cost_rows, ratio_rows = [], []
    for controller in sorted({r.controller for r in results}):
        mine = {r.scenario: r for r in results if r.controller == controller}
        day = mine.get(label)
        cost_rows.append({
            "controller": controller,
            "scenario": label,
            "status": day.status if day else "missing",
            "total": day.total if day else math.nan,
            "energy": day.energy if day else math.nan,
            "comfort": day.comfort if day else math.nan,
            "power_limit": day.power_limit if day else math.nan,
            "peak_power": day.peak_power if day else math.nan,
        })
        totals = [r.total for r in mine.values() if r.ok]
        median = float(np.median(totals)) if totals else math.nan
        hot_cost = mine[hot_label].total if hot_label in mine and mine[hot_label].ok else math.nan
        ratio_rows.append({
            "controller": controller,
            "scenario": hot_label,
            "cost": hot_cost,
            "median_cost": median,
            "ratio": hot_cost / median if median else math.nan,
        })

    ratios = pd.DataFrame(ratio_rows)
    if not ratios.empty and REFERENCE in set(ratios["controller"]):
        reference = float(ratios.loc[ratios["controller"] == REFERENCE, "ratio"].iloc[0])
        ratios["ratio_over_opt"] = ratios["ratio"] / reference
    logger.info("hottest test day %s (mean %.1f C); hottest OOD day %s", label, hottest["mean_t_out"],
                hot_label)
    return HottestDayReport(label, float(hottest["mean_t_out"]), pd.DataFrame(cost_rows), flags, ratios)
