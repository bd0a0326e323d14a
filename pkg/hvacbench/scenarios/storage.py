"""
Columnar CSV bundle for scenario sets.

A set lives in one directory: `manifest.json` plus one CSV per series with a
row per step and a column per day label. Downstream stages only ever read
these files.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from hvacbench.errors import ConfigurationError
from hvacbench.scenarios.generator import DayScenario, ScenarioSet
from hvacbench.scenarios.tariffs import PcTariff, ProgramKind, RtpTariff, TouTariff
from hvacbench.thermal.cost import ComfortSchedule

logger = logging.getLogger(__name__)

MANIFEST_VERSION = 1
MANIFEST_FILE = "manifest.json"


def _write_series(directory: Path, name: str, columns: dict[str, np.ndarray]) -> None:
    frame = pd.DataFrame(columns)
    frame.index.name = "step"
    frame.to_csv(directory / f"{name}.csv")


def _read_series(directory: Path, name: str) -> pd.DataFrame:
    path = directory / f"{name}.csv"
    if not path.is_file():
        raise ConfigurationError(f"scenario bundle is missing {path.name}")
    return pd.read_csv(path, index_col="step", float_precision="round_trip")


def _tariff_params(scenario: DayScenario) -> dict:
    tariff = scenario.tariff
    if isinstance(tariff, TouTariff):
        return {"peak_price": tariff.peak_price, "offpeak_price": tariff.offpeak_price,
                "peak_window": list(tariff.peak_window)}
    if isinstance(tariff, PcTariff):
        return {"flat_price": tariff.flat_price, "limit_normal": tariff.limit_normal,
                "limit_event": tariff.limit_event, "event_window": list(tariff.event_window),
                "nu": tariff.nu}
    return {}


def save_scenario_set(directory: str | Path, scenario_set: ScenarioSet) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    scenarios = list(scenario_set)
    if not scenarios:
        raise ConfigurationError("refusing to write an empty scenario set")
    labels = [s.label for s in scenarios]
    z = scenarios[0].z

    _write_series(directory, "t_out", {s.label: s.t_out for s in scenarios})
    for i in range(z):
        _write_series(directory, f"q_solar_{i}", {s.label: s.q_solar[:, i] for s in scenarios})
    _write_series(directory, "comfort_lower", {s.label: s.comfort.lower for s in scenarios})
    _write_series(directory, "comfort_upper", {s.label: s.comfort.upper for s in scenarios})
    if scenario_set.program == ProgramKind.RTP:
        _write_series(directory, "rtp", {s.label: s.tariff.rtp for s in scenarios})
        _write_series(directory, "dap", {s.label: s.tariff.dap for s in scenarios})

    initial = pd.DataFrame({s.label: s.initial_temps for s in scenarios})
    initial.index.name = "zone"
    initial.to_csv(directory / "initial_temps.csv")

    manifest = {
        "version": MANIFEST_VERSION,
        "name": scenario_set.name,
        "program": scenario_set.program.value,
        "steps": scenarios[0].steps,
        "zones": z,
        "labels": labels,
        "seeds": [s.seed for s in scenarios],
        "reference_peak": scenario_set.reference_peak,
        "hot_labels": list(scenario_set.hot_labels),
        "tariff": _tariff_params(scenarios[0]),
    }
    (directory / MANIFEST_FILE).write_text(json.dumps(manifest, indent=2))
    logger.info("wrote %d %s scenarios to %s", len(scenarios), scenario_set.name, directory)
    return directory


def load_scenario_set(directory: str | Path) -> ScenarioSet:
    directory = Path(directory)
    manifest_path = directory / MANIFEST_FILE
    if not manifest_path.is_file():
        raise ConfigurationError(f"no scenario manifest at {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("version") != MANIFEST_VERSION:
        raise ConfigurationError(f"unsupported scenario manifest version {manifest.get('version')}")

    program = ProgramKind(manifest["program"])
    steps, z = int(manifest["steps"]), int(manifest["zones"])
    t_out = _read_series(directory, "t_out")
    solar = [_read_series(directory, f"q_solar_{i}") for i in range(z)]
    lower = _read_series(directory, "comfort_lower")
    upper = _read_series(directory, "comfort_upper")
    initial = pd.read_csv(directory / "initial_temps.csv", index_col="zone",
                          float_precision="round_trip")
    if program == ProgramKind.RTP:
        rtp = _read_series(directory, "rtp")
        dap = _read_series(directory, "dap")

    scenarios = []
    for label, seed in zip(manifest["labels"], manifest["seeds"]):
        if program == ProgramKind.TOU:
            tariff = TouTariff(steps=steps, **manifest["tariff"])
        elif program == ProgramKind.PC:
            tariff = PcTariff(steps=steps, **manifest["tariff"])
        else:
            tariff = RtpTariff(rtp=rtp[label].to_numpy(), dap=dap[label].to_numpy())
        w = np.column_stack([t_out[label].to_numpy()] + [s[label].to_numpy() for s in solar])
        scenarios.append(DayScenario(
            label=label,
            w=w,
            tariff=tariff,
            comfort=ComfortSchedule(lower=lower[label].to_numpy(), upper=upper[label].to_numpy()),
            initial_temps=initial[label].to_numpy(),
            seed=int(seed),
        ))

    return ScenarioSet(
        name=manifest["name"],
        program=program,
        scenarios=tuple(scenarios),
        reference_peak=float(manifest["reference_peak"]),
        hot_labels=tuple(manifest["hot_labels"]),
    )
