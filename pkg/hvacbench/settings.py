"""
YAML configuration with environment overrides.

`hvacbench/config/building.yaml` describes the plant, cost weights and
scenario generator; `hvacbench/config/experiment.yaml` the controllers,
solver budgets, training presets and seeds. Environment variables (a `.env`
file is honoured) override the output directory and worker count.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from hvacbench.controllers.base import ControllerKind
from hvacbench.controllers.rbc import RbcConfig
from hvacbench.errors import ConfigurationError
from hvacbench.optim.solver import SolverOptions
from hvacbench.scenarios.generator import ClimateConfig, ComfortConfig, DaySettings, TariffConfig
from hvacbench.scenarios.tariffs import HorizonConfig, ProgramKind
from hvacbench.seeding import sub_seed
from hvacbench.thermal.cost import CostParams, PowerParams
from hvacbench.thermal.model import ActionBounds, default_building, load_building
from hvacbench.thermal.setup import BuildingSetup
from hvacbench.training.common import TrainRunConfig
from hvacbench.training.ppo import PpoConfig

load_dotenv()

CONFIG_DIR = Path(__file__).parent / "config"
BUILDING_CONFIG = CONFIG_DIR / "building.yaml"
EXPERIMENT_CONFIG = CONFIG_DIR / "experiment.yaml"
DEFAULT_BUILDING_FILE = "building_default.json"


def load_mapping(path: str | Path) -> dict:
    """Read a YAML or JSON file into a dict."""
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    with open(path, 'r') as f:
        data = json.load(f) if path.suffix == ".json" else yaml.safe_load(f)
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path} does not contain a mapping")
    return data


class BoundsConfig(BaseModel):
    mdot_lo: list[float]
    mdot_hi: list[float]
    tsupply_lo: float
    tsupply_hi: float

    def to_bounds(self) -> ActionBounds:
        return ActionBounds(self.mdot_lo, self.mdot_hi, self.tsupply_lo, self.tsupply_hi)


class BuildingConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    building_file: str = DEFAULT_BUILDING_FILE
    bounds: BoundsConfig | None = None
    power: PowerParams = PowerParams()
    cost: CostParams = CostParams()
    horizon: HorizonConfig = HorizonConfig()
    comfort: ComfortConfig = ComfortConfig()
    tariffs: TariffConfig = TariffConfig()
    climate: ClimateConfig = ClimateConfig()

    @model_validator(mode="after")
    def _step_length(self):
        if abs(self.cost.tau - self.horizon.tau) > 1e-12:
            raise ValueError("cost.tau and horizon.tau must agree")
        return self

    def day_settings(self) -> DaySettings:
        return DaySettings(horizon=self.horizon, comfort=self.comfort, tariffs=self.tariffs)

    def setup(self) -> BuildingSetup:
        if self.building_file == DEFAULT_BUILDING_FILE:
            model, bounds = default_building()
        else:
            model, bounds = load_building(self.building_file)
        if self.bounds is not None:
            bounds = self.bounds.to_bounds()
        if bounds.z != model.z or self.climate.zones != model.z:
            raise ConfigurationError("bounds, climate zone weights and building disagree on zone count")
        return BuildingSetup(model=model, bounds=bounds, power=self.power, cost=self.cost)


class ControllerEntry(BaseModel):
    kind: ControllerKind
    lookaheads: list[int] = Field(default_factory=list)

    @model_validator(mode="after")
    def _lookaheads(self):
        if self.kind.has_lookahead and not self.lookaheads:
            raise ValueError(f"{self.kind.value} needs at least one lookahead")
        if any(k < 1 for k in self.lookaheads):
            raise ValueError("lookaheads must be positive")
        return self


class TrainingPresets(BaseModel):
    dpc: TrainRunConfig = TrainRunConfig()
    mpccl: TrainRunConfig = TrainRunConfig(lr=1.0, epochs=10)
    rlc: TrainRunConfig = TrainRunConfig(lr=5e-5)


class ExperimentConfig(BaseModel):
    program: ProgramKind = ProgramKind.TOU
    global_seed: int = 2023
    train_days: int = Field(31, ge=1)
    test_days: int = Field(31, ge=1)
    hot_day_fraction: float = Field(0.1, ge=0, le=1)
    scenario_seeds: list[int] | None = None
    scenario_dir: str = "scenarios"
    artifact_dir: str = "artifacts"
    output_dir: str = "runs"
    workers: int = Field(1, ge=1)
    export_traces: bool = True
    controllers: list[ControllerEntry] = Field(default_factory=lambda: [ControllerEntry(kind="OPT")])
    solver: SolverOptions = SolverOptions()
    opt_solver: SolverOptions = SolverOptions(max_iters=5000)
    rbc: RbcConfig = RbcConfig()
    rbc_grid: dict[str, list[float]] = Field(default_factory=dict)
    training: TrainingPresets = TrainingPresets()
    ppo: PpoConfig = PpoConfig()
    networks: dict[str, list[int]] = Field(default_factory=lambda: {"tou": [512, 512], "rtp": [512, 512],
                                                                     "pc": [32, 32]})

    def seeds(self) -> list[int]:
        """Scenario seeds, train days first; derived from the global seed unless given."""
        n = self.train_days + self.test_days
        if self.scenario_seeds is not None:
            if len(self.scenario_seeds) != n:
                raise ConfigurationError(f"expected {n} scenario seeds, got {len(self.scenario_seeds)}")
            return list(self.scenario_seeds)
        return [sub_seed(self.global_seed, f"scenario-{i}") % 100_000 for i in range(n)]

    def hidden_sizes(self) -> tuple[int, ...]:
        return tuple(self.networks.get(self.program.value, [512, 512]))

    def program_dir(self, root: str) -> Path:
        return Path(root) / self.program.value


def _validated(model, data: dict, source: str):
    try:
        return model.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(f"invalid configuration in {source}: {e}") from e


def load_building_config(path: str | Path | None = None) -> BuildingConfig:
    path = Path(path or BUILDING_CONFIG)
    raw = load_mapping(path)
    building = raw.pop("building", {}) or {}
    if "default_file" in building:
        raw["building_file"] = building["default_file"]
    return _validated(BuildingConfig, raw, str(path))


def load_experiment_config(path: str | Path | None = None) -> ExperimentConfig:
    path = Path(path or EXPERIMENT_CONFIG)
    raw = load_mapping(path)
    data = {**(raw.pop("experiment", {}) or {}), **raw}

    output_dir = os.getenv("HVACBENCH_OUTPUT_DIR")
    if output_dir:
        data["output_dir"] = output_dir
    workers = os.getenv("HVACBENCH_WORKERS")
    if workers:
        try:
            data["workers"] = int(workers)
        except ValueError as e:
            raise ConfigurationError(f"HVACBENCH_WORKERS must be an integer, got {workers!r}") from e
    return _validated(ExperimentConfig, data, str(path))
