"""Run configuration and helpers shared by the trainers."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, TypeVar

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from hvacbench.controllers.rbc import RbcConfig, RbcController
from hvacbench.errors import ConfigurationError
from hvacbench.harness.simulate import run_episode
from hvacbench.nn.mlp import MlpParams, fit_input_normalization, init_mlp
from hvacbench.scenarios.generator import DayScenario
from hvacbench.scenarios.observation import make_observation, observation_size
from hvacbench.thermal.setup import BuildingSetup

T = TypeVar("T")
R = TypeVar("R")


class TrainRunConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    lookahead: int = Field(3, ge=1)
    batch_size: int = Field(4, ge=1)
    epochs: int = Field(300, ge=1)
    lr: float = Field(1e-3, ge=0)
    seed: int = 0
    rho: float = Field(1.0, ge=0)
    eval_every: int = Field(5, ge=1)
    eval_days: int = Field(4, ge=1)
    hidden: tuple[int, ...] = (512, 512)
    workers: int = Field(1, ge=1)

    def check_scenarios(self, scenarios) -> list[DayScenario]:
        scenarios = list(scenarios)
        if not scenarios:
            raise ConfigurationError("training needs at least one scenario")
        if self.batch_size > len(scenarios):
            raise ConfigurationError(f"batch size {self.batch_size} exceeds {len(scenarios)} scenarios")
        return scenarios


def map_episodes(fn: Callable[[T], R], items: Iterable[T], workers: int = 1) -> list[R]:
    """Map over episodes, in a process pool when `workers` > 1; result order follows `items`."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


def observation_samples(scenarios, setup: BuildingSetup, lookahead: int,
                        max_days: int = 4) -> np.ndarray:
    """Observations along rule-based closed-loop days, used to fix input normalisation."""
    controller = RbcController(RbcConfig(), setup)
    rows = []
    for scenario in list(scenarios)[:max_days]:
        result = run_episode(controller, scenario, setup)
        for t in range(scenario.steps):
            rows.append(make_observation(result.temps[t], scenario, t, lookahead, setup.model.state_map))
    return np.asarray(rows)


def init_policy(scenarios, setup: BuildingSetup, lookahead: int, hidden, seed: int,
                output_dim: int | None = None, log_std: float | None = None,
                output_scale: float = 0.01) -> MlpParams:
    scenarios = list(scenarios)
    program = scenarios[0].program
    size = observation_size(setup.z, lookahead, program)
    params = init_mlp(size, list(hidden), output_dim or setup.z + 1, seed,
                      output_scale=output_scale, log_std=log_std)
    return fit_input_normalization(params, observation_samples(scenarios, setup, lookahead), min_scale=0.1)
