"""
Closed-loop episode runner.

Every controller, during evaluation, RBC tuning or training, is driven
through the same exact bilinear plant and billed with the realised price.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np
import pandas as pd

from hvacbench.errors import HvacBenchError, NonFiniteStateError
from hvacbench.scenarios.generator import DayScenario
from hvacbench.scenarios.tariffs import limit_series, price_series, step_hour
from hvacbench.thermal.cost import band_deviation, total_power
from hvacbench.thermal.model import ControlAction, step_dynamics
from hvacbench.thermal.setup import BuildingSetup

logger = logging.getLogger(__name__)


class EpisodeController(Protocol):
    name: str

    def reset(self, scenario: DayScenario, T0: np.ndarray) -> None: ...

    def act(self, T: np.ndarray, scenario: DayScenario, t: int) -> ControlAction: ...


@dataclass
class EpisodeResult:
    label: str
    controller: str
    energy: float
    comfort: float
    power_limit: float
    energy_kwh: float
    peak_power: float
    step_times: np.ndarray
    temps: np.ndarray            # (N+1, z)
    actions: np.ndarray          # (N, z+1)
    chiller: np.ndarray
    fan: np.ndarray
    prices: np.ndarray
    limits: np.ndarray           # NaN outside PC
    comfort_lower: np.ndarray
    comfort_upper: np.ndarray
    step_costs: np.ndarray
    notes: list[str] = field(default_factory=list)

    @property
    def total(self) -> float:
        return self.energy + self.comfort + self.power_limit

    @property
    def steps(self) -> int:
        return self.actions.shape[0]

    @property
    def mean_step_time(self) -> float:
        return float(self.step_times.mean())

    @property
    def online_time(self) -> float:
        return float(self.step_times.sum())

    def trace_frame(self) -> pd.DataFrame:
        z = self.temps.shape[1]
        hours = step_hour(np.arange(self.steps), self.steps)
        clock = [f"{int(h):02d}:{int(round((h % 1) * 60)):02d}" for h in hours]
        frame = pd.DataFrame({"step": np.arange(self.steps), "clock": clock})
        for i in range(z):
            frame[f"T_{i}"] = self.temps[:-1, i]
        for i in range(z):
            frame[f"mdot_{i}"] = self.actions[:, i]
        frame["t_supply"] = self.actions[:, -1]
        frame["p_fan"] = self.fan
        frame["p_chiller"] = self.chiller
        frame["p_total"] = self.fan + self.chiller
        frame["price"] = self.prices
        frame["limit"] = self.limits
        frame["comfort_lower"] = self.comfort_lower
        frame["comfort_upper"] = self.comfort_upper
        frame["cost"] = self.step_costs
        return frame


def run_episode(controller: EpisodeController, scenario: DayScenario,
                setup: BuildingSetup) -> EpisodeResult:
    steps, z = scenario.steps, setup.z
    cost = setup.cost_for(scenario.tariff)
    prices = price_series(scenario.tariff)
    limits = limit_series(scenario.tariff)
    lower, upper = scenario.comfort.lower, scenario.comfort.upper

    temps = np.empty((steps + 1, z))
    temps[0] = scenario.initial_temps
    actions = np.empty((steps, z + 1))
    chiller = np.empty(steps)
    fan = np.empty(steps)
    step_costs = np.empty(steps)
    step_times = np.empty(steps)
    energy = comfort = over = 0.0

    controller.reset(scenario, temps[0].copy())
    for t in range(steps):
        T = temps[t]
        start = time.perf_counter()
        u = controller.act(T.copy(), scenario, t)
        step_times[t] = time.perf_counter() - start
        if not setup.bounds.contains(u.as_vector(), atol=1e-9):
            raise HvacBenchError(f"{controller.name} returned an action outside the box at step {t}")

        w = scenario.exogenous(t)
        power = total_power(setup.power, u, w.t_out)
        e = prices[t] * power.total * cost.tau
        c = cost.mu * float(np.sum(band_deviation(T, lower[t], upper[t])))
        o = 0.0 if limits is None else cost.nu * float(band_deviation(power.total, 0.0, limits[t]))
        energy, comfort, over = energy + e, comfort + c, over + o

        actions[t] = u.as_vector()
        chiller[t], fan[t] = power.chiller, power.fan
        step_costs[t] = e + c + o
        temps[t + 1] = step_dynamics(setup.model, T, u, w)
        if not np.all(np.isfinite(temps[t + 1])):
            raise NonFiniteStateError(f"{scenario.label}: temperatures diverged at step {t}")

    total_kw = chiller + fan
    return EpisodeResult(
        label=scenario.label,
        controller=controller.name,
        energy=energy,
        comfort=comfort,
        power_limit=over,
        energy_kwh=float(np.sum(total_kw) * cost.tau),
        peak_power=float(np.max(total_kw)),
        step_times=step_times,
        temps=temps,
        actions=actions,
        chiller=chiller,
        fan=fan,
        prices=np.asarray(prices, dtype=float),
        limits=np.full(steps, np.nan) if limits is None else np.asarray(limits, dtype=float),
        comfort_lower=np.asarray(lower),
        comfort_upper=np.asarray(upper),
        step_costs=step_costs,
        notes=list(getattr(controller, "notes", [])),
    )
