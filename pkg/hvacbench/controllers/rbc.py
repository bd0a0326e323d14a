"""
Rule-based pre-cooling.

Before the program's high-cost window (TOU peak, PC event, or the most
expensive day-ahead stretch under RTP) the building is cooled to a low
setpoint; during the window the setpoint is raised to the warm edge of
comfort; otherwise a baseline holds. Zone flow is proportional to the
setpoint error.
"""

from __future__ import annotations

import itertools
import logging

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from hvacbench.errors import ConfigurationError
from hvacbench.scenarios.generator import DayScenario
from hvacbench.scenarios.tariffs import high_cost_window, step_hour
from hvacbench.thermal.cost import ComfortSchedule
from hvacbench.thermal.model import ActionBounds, ControlAction
from hvacbench.thermal.setup import BuildingSetup

logger = logging.getLogger(__name__)


class RbcConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    precool_start: float = Field(8.0, ge=0, lt=24)
    precool_setpoint: float = 21.0
    event_setpoint: float = 24.0
    baseline_setpoint: float = 23.5
    gain: float = Field(1.0, gt=0)
    rtp_window_hours: int = Field(6, ge=1, le=24)

    @model_validator(mode="after")
    def _ordered(self):
        if self.precool_setpoint > self.event_setpoint:
            raise ValueError("precool setpoint must not exceed the event setpoint")
        return self

    def check_comfort(self, lower: float, upper: float) -> None:
        for name in ("precool_setpoint", "event_setpoint", "baseline_setpoint"):
            value = getattr(self, name)
            if not lower <= value <= upper:
                raise ConfigurationError(f"{name}={value} lies outside the comfort band [{lower}, {upper}]")

    def check_schedule(self, comfort: ComfortSchedule) -> None:
        """Every setpoint inside the tightest band of the day."""
        self.check_comfort(float(np.max(comfort.lower)), float(np.min(comfort.upper)))


def active_setpoint(cfg: RbcConfig, scenario: DayScenario, t: int) -> float:
    start, end = high_cost_window(scenario.tariff, cfg.rtp_window_hours)
    hour = float(step_hour(t, scenario.steps))
    if start <= hour < end:
        return cfg.event_setpoint
    if cfg.precool_start <= hour < start:
        return cfg.precool_setpoint
    return cfg.baseline_setpoint


def rbc_act(cfg: RbcConfig, bounds: ActionBounds, T: np.ndarray, scenario: DayScenario,
            t: int) -> ControlAction:
    setpoint = active_setpoint(cfg, scenario, t)
    error = np.maximum(0.0, np.asarray(T, dtype=float) - setpoint)
    mdot = np.clip(cfg.gain * error, bounds.mdot_lo, bounds.mdot_hi)
    t_supply = bounds.tsupply_lo if np.any(error > 0.0) else bounds.tsupply_hi
    return ControlAction(mdot=mdot, t_supply=float(t_supply))


class RbcController:
    def __init__(self, cfg: RbcConfig, setup: BuildingSetup, name: str = "RBC"):
        self.cfg = cfg
        self.bounds = setup.bounds
        self.name = name

    def reset(self, scenario: DayScenario, T0: np.ndarray) -> None:
        self.cfg.check_schedule(scenario.comfort)

    def act(self, T: np.ndarray, scenario: DayScenario, t: int) -> ControlAction:
        return rbc_act(self.cfg, self.bounds, T, scenario, t)


def rbc_grid_search(scenarios, setup: BuildingSetup, grid: dict[str, list],
                    base: RbcConfig | None = None) -> tuple[RbcConfig, list[tuple[RbcConfig, float]]]:
    """
    Exhaustive search over `grid` (field name -> candidate values) for the
    config with the lowest mean cost on `scenarios`. Candidates are visited in
    ascending precool start, and only a strictly lower cost replaces the
    incumbent, so ties go to the earliest pre-cooling.
    """
    from hvacbench.harness.simulate import run_episode

    base = base or RbcConfig()
    scenarios = list(scenarios)
    if not scenarios:
        raise ConfigurationError("RBC grid search needs at least one scenario")
    unknown = set(grid) - set(RbcConfig.model_fields)
    if unknown:
        raise ConfigurationError(f"unknown RBC grid fields: {sorted(unknown)}")

    names = sorted(grid, key=lambda n: (n != "precool_start", n))
    candidates = []
    for values in itertools.product(*(sorted(grid[n]) for n in names)):
        try:
            cfg = RbcConfig.model_validate({**base.model_dump(), **dict(zip(names, values))})
            for s in scenarios:
                cfg.check_schedule(s.comfort)
        except (ValueError, ConfigurationError) as e:
            logger.debug("skipping RBC candidate %s: %s", dict(zip(names, values)), e)
            continue
        candidates.append(cfg)
    if not candidates:
        raise ConfigurationError("RBC grid contains no valid configuration")

    best, best_cost, table = None, np.inf, []
    for cfg in candidates:
        controller = RbcController(cfg, setup)
        cost = float(np.mean([run_episode(controller, s, setup).total for s in scenarios]))
        table.append((cfg, cost))
        if cost < best_cost:
            best, best_cost = cfg, cost
    logger.info("RBC grid search: %d configs, best mean cost %.2f with %s",
                len(candidates), best_cost, best.model_dump())
    return best, table
