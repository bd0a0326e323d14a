"""Shared fixtures: the default building, a tiny 2-zone building and 8-step (3 h) days."""

import os

import numpy as np
import pytest

from hvacbench.optim.problem import TrajectoryProblem
from hvacbench.scenarios.generator import ComfortConfig, DayScenario, comfort_schedule
from hvacbench.scenarios.tariffs import PcTariff, RtpTariff, TouTariff
from hvacbench.thermal.cost import CostParams
from hvacbench.thermal.linearize import linearize, nominal_operating_point
from hvacbench.thermal.model import ActionBounds, synth_building
from hvacbench.thermal.setup import BuildingSetup

TINY_STEPS = 8
TINY_TAU = 3.0


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long acceptance runs, enabled with HVACBENCH_RUN_SLOW=1")


def pytest_collection_modifyitems(config, items):
    if os.getenv("HVACBENCH_RUN_SLOW", "0") == "1":
        return
    skip = pytest.mark.skip(reason="set HVACBENCH_RUN_SLOW=1 to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(scope="session")
def default_setup():
    return BuildingSetup.default()


def tiny_building_setup(z: int = 2, seed: int = 3) -> BuildingSetup:
    return BuildingSetup(
        model=synth_building(seed, z=z),
        bounds=ActionBounds.uniform(z, 0.2, 2.0, 10.0, 16.0),
        cost=CostParams(tau=TINY_TAU),
    )


@pytest.fixture
def tiny_setup():
    return tiny_building_setup()


def make_day(program: str = "tou", z: int = 2, steps: int = TINY_STEPS, label: str = "day-0",
             seed: int = 0, heat: float = 0.0, initial: float = 23.0) -> DayScenario:
    """Hand-built day: warm afternoon, solar over daylight, default comfort band."""
    rng = np.random.default_rng(seed)
    hours = np.arange(steps) * 24.0 / steps
    t_out = 27.0 + heat + 5.0 * np.sin(np.pi * (hours - 9.0) / 12.0) + rng.normal(0.0, 0.3, steps)
    sun = np.clip(np.sin(np.pi * (hours - 6.0) / 14.0), 0.0, None)
    q_solar = sun[:, None] * np.linspace(0.4, 0.8, z)[None, :]
    if program == "tou":
        tariff = TouTariff(steps=steps)
    elif program == "pc":
        tariff = PcTariff(steps=steps)
    else:
        dap = 1.0 + 3.0 * np.exp(-((hours - 16.0) / 3.0) ** 2)
        tariff = RtpTariff(rtp=dap * (1.0 + 0.1 * rng.uniform(-1.0, 1.0, steps)), dap=dap)
    return DayScenario(
        label=label,
        w=np.column_stack((t_out, q_solar)),
        tariff=tariff,
        comfort=comfort_schedule(ComfortConfig(), steps),
        initial_temps=np.full(z, initial),
        seed=seed,
    )


@pytest.fixture
def tiny_day():
    return make_day("tou")


@pytest.fixture
def tiny_days():
    return [make_day("tou", label=f"day-{i}", seed=i, heat=0.5 * i) for i in range(4)]


def random_problem(seed: int, z: int = 2, horizon: int = 4, convex: bool = False,
                   pc: bool = False, terminal: bool = True) -> tuple[TrajectoryProblem, np.ndarray]:
    """Random small problem and an interior action sequence."""
    rng = np.random.default_rng(seed)
    setup = tiny_building_setup(z=z, seed=seed)
    bounds = setup.bounds
    x0 = rng.uniform(21.0, 27.0, z)
    w = np.column_stack((rng.uniform(25.0, 33.0, horizon), rng.uniform(0.0, 1.0, (horizon, z))))
    u_seq = bounds.lower + bounds.width * rng.uniform(0.1, 0.9, (horizon, z + 1))
    if convex:
        point = nominal_operating_point(setup.model, x0, bounds.midpoint, w)
        plant = linearize(setup.model, setup.power, point)
    else:
        plant = setup.plant
    problem = TrajectoryProblem(
        plant=plant,
        x0=x0,
        w=w,
        prices=rng.uniform(0.5, 2.0, horizon),
        comfort_lower=np.full(horizon, 22.0),
        comfort_upper=np.full(horizon, 24.0),
        bounds=bounds,
        cost=CostParams(tau=1.0),
        limits=np.full(horizon, 15.0) if pc else None,
        terminal=rng.normal(0.0, 2.0, z) if terminal else None,
    )
    return problem, u_seq


def minimum_power_plan(p: TrajectoryProblem) -> np.ndarray:
    """Every step at minimum flow and the warmest supply air."""
    low = np.append(p.bounds.mdot_lo, p.bounds.tsupply_hi)
    return np.tile(low, (p.horizon, 1))
