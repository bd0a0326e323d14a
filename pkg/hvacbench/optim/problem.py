"""
Finite-horizon trajectory problems solved by single shooting.

States are unconstrained, so the problem is a function of the action
sequence alone: forward-simulate from the initial temperatures, add up the
stage costs and an optional linear terminal cost theta^T x_H. Gradients come
from one backward (adjoint) sweep through the plant's vector-Jacobian product.

Action sequences are (H, z+1) arrays of flat actions [mdot..., T_supply].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hvacbench.errors import ConfigurationError, NonFiniteStateError
from hvacbench.scenarios.generator import DayScenario
from hvacbench.scenarios.tariffs import (
    PcTariff,
    limit_series,
    planning_price_series,
    price_series,
)
from hvacbench.thermal.cost import CostParams, band_deviation, band_deviation_grad
from hvacbench.thermal.model import ActionBounds
from hvacbench.thermal.plant import Plant, plant_power, plant_power_grad


@dataclass(frozen=True)
class TrajectoryProblem:
    plant: Plant
    x0: np.ndarray                   # zone temperatures at the first step
    w: np.ndarray                    # (H, z+1)
    prices: np.ndarray               # (H,)
    comfort_lower: np.ndarray        # (H,)
    comfort_upper: np.ndarray        # (H,)
    bounds: ActionBounds
    cost: CostParams
    limits: np.ndarray | None = None  # (H,) kW, PC only
    terminal: np.ndarray | None = None  # theta, applied to x_H = state_map @ T_H

    def __post_init__(self):
        H, z = self.horizon, self.plant.z
        if H < 1:
            raise ConfigurationError("a trajectory problem needs at least one step")
        if self.x0.shape != (z,) or self.w.shape != (H, z + 1):
            raise ConfigurationError("initial state or disturbance sequence has the wrong shape")
        for name in ("prices", "comfort_lower", "comfort_upper", "limits"):
            value = getattr(self, name)
            if value is not None and value.shape != (H,):
                raise ConfigurationError(f"{name} must have length {H}")
        if self.terminal is not None and self.terminal.shape != (z,):
            raise ConfigurationError(f"terminal cost must have {z} entries")
        if self.bounds.z != z:
            raise ConfigurationError("action bounds do not match the plant's zone count")

    @property
    def horizon(self) -> int:
        return self.w.shape[0]

    @property
    def action_size(self) -> int:
        return self.plant.z + 1

    def check_actions(self, u_seq: np.ndarray) -> np.ndarray:
        u_seq = np.asarray(u_seq, dtype=float)
        if u_seq.shape != (self.horizon, self.action_size):
            raise ConfigurationError(f"action sequence has shape {u_seq.shape}, "
                                     f"expected {(self.horizon, self.action_size)}")
        return u_seq


@dataclass(frozen=True)
class CostBreakdown:
    energy: float
    comfort: float
    power_limit: float
    terminal: float
    energy_kwh: float
    peak_power: float

    @property
    def total(self) -> float:
        return self.energy + self.comfort + self.power_limit + self.terminal


def stage_cost(plant: Plant, cost: CostParams, k: int, price: float, lo: float, hi: float,
               limit: float | None, T: np.ndarray, u: np.ndarray,
               t_out: float) -> tuple[float, float, float, float]:
    """(energy, comfort, power-limit, power) for one step of the plant's cost model."""
    power = plant_power(plant, k, u, t_out)
    energy = price * power * cost.tau
    comfort = cost.mu * float(np.sum(band_deviation(T, lo, hi)))
    over = cost.nu * float(band_deviation(power, 0.0, limit)) if limit is not None else 0.0
    return energy, comfort, over, power


def stage_cost_grad(plant: Plant, cost: CostParams, k: int, price: float, lo: float, hi: float,
                    limit: float | None, T: np.ndarray, u: np.ndarray,
                    t_out: float) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of one step's total cost with respect to (T, u)."""
    d_power = price * cost.tau
    if limit is not None:
        d_power += cost.nu * float(band_deviation_grad(plant_power(plant, k, u, t_out), 0.0, limit))
    d_u = d_power * plant_power_grad(plant, k, u, t_out)
    d_T = cost.mu * band_deviation_grad(T, lo, hi)
    return d_T, d_u


def _limit(p: TrajectoryProblem, k: int) -> float | None:
    return None if p.limits is None else float(p.limits[k])


def simulate_states(p: TrajectoryProblem, u_seq: np.ndarray) -> np.ndarray:
    u_seq = p.check_actions(u_seq)
    states = np.empty((p.horizon + 1, p.plant.z))
    states[0] = p.x0
    for k in range(p.horizon):
        states[k + 1] = p.plant.step(k, states[k], u_seq[k], p.w[k])
    if not np.all(np.isfinite(states)):
        raise NonFiniteStateError("rollout produced non-finite temperatures")
    return states


def rollout_breakdown(p: TrajectoryProblem, u_seq: np.ndarray) -> tuple[CostBreakdown, np.ndarray]:
    states = simulate_states(p, u_seq)
    energy = comfort = over = kwh = 0.0
    peak = -np.inf
    for k in range(p.horizon):
        e, c, o, power = stage_cost(p.plant, p.cost, k, float(p.prices[k]), float(p.comfort_lower[k]),
                                    float(p.comfort_upper[k]), _limit(p, k), states[k], u_seq[k],
                                    float(p.w[k, 0]))
        energy += e
        comfort += c
        over += o
        kwh += power * p.cost.tau
        peak = max(peak, power)
    terminal = 0.0
    if p.terminal is not None:
        terminal = float(p.terminal @ (p.plant.model.state_map @ states[-1]))
    breakdown = CostBreakdown(energy, comfort, over, terminal, kwh, float(peak))
    if not np.isfinite(breakdown.total):
        raise NonFiniteStateError("rollout cost is not finite")
    return breakdown, states


def rollout_cost(p: TrajectoryProblem, u_seq: np.ndarray) -> tuple[float, np.ndarray]:
    breakdown, states = rollout_breakdown(p, u_seq)
    return breakdown.total, states


def rollout_grad(p: TrajectoryProblem, u_seq: np.ndarray,
                 states: np.ndarray | None = None) -> np.ndarray:
    u_seq = p.check_actions(u_seq)
    if states is None:
        states = simulate_states(p, u_seq)
    grad = np.empty_like(u_seq)
    lam = np.zeros(p.plant.z)
    if p.terminal is not None:
        lam = p.plant.model.state_map.T @ p.terminal
    for k in range(p.horizon - 1, -1, -1):
        T, u = states[k], u_seq[k]
        d_T_next, d_u = p.plant.vjp(k, T, u, lam)
        c_T, c_u = stage_cost_grad(p.plant, p.cost, k, float(p.prices[k]), float(p.comfort_lower[k]),
                                   float(p.comfort_upper[k]), _limit(p, k), T, u, float(p.w[k, 0]))
        grad[k] = d_u + c_u
        lam = d_T_next + c_T
    return grad


def problem_from_scenario(scenario: DayScenario, plant: Plant, bounds: ActionBounds,
                          cost: CostParams, t: int, horizon: int, T0: np.ndarray,
                          terminal: np.ndarray | None = None,
                          realized_prices: bool = False) -> TrajectoryProblem:
    """
    Planning problem over steps [t, t + horizon) of a day. Under RTP the
    planner sees the day-ahead forecast unless `realized_prices` is set.
    """
    end = t + horizon
    if not 0 <= t < end <= scenario.steps:
        raise ConfigurationError(f"window [{t}, {end}) does not fit in a {scenario.steps}-step day")
    tariff = scenario.tariff
    prices = price_series(tariff) if realized_prices else planning_price_series(tariff)
    limits = limit_series(tariff)
    if isinstance(tariff, PcTariff):
        cost = cost.model_copy(update={"nu": tariff.nu})
    return TrajectoryProblem(
        plant=plant,
        x0=np.asarray(T0, dtype=float),
        w=np.asarray(scenario.w[t:end]),
        prices=np.asarray(prices[t:end], dtype=float),
        comfort_lower=np.asarray(scenario.comfort.lower[t:end]),
        comfort_upper=np.asarray(scenario.comfort.upper[t:end]),
        bounds=bounds,
        cost=cost,
        limits=None if limits is None else np.asarray(limits[t:end], dtype=float),
        terminal=None if terminal is None else np.asarray(terminal, dtype=float),
    )
