"""HVAC power, band-deviation penalty and per-step cost."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from hvacbench.errors import ConfigurationError
from hvacbench.thermal.model import ControlAction


class PowerParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    cop: float = Field(3.0, gt=0)
    k1: float = Field(0.0076, ge=0)
    k2: float = Field(4.8865, ge=0)


class CostParams(BaseModel):
    """mu: comfort weight per °C² per zone-step, nu: PC power weight, tau: step length in hours."""

    model_config = ConfigDict(frozen=True)

    mu: float = Field(20.0, ge=0)
    nu: float = Field(10.0, ge=0)
    tau: float = Field(1.0 / 12.0, gt=0)


@dataclass(frozen=True)
class ComfortSchedule:
    """Per-step comfort band, same for every zone."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.array(self.lower, dtype=float)
        upper = np.array(self.upper, dtype=float)
        if lower.shape != upper.shape or lower.ndim != 1:
            raise ConfigurationError("comfort bounds must be equal-length vectors")
        if np.any(lower >= upper):
            raise ConfigurationError("comfort schedule requires lower < upper at every step")
        lower.setflags(write=False)
        upper.setflags(write=False)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    def __len__(self) -> int:
        return self.lower.size

    def at(self, t: int) -> tuple[float, float]:
        return float(self.lower[t]), float(self.upper[t])


@dataclass(frozen=True)
class PowerBreakdown:
    chiller: float
    fan: float
    total: float


@dataclass(frozen=True)
class StepCost:
    energy: float
    comfort: float
    power_limit: float

    @property
    def total(self) -> float:
        return self.energy + self.comfort + self.power_limit


def band_deviation(x, lo, hi):
    """Squared distance of x from [lo, hi]; zero inside the band."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any(lo > hi):
        raise ConfigurationError(f"band lower bound {lo} exceeds upper bound {hi}")
    violation = np.maximum(0.0, lo - x) + np.maximum(0.0, x - hi)
    return violation * violation


def band_deviation_grad(x, lo, hi):
    # subgradient 0 at the band edges
    return 2.0 * (np.maximum(0.0, x - hi) - np.maximum(0.0, lo - x))


def total_power(pp: PowerParams, u: ControlAction, t_out: float) -> PowerBreakdown:
    flow = float(np.sum(u.mdot))
    chiller = flow / pp.cop * (t_out - u.t_supply)
    fan = pp.k1 * flow ** 3 + pp.k2
    return PowerBreakdown(chiller=chiller, fan=fan, total=chiller + fan)


def step_cost_terms(cp: CostParams, pp: PowerParams, price: float, comfort: tuple[float, float],
                    p_limit: float | None, T: np.ndarray, u: ControlAction,
                    t_out: float) -> StepCost:
    power = total_power(pp, u, t_out).total
    lo, hi = comfort
    comfort_penalty = cp.mu * float(np.sum(band_deviation(np.asarray(T), lo, hi)))
    limit_penalty = 0.0
    if p_limit is not None:
        limit_penalty = cp.nu * float(band_deviation(power, 0.0, p_limit))
    return StepCost(energy=price * power * cp.tau, comfort=comfort_penalty, power_limit=limit_penalty)


def step_cost(cp: CostParams, pp: PowerParams, price: float, comfort: tuple[float, float],
              p_limit: float | None, T: np.ndarray, u: ControlAction, t_out: float) -> float:
    """Energy bill for the step plus comfort and (PC only) power-limit penalties."""
    return step_cost_terms(cp, pp, price, comfort, p_limit, T, u, t_out).total
