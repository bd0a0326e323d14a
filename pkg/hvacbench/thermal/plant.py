"""
Plant interface shared by the exact bilinear model and its linearisation.

Rollouts, adjoints and the DPC unroll only talk to a plant through `step`,
`vjp` and the chiller term, so the same code drives OPT/MPC (bilinear) and
MPC-C/MPC-CL (affine).
"""

from __future__ import annotations

from typing import Protocol

import numpy as np

from hvacbench.thermal.cost import PowerParams
from hvacbench.thermal.model import BuildingModel


class Plant(Protocol):
    model: BuildingModel
    power: PowerParams

    @property
    def z(self) -> int: ...

    def step(self, k: int, T: np.ndarray, u: np.ndarray, w: np.ndarray) -> np.ndarray: ...

    def vjp(self, k: int, T: np.ndarray, u: np.ndarray,
            lam: np.ndarray) -> tuple[np.ndarray, np.ndarray]: ...

    def chiller(self, k: int, u: np.ndarray, t_out: float) -> float: ...

    def chiller_grad(self, k: int, u: np.ndarray, t_out: float) -> np.ndarray: ...


class BilinearPlant:
    """Exact plant, action given as the flat vector [mdot, T_supply]."""

    def __init__(self, model: BuildingModel, power: PowerParams):
        self.model = model
        self.power = power

    @property
    def z(self) -> int:
        return self.model.z

    def step(self, k, T, u, w):
        mdot, ts = u[:-1], u[-1]
        return self.model.A @ T + self.model.B @ (mdot * (ts - T)) + self.model.G @ w

    def vjp(self, k, T, u, lam):
        mdot, ts = u[:-1], u[-1]
        b_lam = self.model.B.T @ lam
        d_T = self.model.A.T @ lam - mdot * b_lam
        d_u = np.empty(self.z + 1)
        d_u[:-1] = (ts - T) * b_lam
        d_u[-1] = mdot @ b_lam
        return d_T, d_u

    def chiller(self, k, u, t_out):
        return float(np.sum(u[:-1])) / self.power.cop * (t_out - u[-1])

    def chiller_grad(self, k, u, t_out):
        grad = np.full(self.z + 1, (t_out - u[-1]) / self.power.cop)
        grad[-1] = -float(np.sum(u[:-1])) / self.power.cop
        return grad


def step_jacobians(plant: Plant, k: int, T: np.ndarray,
                   u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(dT_next/dT, dT_next/du), assembled row by row from the plant's vjp."""
    z = plant.z
    d_state, d_action = np.empty((z, z)), np.empty((z, z + 1))
    for i, row in enumerate(np.eye(z)):
        d_state[i], d_action[i] = plant.vjp(k, T, u, row)
    return d_state, d_action


def fan_power(power: PowerParams, u: np.ndarray) -> float:
    return power.k1 * float(np.sum(u[:-1])) ** 3 + power.k2


def fan_power_grad(power: PowerParams, u: np.ndarray) -> np.ndarray:
    grad = np.full(u.size, 3.0 * power.k1 * float(np.sum(u[:-1])) ** 2)
    grad[-1] = 0.0
    return grad


def plant_power(plant: Plant, k: int, u: np.ndarray, t_out: float) -> float:
    return plant.chiller(k, u, t_out) + fan_power(plant.power, u)


def plant_power_grad(plant: Plant, k: int, u: np.ndarray, t_out: float) -> np.ndarray:
    return plant.chiller_grad(k, u, t_out) + fan_power_grad(plant.power, u)
