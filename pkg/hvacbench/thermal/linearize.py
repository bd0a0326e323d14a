"""
First-order convexification of the bilinear plant.

Both bilinear products, mdot * (T_supply - T) in the dynamics and
sum(mdot) * (T_out - T_supply) in the chiller power, are replaced by their
Taylor expansion around an operating point (mdot0, T_supply0, T0(k)). The
operating temperature is a trajectory, so dynamics are time-indexed. The fan
cubic and the band penalties are already convex and stay untouched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hvacbench.errors import ConfigurationError
from hvacbench.thermal.cost import PowerParams
from hvacbench.thermal.model import BuildingModel


@dataclass(frozen=True)
class OperatingPoint:
    mdot: np.ndarray
    t_supply: float
    temps: np.ndarray  # (H, z), expansion state for the transition k -> k+1


@dataclass(frozen=True)
class LinearizedModel:
    model: BuildingModel
    power: PowerParams
    point: OperatingPoint
    state_matrix: np.ndarray     # (z, z), shared by every step
    input_matrices: np.ndarray   # (H, z, z+1)
    offsets: np.ndarray          # (H, z)

    @property
    def z(self) -> int:
        return self.model.z

    @property
    def horizon(self) -> int:
        return self.offsets.shape[0]

    def step(self, k, T, u, w):
        return (self.state_matrix @ T + self.input_matrices[k] @ u
                + self.model.G @ w + self.offsets[k])

    def vjp(self, k, T, u, lam):
        return self.state_matrix.T @ lam, self.input_matrices[k].T @ lam

    def chiller(self, k, u, t_out):
        flow0 = float(np.sum(self.point.mdot))
        ts0 = self.point.t_supply
        flow = float(np.sum(u[:-1]))
        return ((t_out - ts0) * flow - flow0 * u[-1] + flow0 * ts0) / self.power.cop

    def chiller_grad(self, k, u, t_out):
        grad = np.full(self.z + 1, (t_out - self.point.t_supply) / self.power.cop)
        grad[-1] = -float(np.sum(self.point.mdot)) / self.power.cop
        return grad


def linearize(model: BuildingModel, power: PowerParams, point: OperatingPoint) -> LinearizedModel:
    mdot0 = np.asarray(point.mdot, dtype=float)
    temps0 = np.atleast_2d(np.asarray(point.temps, dtype=float))
    if mdot0.shape != (model.z,) or temps0.shape[1] != model.z:
        raise ConfigurationError("operating point does not match the model's zone count")

    B = model.B
    gap = point.t_supply - temps0                  # (H, z)
    horizon = temps0.shape[0]

    state_matrix = model.A - B * mdot0[None, :]
    input_matrices = np.empty((horizon, model.z, model.z + 1))
    input_matrices[:, :, :-1] = B[None, :, :] * gap[:, None, :]
    input_matrices[:, :, -1] = B @ mdot0
    offsets = -(mdot0[None, :] * gap) @ B.T

    return LinearizedModel(
        model=model,
        power=power,
        point=OperatingPoint(mdot=mdot0, t_supply=float(point.t_supply), temps=temps0),
        state_matrix=state_matrix,
        input_matrices=input_matrices,
        offsets=offsets,
    )


def nominal_operating_point(model: BuildingModel, T0: np.ndarray, u_prev: np.ndarray,
                            w_seq: np.ndarray) -> OperatingPoint:
    """Hold the previous action over the horizon and record the bilinear trajectory."""
    mdot, ts = u_prev[:-1], float(u_prev[-1])
    temps = np.empty((w_seq.shape[0], model.z))
    T = np.asarray(T0, dtype=float)
    for k, w in enumerate(w_seq):
        temps[k] = T
        T = model.A @ T + model.B @ (mdot * (ts - T)) + model.G @ w
    return OperatingPoint(mdot=np.array(mdot, dtype=float), t_supply=ts, temps=temps)
