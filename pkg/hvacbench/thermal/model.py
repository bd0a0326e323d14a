"""
Bilinear multi-zone building model.

Zone temperatures evolve as

    T(t+1) = A T(t) + B diag(mdot(t)) (1 T_supply(t) - T(t)) + G w(t)

with w = [T_out, q_solar_1 .. q_solar_z]. Actions are handled as flat vectors
u = [mdot_1 .. mdot_z, T_supply] wherever the optimisers need them.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import scipy.linalg

from hvacbench.errors import ConfigurationError

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
DEFAULT_BUILDING_FILE = "building_default.json"


def _frozen(values, ndim: int, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != ndim:
        raise ConfigurationError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ExogenousInput:
    """Outdoor temperature (°C) and per-zone solar gain (kW) for one step."""

    t_out: float
    q_solar: np.ndarray

    def as_vector(self) -> np.ndarray:
        return np.concatenate(([self.t_out], self.q_solar))

    @classmethod
    def from_vector(cls, w: np.ndarray) -> "ExogenousInput":
        return cls(t_out=float(w[0]), q_solar=np.asarray(w[1:], dtype=float))


@dataclass(frozen=True)
class ControlAction:
    """Zone mass flows (kg/s) and the shared supply air temperature (°C)."""

    mdot: np.ndarray
    t_supply: float

    def as_vector(self) -> np.ndarray:
        return np.concatenate((self.mdot, [self.t_supply]))

    @classmethod
    def from_vector(cls, u: np.ndarray) -> "ControlAction":
        u = np.asarray(u, dtype=float)
        return cls(mdot=u[:-1].copy(), t_supply=float(u[-1]))


@dataclass(frozen=True)
class ActionBounds:
    """Box constraints on the action; the state space is unconstrained."""

    mdot_lo: np.ndarray
    mdot_hi: np.ndarray
    tsupply_lo: float
    tsupply_hi: float

    def __post_init__(self):
        object.__setattr__(self, "mdot_lo", _frozen(self.mdot_lo, 1, "mdot_lo"))
        object.__setattr__(self, "mdot_hi", _frozen(self.mdot_hi, 1, "mdot_hi"))
        if self.mdot_lo.shape != self.mdot_hi.shape:
            raise ConfigurationError("mdot_lo and mdot_hi differ in length")
        if np.any(self.mdot_lo >= self.mdot_hi) or self.tsupply_lo >= self.tsupply_hi:
            raise ConfigurationError("action bounds require lo < hi elementwise")

    @classmethod
    def uniform(cls, z: int, mdot_lo: float, mdot_hi: float,
                tsupply_lo: float, tsupply_hi: float) -> "ActionBounds":
        return cls(np.full(z, mdot_lo), np.full(z, mdot_hi), tsupply_lo, tsupply_hi)

    @property
    def z(self) -> int:
        return self.mdot_lo.size

    @property
    def lower(self) -> np.ndarray:
        return np.append(self.mdot_lo, self.tsupply_lo)

    @property
    def upper(self) -> np.ndarray:
        return np.append(self.mdot_hi, self.tsupply_hi)

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def clip(self, u: np.ndarray) -> np.ndarray:
        return np.clip(u, self.lower, self.upper)

    def contains(self, u: np.ndarray, atol: float = 1e-12) -> bool:
        u = np.asarray(u)
        return bool(np.all(u >= self.lower - atol) and np.all(u <= self.upper + atol))

    def to_dict(self) -> dict:
        return {
            "mdot_lo": self.mdot_lo.tolist(),
            "mdot_hi": self.mdot_hi.tolist(),
            "tsupply_lo": self.tsupply_lo,
            "tsupply_hi": self.tsupply_hi,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ActionBounds":
        return cls(data["mdot_lo"], data["mdot_hi"], float(data["tsupply_lo"]), float(data["tsupply_hi"]))


@dataclass(frozen=True)
class BuildingModel:
    """The plant matrices. Arrays are copied and made read-only on construction."""

    z: int
    A: np.ndarray
    B: np.ndarray
    G: np.ndarray
    state_map: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.z < 1:
            raise ConfigurationError("zone count must be >= 1")
        object.__setattr__(self, "A", _frozen(self.A, 2, "A"))
        object.__setattr__(self, "B", _frozen(self.B, 2, "B"))
        object.__setattr__(self, "G", _frozen(self.G, 2, "G"))
        state_map = np.eye(self.z) if self.state_map is None else self.state_map
        object.__setattr__(self, "state_map", _frozen(state_map, 2, "state_map"))

        z = self.z
        expected = {"A": (z, z), "B": (z, z), "G": (z, z + 1), "state_map": (z, z)}
        for name, shape in expected.items():
            actual = getattr(self, name).shape
            if actual != shape:
                raise ConfigurationError(f"{name} has shape {actual}, expected {shape}")

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(scipy.linalg.eigvals(self.A))))

    def check_invariants(self) -> None:
        """Stable autonomous plant, non-negative flow coupling, invertible state map."""
        if self.spectral_radius >= 1.0:
            raise ConfigurationError(f"spectral radius of A is {self.spectral_radius:.4f} >= 1")
        if np.any(self.B < 0):
            raise ConfigurationError("B must be elementwise non-negative")
        if abs(np.linalg.det(self.state_map)) < 1e-12:
            raise ConfigurationError("state_map must be invertible")

    def to_state(self, T: np.ndarray) -> np.ndarray:
        return self.state_map @ T


def step_dynamics(model: BuildingModel, T: np.ndarray, u: ControlAction,
                  w: ExogenousInput) -> np.ndarray:
    """One step of the bilinear zone-temperature model."""
    T = np.asarray(T, dtype=float)
    if T.shape != (model.z,) or u.mdot.shape != (model.z,) or w.q_solar.shape != (model.z,):
        raise ConfigurationError(
            f"dimension mismatch: model has {model.z} zones, got T{T.shape}, "
            f"mdot{u.mdot.shape}, q_solar{w.q_solar.shape}"
        )
    return model.A @ T + model.B @ (u.mdot * (u.t_supply - T)) + model.G @ w.as_vector()


def zone_adjacency(z: int) -> list[tuple[int, int]]:
    """Perimeter zones form a ring, the last zone is a core touching every perimeter zone."""
    if z == 1:
        return []
    if z == 2:
        return [(0, 1)]
    perimeter = z - 1
    if perimeter == 2:
        edges = [(0, 1)]
    else:
        edges = [(i, (i + 1) % perimeter) for i in range(perimeter)]
    edges += [(i, z - 1) for i in range(perimeter)]
    return edges


# nominal per-step parameters, perimeter vs core
_LEAK = (0.012, 0.006)
_COUPLING = 0.005
_FLOW_GAIN = (0.025, 0.020)
_SOLAR_GAIN = (0.02, 0.015)


def synth_building(seed: int, z: int = 5, jitter: float = 0.05) -> BuildingModel:
    """
    Deterministic stand-in for an identified building model.

    Every zone loses heat to outdoors at rate `leak` and exchanges heat with
    adjacent zones at rate `coupling`, so rows of A sum to 1 - leak and the
    outdoor column of G equals the leak. That keeps A symmetric, diagonally
    dominant and stable. `jitter` scales every nominal value by a factor drawn
    uniformly from [1 - jitter, 1 + jitter]; jitter=0 reproduces the shipped
    default instance for z=5.
    """
    if z < 1:
        raise ConfigurationError("zone count must be >= 1")
    rng = np.random.default_rng(seed)

    def jittered(value: float, size: int | None = None):
        return value * (1.0 + jitter * rng.uniform(-1.0, 1.0, size=size))

    is_core = np.zeros(z, dtype=bool)
    if z >= 3:
        is_core[-1] = True
    pick = lambda pair: np.where(is_core, pair[1], pair[0])

    leak = jittered(1.0, z) * pick(_LEAK)
    flow_gain = jittered(1.0, z) * pick(_FLOW_GAIN)
    solar_gain = jittered(1.0, z) * pick(_SOLAR_GAIN)

    coupling = np.zeros((z, z))
    for i, j in zone_adjacency(z):
        coupling[i, j] = coupling[j, i] = jittered(_COUPLING)

    A = np.diag(1.0 - leak - coupling.sum(axis=1)) + coupling
    B = np.diag(flow_gain)
    G = np.column_stack((leak, np.diag(solar_gain)))

    model = BuildingModel(z=z, A=A, B=B, G=G)
    model.check_invariants()
    logger.debug("synthesised %d-zone building (seed=%d), spectral radius %.4f",
                 z, seed, model.spectral_radius)
    return model


def save_building(path: str | Path, model: BuildingModel, bounds: ActionBounds) -> None:
    payload = {
        "version": SCHEMA_VERSION,
        "z": model.z,
        "A": model.A.tolist(),
        "B": model.B.tolist(),
        "G": model.G.tolist(),
        "state_map": model.state_map.tolist(),
        "bounds": bounds.to_dict(),
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2))


def _parse_building(payload: dict) -> tuple[BuildingModel, ActionBounds]:
    version = payload.get("version")
    if version != SCHEMA_VERSION:
        raise ConfigurationError(f"unsupported building file version: {version}")
    try:
        model = BuildingModel(
            z=int(payload["z"]),
            A=payload["A"],
            B=payload["B"],
            G=payload["G"],
            state_map=payload.get("state_map"),
        )
        bounds = ActionBounds.from_dict(payload["bounds"])
    except KeyError as e:
        raise ConfigurationError(f"building file is missing field {e}") from e
    if bounds.z != model.z:
        raise ConfigurationError("bounds and model disagree on zone count")
    model.check_invariants()
    return model, bounds


def load_building(path: str | Path) -> tuple[BuildingModel, ActionBounds]:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"building file not found: {path}")
    return _parse_building(json.loads(path.read_text()))


def default_building() -> tuple[BuildingModel, ActionBounds]:
    """The checked-in five-zone instance every acceptance run is stated against."""
    text = resources.files("hvacbench.data").joinpath(DEFAULT_BUILDING_FILE).read_text()
    return _parse_building(json.loads(text))
