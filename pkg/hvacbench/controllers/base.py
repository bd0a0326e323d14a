"""
Controller specs, learned terminal-cost tables and dispatch.

A `ControllerSpec` names a controller kind with its lookahead and trained
artifact. `make_controller` turns it into an episode-scoped object with
`reset(scenario, T0)` / `act(T, scenario, t)`; episode scope only carries
warm starts and the fallback action. `act` is the stateless one-call
convenience.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from hvacbench.controllers.rbc import RbcConfig
from hvacbench.errors import ConfigurationError
from hvacbench.nn.mlp import MlpParams
from hvacbench.optim.solver import SolverOptions
from hvacbench.scenarios.generator import DayScenario
from hvacbench.scenarios.tariffs import step_hour
from hvacbench.thermal.model import ControlAction
from hvacbench.thermal.setup import BuildingSetup

TABLE_FORMAT_VERSION = 1


class ControllerKind(str, Enum):
    RBC = "RBC"
    OPT = "OPT"
    MPC = "MPC"
    MPC_C = "MPC-C"
    MPC_CL = "MPC-CL"
    DPC = "DPC"
    RLC = "RLC"

    @property
    def uses_policy(self) -> bool:
        return self in (ControllerKind.DPC, ControllerKind.RLC)

    @property
    def is_mpc(self) -> bool:
        return self in (ControllerKind.MPC, ControllerKind.MPC_C, ControllerKind.MPC_CL)

    @property
    def has_lookahead(self) -> bool:
        return self.is_mpc or self.uses_policy


@dataclass(frozen=True)
class TerminalCostTable:
    """One linear terminal cost theta_j per clock interval (hourly by default)."""

    thetas: np.ndarray              # (J, z)
    interval_hours: float = 1.0

    def __post_init__(self):
        thetas = np.array(self.thetas, dtype=float)
        if thetas.ndim != 2:
            raise ConfigurationError("terminal-cost table must be a (J, z) array")
        if abs(thetas.shape[0] * self.interval_hours - 24.0) > 1e-9:
            raise ConfigurationError(f"{thetas.shape[0]} intervals of {self.interval_hours} h do not cover a day")
        if not np.all(np.isfinite(thetas)):
            raise ConfigurationError("terminal-cost table has non-finite entries")
        thetas.setflags(write=False)
        object.__setattr__(self, "thetas", thetas)

    @classmethod
    def zeros(cls, z: int, interval_hours: float = 1.0) -> "TerminalCostTable":
        return cls(np.zeros((int(round(24.0 / interval_hours)), z)), interval_hours)

    @property
    def z(self) -> int:
        return self.thetas.shape[1]

    def index_for(self, t: int, lookahead: int, steps: int) -> int:
        """Interval containing the horizon end t + K (the last step of the day at most)."""
        end = min(t + lookahead, steps - 1)
        return min(int(step_hour(end, steps) // self.interval_hours), self.thetas.shape[0] - 1)

    def theta_for(self, t: int, lookahead: int, steps: int) -> np.ndarray:
        return self.thetas[self.index_for(t, lookahead, steps)]

    def to_dict(self) -> dict:
        return {
            "version": TABLE_FORMAT_VERSION,
            "interval_hours": self.interval_hours,
            "z": self.z,
            "thetas": self.thetas.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TerminalCostTable":
        if data.get("version") != TABLE_FORMAT_VERSION:
            raise ConfigurationError(f"unsupported terminal-cost file version {data.get('version')}")
        return cls(np.asarray(data["thetas"], dtype=float), float(data.get("interval_hours", 1.0)))


def save_terminal_table(path: str | Path, table: TerminalCostTable, **extra) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = table.to_dict()
    payload.update(extra)
    path.write_text(json.dumps(payload))
    return path


def load_terminal_table(path: str | Path) -> TerminalCostTable:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"terminal-cost artifact not found: {path}")
    return TerminalCostTable.from_dict(json.loads(path.read_text()))


@dataclass(frozen=True)
class ControllerSpec:
    kind: ControllerKind
    lookahead: int = 1
    policy: MlpParams | None = None
    terminal: TerminalCostTable | None = None
    rbc: RbcConfig = field(default_factory=RbcConfig)
    solver: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        object.__setattr__(self, "kind", ControllerKind(self.kind))
        if self.lookahead < 1:
            raise ConfigurationError("lookahead must be at least one step")
        if self.kind.uses_policy and self.policy is None:
            raise ConfigurationError(f"{self.kind.value} needs a trained policy artifact")
        if not self.kind.uses_policy and self.policy is not None:
            raise ConfigurationError(f"{self.kind.value} does not take a policy artifact")
        if (self.kind == ControllerKind.MPC_CL) != (self.terminal is not None):
            raise ConfigurationError("a terminal-cost table is required by MPC-CL and only by MPC-CL")
        if self.kind == ControllerKind.RLC and self.policy.log_std is None:
            raise ConfigurationError("RLC policies carry a Gaussian log_std head")
        if self.kind == ControllerKind.DPC and self.policy.log_std is not None:
            raise ConfigurationError("DPC policies use the squash head and have no log_std")

    @property
    def name(self) -> str:
        if self.kind.has_lookahead:
            return f"{self.kind.value}-K{self.lookahead}"
        return self.kind.value


def make_controller(spec: ControllerSpec, setup: BuildingSetup):
    from hvacbench.controllers.mpc import MpcController, OptController
    from hvacbench.controllers.policy import PolicyController
    from hvacbench.controllers.rbc import RbcController

    if spec.kind == ControllerKind.RBC:
        return RbcController(spec.rbc, setup, name=spec.name)
    if spec.kind == ControllerKind.OPT:
        return OptController(setup, spec.solver, name=spec.name)
    if spec.kind.is_mpc:
        return MpcController(spec, setup)
    return PolicyController(spec, setup)


def act(spec: ControllerSpec, setup: BuildingSetup, T: np.ndarray, scenario: DayScenario,
        t: int) -> tuple[ControlAction, float]:
    """Single action from a fresh controller (no warm start) and the time it took."""
    if not 0 <= t < scenario.steps:
        raise ConfigurationError(f"step {t} outside [0, {scenario.steps})")
    start = time.perf_counter()
    controller = make_controller(spec, setup)
    controller.reset(scenario, np.asarray(scenario.initial_temps))
    action = controller.act(np.asarray(T, dtype=float), scenario, t)
    return action, time.perf_counter() - start
