from __future__ import annotations

import numpy as np

from hvacbench.controllers.base import ControllerSpec
from hvacbench.errors import ConfigurationError
from hvacbench.nn.policy import PolicyMode, policy_act
from hvacbench.scenarios.generator import DayScenario
from hvacbench.scenarios.observation import make_observation, observation_size
from hvacbench.thermal.model import ControlAction
from hvacbench.thermal.setup import BuildingSetup


class PolicyController:
    """DPC or RLC evaluated deterministically: one network pass per step."""

    def __init__(self, spec: ControllerSpec, setup: BuildingSetup):
        self.spec = spec
        self.setup = setup
        self.name = spec.name

    def reset(self, scenario: DayScenario, T0: np.ndarray) -> None:
        expected = observation_size(self.setup.z, self.spec.lookahead, scenario.program)
        if self.spec.policy.input_dim != expected:
            raise ConfigurationError(
                f"{self.name} expects {self.spec.policy.input_dim} inputs but a "
                f"{scenario.program.value} observation with K={self.spec.lookahead} has {expected}"
            )

    def act(self, T: np.ndarray, scenario: DayScenario, t: int) -> ControlAction:
        obs = make_observation(T, scenario, t, self.spec.lookahead, self.setup.model.state_map)
        return policy_act(self.spec.policy, obs, self.setup.bounds, PolicyMode.DETERMINISTIC).action
