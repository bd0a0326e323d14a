"""
Policy heads mapping network outputs onto the action box.

Two heads share one network layout:

* squash (DPC): u = lo + (hi - lo) * sigmoid(y), differentiable and strictly
  inside the box.
* clip (RLC): y_hat ~ N(y, exp(log_std)^2) and
  u = clip(lo + (hi - lo) * (0.5 + y_hat / 4)). The slope 1/4 matches the
  sigmoid's slope at zero, so both heads agree near the box midpoint. The
  log-density is of the pre-clip sample y_hat.

A network with a `log_std` array is a clip-head policy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import expit

from hvacbench.errors import ConfigurationError
from hvacbench.nn.mlp import GradTape, MlpParams, mlp_forward
from hvacbench.thermal.model import ActionBounds, ControlAction

_LOG_2PI = math.log(2.0 * math.pi)


class PolicyMode(str, Enum):
    DETERMINISTIC = "deterministic"
    STOCHASTIC = "stochastic"


@dataclass(frozen=True)
class PolicyOutput:
    action: ControlAction
    mean: np.ndarray                 # raw network output y
    sample: np.ndarray               # y_hat; equals `mean` in deterministic mode
    log_prob: float | None
    tape: GradTape


def squash_action(y: np.ndarray, bounds: ActionBounds) -> np.ndarray:
    return bounds.lower + bounds.width * expit(y)


def squash_action_grad(y: np.ndarray, bounds: ActionBounds) -> np.ndarray:
    """Elementwise du/dy of the squash head."""
    s = expit(y)
    return bounds.width * s * (1.0 - s)


def linear_action(y: np.ndarray, bounds: ActionBounds) -> np.ndarray:
    """Unclipped action of the clip head, also the pre-squash reading of a DPC output."""
    return bounds.lower + bounds.width * (0.5 + 0.25 * np.asarray(y))


def clip_action(y: np.ndarray, bounds: ActionBounds) -> np.ndarray:
    return bounds.clip(linear_action(y, bounds))


def gaussian_log_prob(sample: np.ndarray, mean: np.ndarray, log_std: np.ndarray):
    """Diagonal Gaussian log-density; rows are batch members when 2-D."""
    var = np.exp(2.0 * log_std)
    z2 = (sample - mean) ** 2 / var
    return -0.5 * np.sum(z2 + 2.0 * log_std + _LOG_2PI, axis=-1)


def gaussian_log_prob_grads(sample: np.ndarray, mean: np.ndarray,
                            log_std: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """d logp / d mean (per row) and d logp / d log_std (per row)."""
    var = np.exp(2.0 * log_std)
    diff = sample - mean
    return diff / var, diff ** 2 / var - 1.0


def policy_act(params: MlpParams, obs: np.ndarray, bounds: ActionBounds,
               mode: PolicyMode | str = PolicyMode.DETERMINISTIC,
               rng: np.random.Generator | None = None) -> PolicyOutput:
    mode = PolicyMode(mode)
    if params.output_dim != bounds.z + 1:
        raise ConfigurationError(f"policy outputs {params.output_dim} values, action has {bounds.z + 1}")
    y, tape = mlp_forward(params, obs)

    if params.log_std is None:
        if mode == PolicyMode.STOCHASTIC:
            raise ConfigurationError("stochastic mode needs a policy with a log_std head")
        u = squash_action(y, bounds)
        return PolicyOutput(ControlAction.from_vector(u), y, y, None, tape)

    if mode == PolicyMode.DETERMINISTIC:
        return PolicyOutput(ControlAction.from_vector(clip_action(y, bounds)), y, y, None, tape)

    if rng is None:
        raise ConfigurationError("stochastic mode needs a random generator")
    sample = y + np.exp(params.log_std) * rng.standard_normal(y.shape)
    log_prob = float(gaussian_log_prob(sample, y, params.log_std))
    return PolicyOutput(ControlAction.from_vector(clip_action(sample, bounds)), y, sample, log_prob, tape)
