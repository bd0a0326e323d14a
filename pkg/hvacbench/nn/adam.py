"""Bias-corrected Adam over a list of arrays."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from hvacbench.errors import ConfigurationError, TrainingHaltedError
from hvacbench.nn.mlp import MlpParams


@dataclass(frozen=True)
class AdamState:
    m: tuple[np.ndarray, ...]
    v: tuple[np.ndarray, ...]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, arrays, **kwargs) -> "AdamState":
        m = tuple(np.zeros_like(np.asarray(a, dtype=float)) for a in arrays)
        v = tuple(np.zeros_like(np.asarray(a, dtype=float)) for a in arrays)
        return cls(m=m, v=v, **kwargs)

    @classmethod
    def for_params(cls, params: MlpParams, **kwargs) -> "AdamState":
        return cls.zeros_like(params.arrays(), **kwargs)


def adam_update(state: AdamState, arrays, grads, lr: float) -> tuple[list[np.ndarray], AdamState]:
    """One Adam step. Pure: neither the inputs nor the state are modified."""
    if len(arrays) != len(grads) or len(arrays) != len(state.m):
        raise ConfigurationError("parameters, gradients and optimiser state disagree in length")
    for a, g, m in zip(arrays, grads, state.m):
        if np.shape(a) != np.shape(g) or np.shape(a) != m.shape:
            raise ConfigurationError(f"gradient shape {np.shape(g)} does not match parameter {np.shape(a)}")
        if not np.all(np.isfinite(g)):
            raise TrainingHaltedError("non-finite gradient, stopping the update")

    step = state.step + 1
    bc1 = 1.0 - state.beta1 ** step
    bc2 = 1.0 - state.beta2 ** step
    new_arrays, new_m, new_v = [], [], []
    for a, g, m, v in zip(arrays, grads, state.m, state.v):
        g = np.asarray(g, dtype=float)
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        denom = np.sqrt(v / bc2) + state.eps
        new_arrays.append(np.asarray(a, dtype=float) - (lr / bc1) * m / denom)
        new_m.append(m)
        new_v.append(v)
    return new_arrays, replace(state, m=tuple(new_m), v=tuple(new_v), step=step)


def adam_step(state: AdamState, params: MlpParams, grads, lr: float) -> tuple[MlpParams, AdamState]:
    arrays, state = adam_update(state, params.arrays(), grads, lr)
    return params.with_arrays(arrays), state
