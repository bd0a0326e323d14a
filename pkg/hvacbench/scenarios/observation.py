"""
Policy observation vector

    s(t) = [x(t), T(t), T_out forecast (K), solar forecast (K*z), sin/cos day phase, tail]

where the tail is the K-step day-ahead price (RTP) or power limit (PC) and is
absent under TOU. Forecast windows that run past the end of the day repeat the
last step's value.
"""

from __future__ import annotations

import numpy as np

from hvacbench.errors import StepOutOfRangeError
from hvacbench.scenarios.generator import DayScenario
from hvacbench.scenarios.tariffs import PcTariff, ProgramKind, RtpTariff, limit_series


def observation_size(z: int, lookahead: int, program: ProgramKind | str) -> int:
    size = 2 * z + lookahead + z * lookahead + 2
    if ProgramKind(program) != ProgramKind.TOU:
        size += lookahead
    return size


def forecast_steps(t: int, lookahead: int, steps: int) -> np.ndarray:
    return np.minimum(np.arange(t, t + lookahead), steps - 1)


def make_observation(T: np.ndarray, scenario: DayScenario, t: int, lookahead: int,
                     state_map: np.ndarray | None = None) -> np.ndarray:
    """Observation at step t; t == N is allowed so terminal next-observations exist."""
    steps = scenario.steps
    if not 0 <= t <= steps:
        raise StepOutOfRangeError(f"step {t} outside [0, {steps}]")
    T = np.asarray(T, dtype=float)
    x = T if state_map is None else state_map @ T
    idx = forecast_steps(t, lookahead, steps)
    phase = 2.0 * np.pi * t / steps

    parts = [
        x,
        T,
        scenario.w[idx, 0],
        scenario.w[idx, 1:].ravel(),
        np.array([np.sin(phase), np.cos(phase)]),
    ]
    tariff = scenario.tariff
    if isinstance(tariff, RtpTariff):
        parts.append(tariff.dap[idx])
    elif isinstance(tariff, PcTariff):
        parts.append(limit_series(tariff)[idx])
    return np.concatenate(parts)


def observation_temperature_grad(d_obs: np.ndarray, z: int,
                                 state_map: np.ndarray | None = None) -> np.ndarray:
    """Pull a gradient w.r.t. the observation back onto the zone temperatures."""
    d_x = d_obs[:z]
    d_T = d_obs[z:2 * z].copy()
    d_T += d_x if state_map is None else state_map.T @ d_x
    return d_T
