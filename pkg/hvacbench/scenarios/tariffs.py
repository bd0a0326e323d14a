"""
Demand-response programs: time-of-use (TOU), real-time pricing (RTP) and
power-constrained (PC).

All windows are half-open [start, end) in clock hours. A step's clock hour is
computed as t * 24 / N so window edges land exactly on step boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from hvacbench.errors import ConfigurationError, StepOutOfRangeError


class ProgramKind(str, Enum):
    TOU = "tou"
    RTP = "rtp"
    PC = "pc"


class HorizonConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    steps: int = Field(288, ge=1)
    tau: float = Field(1.0 / 12.0, gt=0)
    lookahead: int = Field(1, ge=1)

    @model_validator(mode="after")
    def _check(self):
        if abs(self.steps * self.tau - 24.0) > 1e-9:
            raise ValueError(f"steps * tau must cover 24 h, got {self.steps * self.tau}")
        if self.lookahead > self.steps:
            raise ValueError("lookahead cannot exceed the steps in a day")
        return self


def step_hour(t: int | np.ndarray, steps: int):
    return np.asarray(t) * 24.0 / steps


def in_window(t: int | np.ndarray, steps: int, window: tuple[float, float]):
    hour = step_hour(t, steps)
    return (hour >= window[0]) & (hour < window[1])


def _check_window(window: tuple[float, float]) -> tuple[float, float]:
    start, end = float(window[0]), float(window[1])
    if not (0.0 <= start < end <= 24.0):
        raise ConfigurationError(f"window {window} must satisfy 0 <= start < end <= 24")
    return start, end


@dataclass(frozen=True)
class TouTariff:
    steps: int
    peak_price: float = 10.0
    offpeak_price: float = 1.0
    peak_window: tuple[float, float] = (12.0, 18.0)

    def __post_init__(self):
        if self.peak_price <= 0 or self.offpeak_price <= 0:
            raise ConfigurationError("TOU prices must be positive")
        object.__setattr__(self, "peak_window", _check_window(self.peak_window))

    @property
    def kind(self) -> ProgramKind:
        return ProgramKind.TOU


@dataclass(frozen=True)
class RtpTariff:
    rtp: np.ndarray
    dap: np.ndarray

    def __post_init__(self):
        rtp = np.array(self.rtp, dtype=float)
        dap = np.array(self.dap, dtype=float)
        if rtp.shape != dap.shape or rtp.ndim != 1:
            raise ConfigurationError("RTP and DAP series must be equal-length vectors")
        if np.any(rtp <= 0) or np.any(dap <= 0):
            raise ConfigurationError("RTP/DAP prices must be positive")
        rtp.setflags(write=False)
        dap.setflags(write=False)
        object.__setattr__(self, "rtp", rtp)
        object.__setattr__(self, "dap", dap)

    @property
    def steps(self) -> int:
        return self.rtp.size

    @property
    def kind(self) -> ProgramKind:
        return ProgramKind.RTP


@dataclass(frozen=True)
class PcTariff:
    steps: int
    flat_price: float = 1.0
    limit_normal: float = 25.0
    limit_event: float = 15.0
    event_window: tuple[float, float] = (12.5, 16.5)
    nu: float = 10.0

    def __post_init__(self):
        if self.flat_price <= 0 or self.limit_normal <= 0 or self.limit_event <= 0:
            raise ConfigurationError("PC price and limits must be positive")
        if self.nu < 0:
            raise ConfigurationError("PC penalty weight must be non-negative")
        object.__setattr__(self, "event_window", _check_window(self.event_window))

    @property
    def kind(self) -> ProgramKind:
        return ProgramKind.PC


TariffProgram = Union[TouTariff, RtpTariff, PcTariff]


def _check_step(tariff: TariffProgram, t: int) -> None:
    if not 0 <= t < tariff.steps:
        raise StepOutOfRangeError(f"step {t} outside [0, {tariff.steps})")


def price_at(tariff: TariffProgram, t: int) -> float:
    """Realised price billed at step t."""
    _check_step(tariff, t)
    if isinstance(tariff, TouTariff):
        peak = in_window(t, tariff.steps, tariff.peak_window)
        return tariff.peak_price if peak else tariff.offpeak_price
    if isinstance(tariff, RtpTariff):
        return float(tariff.rtp[t])
    return tariff.flat_price


def power_limit_at(tariff: TariffProgram, t: int) -> float | None:
    _check_step(tariff, t)
    if not isinstance(tariff, PcTariff):
        return None
    event = in_window(t, tariff.steps, tariff.event_window)
    return tariff.limit_event if event else tariff.limit_normal


def price_series(tariff: TariffProgram) -> np.ndarray:
    t = np.arange(tariff.steps)
    if isinstance(tariff, TouTariff):
        peak = in_window(t, tariff.steps, tariff.peak_window)
        return np.where(peak, tariff.peak_price, tariff.offpeak_price)
    if isinstance(tariff, RtpTariff):
        return np.array(tariff.rtp)
    return np.full(tariff.steps, tariff.flat_price)


def planning_price_series(tariff: TariffProgram) -> np.ndarray:
    """What a controller plans on: the day-ahead forecast under RTP, the known price otherwise."""
    if isinstance(tariff, RtpTariff):
        return np.array(tariff.dap)
    return price_series(tariff)


def limit_series(tariff: TariffProgram) -> np.ndarray | None:
    if not isinstance(tariff, PcTariff):
        return None
    event = in_window(np.arange(tariff.steps), tariff.steps, tariff.event_window)
    return np.where(event, tariff.limit_event, tariff.limit_normal)


def high_cost_window(tariff: TariffProgram, rtp_hours: int = 6) -> tuple[float, float]:
    """Window a rule-based controller pre-cools for."""
    if isinstance(tariff, TouTariff):
        return tariff.peak_window
    if isinstance(tariff, PcTariff):
        return tariff.event_window
    hours = np.floor(step_hour(np.arange(tariff.steps), tariff.steps))
    present = np.unique(hours)
    hourly = np.array([tariff.dap[hours == h].mean() for h in present])
    span = min(rtp_hours, present.size)
    means = np.convolve(hourly, np.ones(span) / span, mode="valid")
    start = int(np.argmax(means))
    # window closes where the next present hour starts
    end = present[start + span] if start + span < present.size else 24.0
    return float(present[start]), float(end)
