"""
Synthetic summer days: weather, prices, comfort band and initial temperatures.

Every component draws from its own seeded stream, so a given seed yields the
same weather whatever the program, and re-generating a day with a heat offset
shifts its temperature profile without changing anything else.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from datetime import date, timedelta

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from hvacbench.errors import ConfigurationError
from hvacbench.scenarios.tariffs import (
    HorizonConfig,
    PcTariff,
    ProgramKind,
    RtpTariff,
    TariffProgram,
    TouTariff,
    in_window,
    step_hour,
)
from hvacbench.thermal.cost import ComfortSchedule
from hvacbench.thermal.model import ExogenousInput

logger = logging.getLogger(__name__)

TRAIN_START = date(2021, 7, 1)
TEST_START = date(2022, 8, 1)


class ClimateConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    mean_temp: float = 25.0
    mean_temp_sd: float = Field(2.0, ge=0)
    amplitude: float = Field(6.0, gt=0)
    amplitude_sd: float = Field(1.0, ge=0)
    noise_sd: float = Field(0.25, ge=0)
    min_hour: float = 5.0
    max_hour: float = 15.0
    sunrise: float = 6.0
    sunset: float = 20.0
    solar_peak: float = Field(2.0, ge=0)
    solar_sd: float = Field(0.15, ge=0)
    zone_weights: tuple[float, ...] = (0.5, 0.9, 1.0, 0.9, 0.3)
    initial_temp: tuple[float, float] = (22.0, 25.0)

    @field_validator("max_hour")
    @classmethod
    def _peak_after_min(cls, v, info):
        if v <= info.data.get("min_hour", 0.0):
            raise ValueError("max_hour must come after min_hour")
        return v

    @property
    def zones(self) -> int:
        return len(self.zone_weights)


class ComfortConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    occupied_start: float = 7.0
    occupied_end: float = 18.0
    occupied: tuple[float, float] = (20.0, 24.5)
    unoccupied: tuple[float, float] = (16.0, 28.0)


class TouConfig(BaseModel):
    peak_price: float = 10.0
    offpeak_price: float = 1.0
    peak_window: tuple[float, float] = (12.0, 18.0)


class PcConfig(BaseModel):
    flat_price: float = 1.0
    limit_normal: float = 25.0
    limit_event: float = 15.0
    event_window: tuple[float, float] = (12.5, 16.5)
    nu: float = 10.0


class RtpConfig(BaseModel):
    base_price: float = Field(1.0, gt=0)
    peak_premium: float = Field(4.0, ge=0)
    peak_hour: float = 16.0
    peak_width: float = Field(3.0, gt=0)
    day_sd: float = Field(0.15, ge=0)
    noise_sd: float = Field(0.35, ge=0)
    noise_ar: float = Field(0.7, ge=0, lt=1)
    floor: float = Field(0.05, gt=0)


class TariffConfig(BaseModel):
    tou: TouConfig = TouConfig()
    pc: PcConfig = PcConfig()
    rtp: RtpConfig = RtpConfig()


class DaySettings(BaseModel):
    """Everything besides weather that shapes a generated day."""

    model_config = ConfigDict(frozen=True)

    horizon: HorizonConfig = HorizonConfig()
    comfort: ComfortConfig = ComfortConfig()
    tariffs: TariffConfig = TariffConfig()


@dataclass(frozen=True)
class DayScenario:
    label: str
    w: np.ndarray                 # (N, z+1): [T_out, q_solar...] per step
    tariff: TariffProgram
    comfort: ComfortSchedule
    initial_temps: np.ndarray
    seed: int = 0

    def __post_init__(self):
        w = np.array(self.w, dtype=float)
        temps = np.array(self.initial_temps, dtype=float)
        if w.ndim != 2 or w.shape[0] != len(self.comfort) or w.shape[0] != self.tariff.steps:
            raise ConfigurationError("scenario series must all have N steps")
        if temps.shape != (w.shape[1] - 1,):
            raise ConfigurationError("initial temperatures must have one entry per zone")
        if not np.all(np.isfinite(w)):
            raise ConfigurationError("exogenous inputs must be finite")
        w.setflags(write=False)
        temps.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "initial_temps", temps)

    @property
    def steps(self) -> int:
        return self.w.shape[0]

    @property
    def z(self) -> int:
        return self.w.shape[1] - 1

    @property
    def program(self) -> ProgramKind:
        return self.tariff.kind

    @property
    def t_out(self) -> np.ndarray:
        return self.w[:, 0]

    @property
    def q_solar(self) -> np.ndarray:
        return self.w[:, 1:]

    @property
    def peak_t_out(self) -> float:
        return float(self.t_out.max())

    @property
    def mean_t_out(self) -> float:
        return float(self.t_out.mean())

    def exogenous(self, t: int) -> ExogenousInput:
        return ExogenousInput.from_vector(self.w[t])


@dataclass(frozen=True)
class ScenarioSet:
    name: str
    program: ProgramKind
    scenarios: tuple[DayScenario, ...]
    reference_peak: float
    hot_labels: tuple[str, ...] = field(default=())

    def __len__(self) -> int:
        return len(self.scenarios)

    def __iter__(self):
        return iter(self.scenarios)

    @property
    def labels(self) -> list[str]:
        return [s.label for s in self.scenarios]

    def by_label(self, label: str) -> DayScenario:
        for scenario in self.scenarios:
            if scenario.label == label:
                return scenario
        raise KeyError(label)

    def is_out_of_distribution(self, scenario: DayScenario) -> bool:
        return scenario.peak_t_out > self.reference_peak


def comfort_schedule(cfg: ComfortConfig, steps: int) -> ComfortSchedule:
    occupied = in_window(np.arange(steps), steps, (cfg.occupied_start, cfg.occupied_end))
    lower = np.where(occupied, cfg.occupied[0], cfg.unoccupied[0])
    upper = np.where(occupied, cfg.occupied[1], cfg.unoccupied[1])
    return ComfortSchedule(lower=lower, upper=upper)


def diurnal_shape(hours: np.ndarray, min_hour: float, max_hour: float) -> np.ndarray:
    """-1 at min_hour, +1 at max_hour, cosine ramps in between (unequal rise and fall)."""
    rise = max_hour - min_hour
    since_min = np.mod(hours - min_hour, 24.0)
    rising = since_min < rise
    fall_phase = (since_min - rise) / (24.0 - rise)
    return np.where(rising, -np.cos(np.pi * since_min / rise), np.cos(np.pi * fall_phase))


def _weather(rng: np.random.Generator, climate: ClimateConfig, hours: np.ndarray,
             heat_offset: float) -> np.ndarray:
    mean = climate.mean_temp + climate.mean_temp_sd * rng.normal()
    amplitude = max(2.0, climate.amplitude + climate.amplitude_sd * rng.normal())
    phi = 0.98
    shocks = rng.normal(size=hours.size) * climate.noise_sd * math.sqrt(1 - phi ** 2)
    noise = np.empty(hours.size)
    level = climate.noise_sd * rng.normal()
    for t, shock in enumerate(shocks):
        level = phi * level + shock
        noise[t] = level

    t_out = mean + amplitude * diurnal_shape(hours, climate.min_hour, climate.max_hour) + noise
    return t_out + heat_offset


def _solar(rng: np.random.Generator, climate: ClimateConfig, hours: np.ndarray) -> np.ndarray:
    daylight = (hours - climate.sunrise) / (climate.sunset - climate.sunrise)
    profile = np.where((daylight > 0) & (daylight < 1), np.sin(np.pi * np.clip(daylight, 0, 1)), 0.0)
    sky = max(0.0, 1.0 + climate.solar_sd * rng.normal())
    weights = np.asarray(climate.zone_weights)
    return np.clip(climate.solar_peak * sky * profile[:, None] * weights[None, :], 0.0, None)


def _rtp_tariff(rng: np.random.Generator, cfg: RtpConfig, steps: int) -> RtpTariff:
    clock = np.arange(24)
    base = cfg.base_price * max(0.2, 1.0 + cfg.day_sd * rng.normal())
    dap_hourly = base + cfg.peak_premium * np.exp(-((clock - cfg.peak_hour) / cfg.peak_width) ** 2)

    noise = np.empty(24)
    level = 0.0
    scale = cfg.noise_sd * math.sqrt(1 - cfg.noise_ar ** 2)
    for h in range(24):
        level = cfg.noise_ar * level + scale * rng.normal()
        noise[h] = level
    rtp_hourly = np.maximum(dap_hourly + noise, cfg.floor)

    hour_index = np.floor(step_hour(np.arange(steps), steps)).astype(int)
    return RtpTariff(rtp=rtp_hourly[hour_index], dap=np.maximum(dap_hourly, cfg.floor)[hour_index])


def make_tariff(program: ProgramKind, settings: DaySettings,
                rng: np.random.Generator | None = None) -> TariffProgram:
    steps = settings.horizon.steps
    tariffs = settings.tariffs
    if program == ProgramKind.TOU:
        return TouTariff(steps=steps, **tariffs.tou.model_dump())
    if program == ProgramKind.PC:
        return PcTariff(steps=steps, **tariffs.pc.model_dump())
    if rng is None:
        raise ConfigurationError("RTP tariffs are generated and need a random stream")
    return _rtp_tariff(rng, tariffs.rtp, steps)


def generate_day(seed: int, climate: ClimateConfig, program: ProgramKind | str,
                 settings: DaySettings | None = None, heat_offset: float = 0.0,
                 label: str | None = None) -> DayScenario:
    settings = settings or DaySettings()
    program = ProgramKind(program)
    steps = settings.horizon.steps
    hours = step_hour(np.arange(steps), steps)

    weather_rng = np.random.default_rng([seed, 0])
    price_rng = np.random.default_rng([seed, 1])
    init_rng = np.random.default_rng([seed, 2])

    t_out = _weather(weather_rng, climate, hours, heat_offset)
    q_solar = _solar(weather_rng, climate, hours)
    lo, hi = climate.initial_temp
    initial = init_rng.uniform(lo, hi, size=climate.zones)

    comfort = comfort_schedule(settings.comfort, steps)
    if np.any(initial < comfort.lower[0]) or np.any(initial > comfort.upper[0]):
        raise ConfigurationError("initial temperature range falls outside the overnight comfort band")

    return DayScenario(
        label=label or f"seed-{seed:05d}",
        w=np.column_stack((t_out, q_solar)),
        tariff=make_tariff(program, settings, price_rng),
        comfort=comfort,
        initial_temps=initial,
        seed=seed,
    )


def split_train_test(seeds, hot_day_fraction: float, climate: ClimateConfig,
                     program: ProgramKind | str, settings: DaySettings | None = None,
                     n_train: int | None = None) -> tuple[ScenarioSet, ScenarioSet]:
    """
    First `n_train` seeds (half by default) become training days, the rest test
    days. A `hot_day_fraction` of test days is shifted hotter than every
    training day; all other test days are capped at the training maximum.
    """
    seeds = list(seeds)
    if len(seeds) < 2:
        raise ConfigurationError("need at least two seeds to split into train and test")
    if not 0.0 <= hot_day_fraction <= 1.0:
        raise ConfigurationError("hot_day_fraction must lie in [0, 1]")
    n_train = len(seeds) // 2 if n_train is None else n_train
    train_seeds, test_seeds = seeds[:n_train], seeds[n_train:]
    if not train_seeds or not test_seeds:
        raise ConfigurationError("train/test split left one side empty")
    program = ProgramKind(program)

    train = tuple(
        generate_day(seed, climate, program, settings,
                     label=(TRAIN_START + timedelta(days=i)).isoformat())
        for i, seed in enumerate(train_seeds)
    )
    train_max = max(day.peak_t_out for day in train)

    rng = np.random.default_rng([test_seeds[0], 3])
    n_hot = min(len(test_seeds), math.ceil(hot_day_fraction * len(test_seeds)))
    hot_index = set(rng.choice(len(test_seeds), size=n_hot, replace=False).tolist())

    test, hot_labels = [], []
    for i, seed in enumerate(test_seeds):
        label = (TEST_START + timedelta(days=i)).isoformat()
        day = generate_day(seed, climate, program, settings, label=label)
        if i in hot_index:
            offset = train_max - day.peak_t_out + 1.0 + rng.uniform(0.0, 2.0)
            hot_labels.append(label)
        elif day.peak_t_out > train_max:
            offset = train_max - day.peak_t_out - 0.01
        else:
            offset = 0.0
        if offset:
            day = generate_day(seed, climate, program, settings, heat_offset=offset, label=label)
        test.append(day)

    logger.info("generated %d train / %d test %s days, %d deliberately out of distribution",
                len(train), len(test), program.value, len(hot_labels))
    return (
        ScenarioSet("train", program, train, reference_peak=train_max),
        ScenarioSet("test", program, tuple(test), reference_peak=train_max,
                    hot_labels=tuple(hot_labels)),
    )
