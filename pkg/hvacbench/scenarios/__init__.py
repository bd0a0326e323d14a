from hvacbench.scenarios.tariffs import (
    HorizonConfig,
    PcTariff,
    ProgramKind,
    RtpTariff,
    TariffProgram,
    TouTariff,
    limit_series,
    planning_price_series,
    power_limit_at,
    price_at,
    price_series,
)
from hvacbench.scenarios.generator import (
    ClimateConfig,
    ComfortConfig,
    DayScenario,
    DaySettings,
    ScenarioSet,
    comfort_schedule,
    generate_day,
    split_train_test,
)
from hvacbench.scenarios.observation import make_observation, observation_size
from hvacbench.scenarios.storage import load_scenario_set, save_scenario_set

__all__ = [
    "HorizonConfig", "PcTariff", "ProgramKind", "RtpTariff", "TariffProgram", "TouTariff",
    "limit_series", "planning_price_series", "power_limit_at", "price_at", "price_series",
    "ClimateConfig", "ComfortConfig", "DayScenario", "DaySettings", "ScenarioSet",
    "comfort_schedule", "generate_day", "split_train_test",
    "make_observation", "observation_size", "load_scenario_set", "save_scenario_set",
]
