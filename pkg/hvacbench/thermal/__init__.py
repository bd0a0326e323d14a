from hvacbench.thermal.model import (
    ActionBounds,
    BuildingModel,
    ControlAction,
    ExogenousInput,
    default_building,
    load_building,
    save_building,
    step_dynamics,
    synth_building,
)
from hvacbench.thermal.cost import (
    ComfortSchedule,
    CostParams,
    PowerParams,
    band_deviation,
    step_cost,
    step_cost_terms,
    total_power,
)
from hvacbench.thermal.plant import BilinearPlant, Plant
from hvacbench.thermal.linearize import LinearizedModel, OperatingPoint, linearize

__all__ = [
    "ActionBounds", "BuildingModel", "ControlAction", "ExogenousInput",
    "default_building", "load_building", "save_building", "step_dynamics", "synth_building",
    "ComfortSchedule", "CostParams", "PowerParams", "band_deviation", "step_cost",
    "step_cost_terms", "total_power", "BilinearPlant", "Plant",
    "LinearizedModel", "OperatingPoint", "linearize",
]
