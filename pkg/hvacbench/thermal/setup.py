from __future__ import annotations

from dataclasses import dataclass

from hvacbench.scenarios.tariffs import PcTariff, TariffProgram
from hvacbench.thermal.cost import CostParams, PowerParams
from hvacbench.thermal.model import ActionBounds, BuildingModel, default_building
from hvacbench.thermal.plant import BilinearPlant


@dataclass(frozen=True)
class BuildingSetup:
    """Plant matrices, action box and cost weights: everything a controller is built against."""

    model: BuildingModel
    bounds: ActionBounds
    power: PowerParams = PowerParams()
    cost: CostParams = CostParams()

    @classmethod
    def default(cls) -> "BuildingSetup":
        model, bounds = default_building()
        return cls(model=model, bounds=bounds)

    @property
    def z(self) -> int:
        return self.model.z

    @property
    def plant(self) -> BilinearPlant:
        return BilinearPlant(self.model, self.power)

    def cost_for(self, tariff: TariffProgram) -> CostParams:
        """Cost weights with the program's own power-limit weight under PC."""
        if isinstance(tariff, PcTariff):
            return self.cost.model_copy(update={"nu": tariff.nu})
        return self.cost
