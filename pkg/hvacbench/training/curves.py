"""Learning curves, their CSV form and run manifests."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from hvacbench.errors import ConfigurationError

logger = logging.getLogger(__name__)

CURVE_COLUMNS = ["episodes", "wall_seconds", "mean_cost"]


@dataclass
class LearningCurve:
    episodes: list[int] = field(default_factory=list)
    wall_seconds: list[float] = field(default_factory=list)
    mean_cost: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.episodes)

    def record(self, episodes: int, wall_seconds: float, mean_cost: float) -> None:
        if self.episodes and episodes <= self.episodes[-1]:
            raise ValueError(f"episode count must increase: {episodes} after {self.episodes[-1]}")
        self.episodes.append(int(episodes))
        self.wall_seconds.append(float(wall_seconds))
        self.mean_cost.append(float(mean_cost))

    @property
    def final_cost(self) -> float:
        return self.mean_cost[-1]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "episodes": self.episodes,
            "wall_seconds": self.wall_seconds,
            "mean_cost": self.mean_cost,
        })

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> "LearningCurve":
        missing = set(CURVE_COLUMNS) - set(frame.columns)
        if missing:
            raise ConfigurationError(f"learning curve is missing columns {sorted(missing)}")
        curve = cls()
        for row in frame.itertuples(index=False):
            curve.record(row.episodes, row.wall_seconds, row.mean_cost)
        return curve


def save_curve(path: str | Path, curve: LearningCurve) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    curve.to_frame().to_csv(path, index=False)
    return path


def load_curve(path: str | Path) -> LearningCurve:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"learning curve not found: {path}")
    return LearningCurve.from_frame(pd.read_csv(path, float_precision="round_trip"))


def episodes_to_convergence(curve: LearningCurve, within: float = 0.10) -> int | None:
    """First episode count whose cost is within `within` of the run's final cost."""
    if not len(curve):
        return None
    final = curve.final_cost
    threshold = final + within * abs(final)
    costs = np.asarray(curve.mean_cost)
    hits = np.flatnonzero(costs <= threshold)
    return int(curve.episodes[hits[0]]) if hits.size else None


def write_run_manifest(path: str | Path, manifest: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str))
    logger.debug("wrote run manifest %s", path)
    return path
