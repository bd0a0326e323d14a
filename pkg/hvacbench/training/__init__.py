from hvacbench.training.common import TrainRunConfig
from hvacbench.training.curves import LearningCurve, episodes_to_convergence, load_curve, save_curve
from hvacbench.training.dpc import train_dpc
from hvacbench.training.mpccl import train_mpc_cl
from hvacbench.training.ppo import (
    ExperienceTuple,
    PpoConfig,
    collect_experience,
    compute_gae,
    ppo_update,
    train_rlc,
)

__all__ = [
    "TrainRunConfig", "LearningCurve", "episodes_to_convergence", "load_curve", "save_curve",
    "train_dpc", "train_mpc_cl", "ExperienceTuple", "PpoConfig", "collect_experience",
    "compute_gae", "ppo_update", "train_rlc",
]
