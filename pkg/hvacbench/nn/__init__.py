from hvacbench.nn.mlp import (
    GradTape,
    MlpParams,
    fit_input_normalization,
    init_mlp,
    load_mlp,
    mlp_backward,
    mlp_forward,
    save_mlp,
)
from hvacbench.nn.adam import AdamState, adam_step, adam_update
from hvacbench.nn.policy import PolicyMode, PolicyOutput, policy_act

__all__ = [
    "GradTape", "MlpParams", "fit_input_normalization", "init_mlp", "load_mlp",
    "mlp_backward", "mlp_forward", "save_mlp", "AdamState", "adam_step", "adam_update",
    "PolicyMode", "PolicyOutput", "policy_act",
]
