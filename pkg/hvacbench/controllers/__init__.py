from hvacbench.controllers.rbc import RbcConfig, RbcController, rbc_act, rbc_grid_search
from hvacbench.controllers.base import (
    ControllerKind,
    ControllerSpec,
    TerminalCostTable,
    act,
    load_terminal_table,
    make_controller,
    save_terminal_table,
)
from hvacbench.controllers.mpc import MpcController, OptController, mpc_act, opt_plan
from hvacbench.controllers.policy import PolicyController

__all__ = [
    "RbcConfig", "RbcController", "rbc_act", "rbc_grid_search",
    "ControllerKind", "ControllerSpec", "TerminalCostTable", "act", "load_terminal_table",
    "make_controller", "save_terminal_table", "MpcController", "OptController", "mpc_act",
    "opt_plan", "PolicyController",
]
