from hvacbench.optim.problem import (
    CostBreakdown,
    TrajectoryProblem,
    problem_from_scenario,
    rollout_breakdown,
    rollout_cost,
    rollout_grad,
)
from hvacbench.optim.solver import SolveReport, SolverOptions, solve_multistart, solve_projected
from hvacbench.optim.sensitivity import SensitivityResult, first_action_sensitivity

__all__ = [
    "CostBreakdown", "TrajectoryProblem", "problem_from_scenario", "rollout_breakdown",
    "rollout_cost", "rollout_grad", "SolveReport", "SolverOptions", "solve_multistart",
    "solve_projected", "SensitivityResult", "first_action_sensitivity",
]
