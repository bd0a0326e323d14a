"""
Optimisation-based controllers.

OPT solves the whole day once from the initial state and replays the plan.
MPC re-solves a K-step bilinear problem every step; MPC-C solves the problem
linearised around the current state and previous action; MPC-CL adds the
learned terminal cost theta_j^T x_{t+K}. Horizons shrink at the end of the day.
"""

from __future__ import annotations

import logging

import numpy as np

from hvacbench.controllers.base import ControllerKind, ControllerSpec
from hvacbench.errors import HvacBenchError
from hvacbench.optim.problem import TrajectoryProblem, problem_from_scenario
from hvacbench.optim.solver import SolveReport, SolverOptions, box_start, default_starts, solve_multistart
from hvacbench.scenarios.generator import DayScenario
from hvacbench.thermal.linearize import linearize, nominal_operating_point
from hvacbench.thermal.model import ControlAction
from hvacbench.thermal.setup import BuildingSetup

logger = logging.getLogger(__name__)

OPT_SOLVER = SolverOptions(max_iters=5000)


def opt_problem(scenario: DayScenario, setup: BuildingSetup) -> TrajectoryProblem:
    """Whole-day bilinear problem with perfect knowledge of the realised prices."""
    return problem_from_scenario(scenario, setup.plant, setup.bounds, setup.cost, 0, scenario.steps,
                                 scenario.initial_temps, realized_prices=True)


def opt_plan(scenario: DayScenario, setup: BuildingSetup,
             opts: SolverOptions | None = None) -> tuple[np.ndarray, SolveReport]:
    p = opt_problem(scenario, setup)
    starts = [box_start(p, 0.5, 0.5), box_start(p, 0.0, 1.0), box_start(p, 1.0, 0.0)]
    plan, report = solve_multistart(p, starts, opts or OPT_SOLVER)
    logger.info("OPT %s: objective %.2f after %d iterations (residual %.1e)",
                scenario.label, report.objective, report.iterations, report.residual)
    return plan, report


class OptController:
    def __init__(self, setup: BuildingSetup, opts: SolverOptions | None = None, name: str = "OPT"):
        self.setup = setup
        self.opts = opts or OPT_SOLVER
        self.name = name
        self.plan: np.ndarray | None = None
        self.report: SolveReport | None = None

    def reset(self, scenario: DayScenario, T0: np.ndarray) -> None:
        self.plan, self.report = opt_plan(scenario, self.setup, self.opts)

    def act(self, T: np.ndarray, scenario: DayScenario, t: int) -> ControlAction:
        return ControlAction.from_vector(self.plan[t])


def mpc_horizon(lookahead: int, t: int, steps: int) -> int:
    return min(lookahead, steps - t)


def mpc_problem(spec: ControllerSpec, setup: BuildingSetup, T: np.ndarray, scenario: DayScenario,
                t: int, u_prev: np.ndarray, terminal: np.ndarray | None = None) -> TrajectoryProblem:
    """
    K-step problem at step t. For the convexified kinds the plant is
    linearised around the trajectory obtained by holding `u_prev`. `terminal`
    overrides the MPC-CL table lookup.
    """
    horizon = mpc_horizon(spec.lookahead, t, scenario.steps)
    if spec.kind == ControllerKind.MPC:
        plant = setup.plant
    else:
        w_seq = scenario.w[t:t + horizon]
        point = nominal_operating_point(setup.model, T, setup.bounds.clip(u_prev), w_seq)
        plant = linearize(setup.model, setup.power, point)
    if terminal is None and spec.kind == ControllerKind.MPC_CL:
        terminal = spec.terminal.theta_for(t, spec.lookahead, scenario.steps)
    return problem_from_scenario(scenario, plant, setup.bounds, setup.cost, t, horizon, T,
                                 terminal=terminal)


def shift_plan(plan: np.ndarray, horizon: int) -> np.ndarray:
    """Previous solution advanced one step, its last action repeated, cut or padded to `horizon`."""
    shifted = np.vstack((plan[1:], plan[-1:]))
    if shifted.shape[0] < horizon:
        shifted = np.vstack((shifted, np.repeat(shifted[-1:], horizon - shifted.shape[0], axis=0)))
    return shifted[:horizon]


def mpc_act(spec: ControllerSpec, setup: BuildingSetup, T: np.ndarray, scenario: DayScenario, t: int,
            u_prev: np.ndarray | None = None, warm: np.ndarray | None = None,
            terminal: np.ndarray | None = None) -> tuple[ControlAction, np.ndarray, SolveReport, TrajectoryProblem]:
    """First action of the solved problem, with the full plan, solve report and problem."""
    u_prev = setup.bounds.midpoint if u_prev is None else u_prev
    p = mpc_problem(spec, setup, np.asarray(T, dtype=float), scenario, t, u_prev, terminal)
    warm = None if warm is None else shift_plan(warm, p.horizon)
    plan, report = solve_multistart(p, default_starts(p, warm), spec.solver)
    return ControlAction.from_vector(plan[0]), plan, report, p


class MpcController:
    """MPC, MPC-C or MPC-CL with warm starts; a failed solve repeats the previous action."""

    def __init__(self, spec: ControllerSpec, setup: BuildingSetup):
        self.spec = spec
        self.setup = setup
        self.name = spec.name
        self.notes: list[str] = []
        self.reports: list[SolveReport] = []
        self._u_prev = setup.bounds.midpoint
        self._plan: np.ndarray | None = None

    def reset(self, scenario: DayScenario, T0: np.ndarray) -> None:
        self.notes, self.reports = [], []
        self._u_prev = self.setup.bounds.midpoint
        self._plan = None

    def act(self, T: np.ndarray, scenario: DayScenario, t: int) -> ControlAction:
        try:
            action, plan, report, _ = mpc_act(self.spec, self.setup, T, scenario, t,
                                              self._u_prev, self._plan)
        except HvacBenchError as e:
            message = f"{scenario.label} step {t}: solve failed ({e}), repeating previous action"
            logger.warning("%s %s", self.name, message)
            self.notes.append(message)
            self._plan = None
            return ControlAction.from_vector(self._u_prev)
        self.reports.append(report)
        self._plan = plan
        self._u_prev = action.as_vector()
        return action
