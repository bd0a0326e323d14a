"""
Learning the MPC-CL terminal-cost table.

Each batch day is run in closed loop with the convexified MPC and the
current table. The realised (bilinear) day cost is the loss. A table entry
reaches the cost through every later step: the action it shapes moves the
next temperatures and becomes the next step's linearisation point. The
gradient is carried forward over the day,

    da_t    = (du*_0/dx) dT_t + (du*_0/du_prev) da_{t-1} + (du*_0/dtheta) dtheta_j(t)
    dT_t+1  = f_T dT_t + f_u da_t

and contracted with the adjoint of the realised cost wrt each applied action.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from functools import partial

import numpy as np

from hvacbench.controllers.base import ControllerKind, ControllerSpec, TerminalCostTable
from hvacbench.controllers.mpc import mpc_act, mpc_problem
from hvacbench.errors import HvacBenchError
from hvacbench.nn.adam import AdamState, adam_update
from hvacbench.optim.problem import problem_from_scenario, rollout_cost, rollout_grad
from hvacbench.optim.sensitivity import first_action_sensitivity
from hvacbench.optim.solver import SolverOptions
from hvacbench.scenarios.generator import DayScenario
from hvacbench.seeding import sub_rng
from hvacbench.thermal.model import ControlAction, step_dynamics
from hvacbench.thermal.plant import step_jacobians
from hvacbench.training.common import TrainRunConfig, map_episodes
from hvacbench.training.curves import LearningCurve

logger = logging.getLogger(__name__)


@dataclass
class MpcClEpisode:
    cost: float
    grad: np.ndarray               # (J, z)
    actions: np.ndarray
    skipped_steps: int


def mpccl_episode(table: TerminalCostTable, scenario: DayScenario, setup, lookahead: int,
                  solver: SolverOptions | None = None) -> MpcClEpisode:
    spec = ControllerSpec(ControllerKind.MPC_CL, lookahead, terminal=table,
                          solver=solver or SolverOptions())
    steps, z = scenario.steps, setup.z
    n_params = table.thetas.size
    T = np.asarray(scenario.initial_temps, dtype=float)
    u_prev = setup.bounds.midpoint
    plan = None
    actions = np.empty((steps, z + 1))
    # forward-mode derivatives wrt the flattened table
    d_actions_theta = np.zeros((steps, z + 1, n_params))
    d_T = np.zeros((z, n_params))
    d_prev = np.zeros((z + 1, n_params))
    skipped = 0

    for t in range(steps):
        j = table.index_for(t, lookahead, steps)
        theta = table.thetas[j]
        try:
            action, plan, _, p = mpc_act(spec, setup, T, scenario, t, u_prev, plan)
        except HvacBenchError as e:
            logger.warning("MPC-CL %s step %d: solve failed (%s), repeating previous action",
                           scenario.label, t, e)
            action, plan = ControlAction.from_vector(u_prev), None
            d_action = d_prev
            skipped += 1
        else:
            rebuild = partial(_rebuild, spec, setup, scenario, t, theta)
            try:
                sens = first_action_sensitivity(p, plan, theta, rebuild, T, u_prev)
            except HvacBenchError as e:
                logger.warning("MPC-CL %s step %d: no sensitivity (%s), step adds no gradient",
                               scenario.label, t, e)
                d_action = np.zeros((z + 1, n_params))
                skipped += 1
            else:
                d_action = sens.wrt_state @ d_T + sens.wrt_previous @ d_prev
                d_action[:, j * z:(j + 1) * z] += sens.jacobian
        actions[t] = action.as_vector()
        d_actions_theta[t] = d_action
        f_T, f_u = step_jacobians(setup.plant, t, T, actions[t])
        d_T = f_T @ d_T + f_u @ d_action
        d_prev = d_action
        u_prev = actions[t]
        T = step_dynamics(setup.model, T, action, scenario.exogenous(t))

    realized = problem_from_scenario(scenario, setup.plant, setup.bounds, setup.cost, 0, steps,
                                     scenario.initial_temps, realized_prices=True)
    cost, states = rollout_cost(realized, actions)
    d_cost = rollout_grad(realized, actions, states)
    grad = np.einsum("tm,tmp->p", d_cost, d_actions_theta).reshape(table.thetas.shape)
    return MpcClEpisode(cost, grad, actions, skipped)


def _rebuild(spec, setup, scenario, t, theta, T, u_prev):
    return mpc_problem(spec, setup, T, scenario, t, u_prev, terminal=theta)

def train_mpc_cl(scenarios, setup, cfg: TrainRunConfig, lookahead: int | None = None,
                 solver: SolverOptions | None = None,
                 table: TerminalCostTable | None = None) -> tuple[TerminalCostTable, LearningCurve]:
    """
    Adam on all theta_j jointly, one update per batch. The curve records each
    batch's mean realised cost under the table in force before the update.
    """
    scenarios = cfg.check_scenarios(scenarios)
    lookahead = lookahead or cfg.lookahead
    table = table or TerminalCostTable.zeros(setup.z)
    rng = sub_rng(cfg.seed, "mpccl-batches")
    state = AdamState.zeros_like([table.thetas])
    curve = LearningCurve()
    start = time.perf_counter()
    episodes = 0

    for epoch in range(cfg.epochs):
        order = rng.permutation(len(scenarios))
        for b in range(0, len(order) - cfg.batch_size + 1, cfg.batch_size):
            batch = [scenarios[i] for i in order[b:b + cfg.batch_size]]
            results = map_episodes(
                partial(mpccl_episode, table, setup=setup, lookahead=lookahead, solver=solver),
                batch, cfg.workers)
            loss = float(np.mean([r.cost for r in results]))
            grad = np.mean([r.grad for r in results], axis=0)
            (thetas,), state = adam_update(state, [table.thetas], [grad], cfg.lr)
            table = TerminalCostTable(thetas, table.interval_hours)
            episodes += len(batch)
            curve.record(episodes, time.perf_counter() - start, loss)
            logger.info("MPC-CL K=%d epoch %d, %d episodes: mean cost %.2f, |grad| %.3g",
                        lookahead, epoch, episodes, loss, float(np.linalg.norm(grad)))
    return table, curve
