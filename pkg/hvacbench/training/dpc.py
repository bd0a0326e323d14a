"""
Differentiable predictive control.

The policy is unrolled through the model for the whole day and the loss

    sum_t [ c(T_t, u_t) + rho * h(u_t) ]

is differentiated exactly by backpropagation through time: the state adjoint
flows through the plant, into the network via the observation, and back to
the previous state. h is the squared box violation of the pre-squash
reading lo + (hi - lo) * (0.5 + y / 4) of the network output.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from functools import partial

import numpy as np

from hvacbench.controllers.base import ControllerKind, ControllerSpec
from hvacbench.controllers.policy import PolicyController
from hvacbench.errors import TrainingHaltedError
from hvacbench.harness.simulate import run_episode
from hvacbench.nn.adam import AdamState, adam_step
from hvacbench.nn.mlp import MlpParams, mlp_backward, mlp_forward
from hvacbench.nn.policy import linear_action, squash_action, squash_action_grad
from hvacbench.optim.problem import stage_cost, stage_cost_grad
from hvacbench.scenarios.generator import DayScenario
from hvacbench.scenarios.observation import make_observation, observation_temperature_grad
from hvacbench.scenarios.tariffs import limit_series, price_series
from hvacbench.seeding import sub_rng, sub_seed
from hvacbench.thermal.cost import band_deviation, band_deviation_grad
from hvacbench.training.common import TrainRunConfig, init_policy, map_episodes
from hvacbench.training.curves import LearningCurve

logger = logging.getLogger(__name__)


@dataclass
class DpcEpisode:
    loss: float
    cost: float
    penalty: float
    grads: list[np.ndarray]


def dpc_episode(params: MlpParams, scenario: DayScenario, setup, lookahead: int,
                rho: float, with_grad: bool = True) -> DpcEpisode:
    plant = setup.plant
    bounds = setup.bounds
    cost_params = setup.cost_for(scenario.tariff)
    state_map = setup.model.state_map
    prices = price_series(scenario.tariff)
    limits = limit_series(scenario.tariff)
    lower, upper = scenario.comfort.lower, scenario.comfort.upper
    steps, z = scenario.steps, setup.z

    temps = np.empty((steps + 1, z))
    temps[0] = scenario.initial_temps
    outputs, actions, tapes = [], [], []
    cost = penalty = 0.0
    for t in range(steps):
        obs = make_observation(temps[t], scenario, t, lookahead, state_map)
        y, tape = mlp_forward(params, obs)
        u = squash_action(y, bounds)
        limit = None if limits is None else float(limits[t])
        e, c, o, _ = stage_cost(plant, cost_params, t, float(prices[t]), float(lower[t]),
                                float(upper[t]), limit, temps[t], u, float(scenario.w[t, 0]))
        cost += e + c + o
        penalty += rho * float(np.sum(band_deviation(linear_action(y, bounds), bounds.lower, bounds.upper)))
        temps[t + 1] = plant.step(t, temps[t], u, scenario.w[t])
        outputs.append(y)
        actions.append(u)
        tapes.append(tape)

    loss = cost + penalty
    if not np.isfinite(loss):
        raise TrainingHaltedError(f"non-finite DPC loss on {scenario.label}")
    if not with_grad:
        return DpcEpisode(loss, cost, penalty, [])

    grads = params.zero_grads()
    lam = np.zeros(z)
    quarter_width = 0.25 * bounds.width
    for t in range(steps - 1, -1, -1):
        T, u, y = temps[t], actions[t], outputs[t]
        d_T, d_u = plant.vjp(t, T, u, lam)
        limit = None if limits is None else float(limits[t])
        c_T, c_u = stage_cost_grad(plant, cost_params, t, float(prices[t]), float(lower[t]),
                                   float(upper[t]), limit, T, u, float(scenario.w[t, 0]))
        d_y = (d_u + c_u) * squash_action_grad(y, bounds)
        d_y += rho * band_deviation_grad(linear_action(y, bounds), bounds.lower, bounds.upper) * quarter_width
        layer_grads, d_obs = mlp_backward(params, tapes[t], d_y)
        for acc, g in zip(grads, layer_grads):
            acc += g
        lam = d_T + c_T + observation_temperature_grad(d_obs, z, state_map)
    return DpcEpisode(loss, cost, penalty, grads)


def dpc_loss_and_grad(params: MlpParams, scenarios, setup, lookahead: int, rho: float,
                      workers: int = 1) -> tuple[float, list[np.ndarray]]:
    """Mean episode loss over a batch and its exact gradient."""
    scenarios = list(scenarios)
    episodes = map_episodes(partial(dpc_episode, params, setup=setup, lookahead=lookahead, rho=rho),
                            scenarios, workers)
    grads = params.zero_grads()
    for episode in episodes:
        for acc, g in zip(grads, episode.grads):
            acc += g
    n = len(episodes)
    return float(np.mean([e.loss for e in episodes])), [g / n for g in grads]


def evaluate_policy(params: MlpParams, kind: ControllerKind, scenarios, setup, lookahead: int) -> float:
    controller = PolicyController(ControllerSpec(kind, lookahead, policy=params), setup)
    return float(np.mean([run_episode(controller, s, setup).total for s in scenarios]))


def train_dpc(scenarios, setup, cfg: TrainRunConfig,
              params: MlpParams | None = None) -> tuple[MlpParams, LearningCurve]:
    scenarios = cfg.check_scenarios(scenarios)
    if params is None:
        params = init_policy(scenarios, setup, cfg.lookahead, cfg.hidden, sub_seed(cfg.seed, "dpc-init"))
    eval_set = scenarios[:cfg.eval_days]
    rng = sub_rng(cfg.seed, "dpc-batches")
    state = AdamState.for_params(params)
    curve = LearningCurve()
    start = time.perf_counter()
    episodes, updates = 0, 0
    curve.record(0, 0.0, evaluate_policy(params, ControllerKind.DPC, eval_set, setup, cfg.lookahead))

    for epoch in range(cfg.epochs):
        order = rng.permutation(len(scenarios))
        for b in range(0, len(order) - cfg.batch_size + 1, cfg.batch_size):
            batch = [scenarios[i] for i in order[b:b + cfg.batch_size]]
            loss, grads = dpc_loss_and_grad(params, batch, setup, cfg.lookahead, cfg.rho, cfg.workers)
            params, state = adam_step(state, params, grads, cfg.lr)
            episodes += len(batch)
            updates += 1
            if updates % cfg.eval_every == 0:
                mean_cost = evaluate_policy(params, ControllerKind.DPC, eval_set, setup, cfg.lookahead)
                curve.record(episodes, time.perf_counter() - start, mean_cost)
                logger.info("DPC epoch %d, %d episodes: batch loss %.2f, eval cost %.2f",
                            epoch, episodes, loss, mean_cost)

    if curve.episodes[-1] != episodes:
        curve.record(episodes, time.perf_counter() - start,
                     evaluate_policy(params, ControllerKind.DPC, eval_set, setup, cfg.lookahead))
    return params, curve
