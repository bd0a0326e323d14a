"""
Reinforcement-learning controller trained with PPO.

The update sees nothing but experience tuples: observations, the pre-clip
Gaussian samples with their log-probabilities, rewards (negated step costs)
and episode boundaries. Advantages come from GAE over a separate critic.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from hvacbench.errors import ConfigurationError
from hvacbench.nn.adam import AdamState, adam_step
from hvacbench.nn.mlp import MlpParams, mlp_backward, mlp_forward
from hvacbench.nn.policy import PolicyMode, gaussian_log_prob, gaussian_log_prob_grads, policy_act
from hvacbench.optim.problem import stage_cost
from hvacbench.scenarios.observation import make_observation
from hvacbench.scenarios.tariffs import limit_series, price_series
from hvacbench.seeding import sub_rng, sub_seed
from hvacbench.thermal.model import step_dynamics
from hvacbench.training.common import TrainRunConfig, init_policy
from hvacbench.training.curves import LearningCurve

logger = logging.getLogger(__name__)

MAX_LOG_RATIO = 20.0


class PpoConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    clip: float = Field(0.2, gt=0, lt=1)
    gae_lambda: float = Field(0.95, ge=0, le=1)
    gamma: float = Field(0.99, ge=0, le=1)
    epochs: int = Field(4, ge=1)
    minibatch_size: int = Field(256, ge=1)
    value_coef: float = Field(0.5, ge=0)
    lr: float = Field(5e-5, ge=0)
    experience_size: int = Field(2880, ge=1)
    iterations: int = Field(300, ge=1)
    log_std_init: float = -0.5


@dataclass(frozen=True)
class ExperienceTuple:
    obs: np.ndarray
    sample: np.ndarray          # pre-clip action sample
    log_prob: float
    reward: float
    next_obs: np.ndarray
    done: bool


@dataclass(frozen=True)
class ExperienceBatch:
    obs: np.ndarray             # (n, d)
    samples: np.ndarray         # (n, z+1)
    log_probs: np.ndarray       # (n,)
    rewards: np.ndarray
    next_obs: np.ndarray
    dones: np.ndarray           # (n,) bool
    episodes: int

    def __len__(self) -> int:
        return self.rewards.size

    def __getitem__(self, i: int) -> ExperienceTuple:
        return ExperienceTuple(self.obs[i], self.samples[i], float(self.log_probs[i]),
                               float(self.rewards[i]), self.next_obs[i], bool(self.dones[i]))

    @classmethod
    def from_tuples(cls, tuples: list[ExperienceTuple]) -> "ExperienceBatch":
        if not tuples:
            raise ConfigurationError("empty experience batch")
        dones = np.array([e.done for e in tuples], dtype=bool)
        return cls(
            obs=np.array([e.obs for e in tuples]),
            samples=np.array([e.sample for e in tuples]),
            log_probs=np.array([e.log_prob for e in tuples]),
            rewards=np.array([e.reward for e in tuples]),
            next_obs=np.array([e.next_obs for e in tuples]),
            dones=dones,
            episodes=int(dones.sum()),
        )

    def episode_returns(self) -> np.ndarray:
        """Undiscounted reward sum of every episode in the batch."""
        ends = np.flatnonzero(self.dones)
        starts = np.concatenate(([0], ends[:-1] + 1))
        return np.array([self.rewards[s:e + 1].sum() for s, e in zip(starts, ends)])


@dataclass(frozen=True)
class GaeResult:
    advantages: np.ndarray          # normalised
    raw_advantages: np.ndarray
    value_targets: np.ndarray
    values: np.ndarray


def collect_experience(actor: MlpParams, scenarios, setup, cfg: PpoConfig, lookahead: int,
                       rng: np.random.Generator) -> ExperienceBatch:
    """Whole stochastic episodes until at least `experience_size` tuples are stored."""
    scenarios = list(scenarios)
    if not scenarios:
        raise ConfigurationError("experience collection needs scenarios")
    state_map = setup.model.state_map
    tuples: list[ExperienceTuple] = []
    order: list[int] = []
    while len(tuples) < cfg.experience_size:
        if not order:
            order = list(rng.permutation(len(scenarios)))
        scenario = scenarios[order.pop(0)]
        cost_params = setup.cost_for(scenario.tariff)
        prices = price_series(scenario.tariff)
        limits = limit_series(scenario.tariff)
        T = np.asarray(scenario.initial_temps, dtype=float)
        obs = make_observation(T, scenario, 0, lookahead, state_map)
        for t in range(scenario.steps):
            out = policy_act(actor, obs, setup.bounds, PolicyMode.STOCHASTIC, rng)
            u = out.action.as_vector()
            limit = None if limits is None else float(limits[t])
            e, c, o, _ = stage_cost(setup.plant, cost_params, t, float(prices[t]),
                                    float(scenario.comfort.lower[t]), float(scenario.comfort.upper[t]),
                                    limit, T, u, float(scenario.w[t, 0]))
            T = step_dynamics(setup.model, T, out.action, scenario.exogenous(t))
            next_obs = make_observation(T, scenario, t + 1, lookahead, state_map)
            tuples.append(ExperienceTuple(obs, out.sample, out.log_prob, -(e + c + o), next_obs,
                                          t == scenario.steps - 1))
            obs = next_obs
    return ExperienceBatch.from_tuples(tuples)


def compute_gae(batch: ExperienceBatch, gamma: float, lam: float, critic: MlpParams) -> GaeResult:
    values = mlp_forward(critic, batch.obs)[0][:, 0]
    next_values = mlp_forward(critic, batch.next_obs)[0][:, 0]
    not_done = 1.0 - batch.dones.astype(float)
    deltas = batch.rewards + gamma * next_values * not_done - values

    raw = np.empty_like(deltas)
    running = 0.0
    for t in range(len(deltas) - 1, -1, -1):
        running = deltas[t] + gamma * lam * not_done[t] * running
        raw[t] = running
    advantages = (raw - raw.mean()) / (raw.std() + 1e-8)
    return GaeResult(advantages, raw, raw + values, values)


def clipped_surrogate(ratio: np.ndarray, advantages: np.ndarray, clip: float) -> np.ndarray:
    """Per-sample min(ratio * A, clip(ratio, 1 - clip, 1 + clip) * A)."""
    return np.minimum(ratio * advantages, np.clip(ratio, 1.0 - clip, 1.0 + clip) * advantages)


def actor_loss_and_grad(actor: MlpParams, obs: np.ndarray, samples: np.ndarray, old_log_probs: np.ndarray,
                        advantages: np.ndarray, clip: float) -> tuple[float, list[np.ndarray], np.ndarray]:
    """Clipped surrogate loss, its gradient, and the log-ratio of every sample."""
    mean, tape = mlp_forward(actor, obs)
    log_probs = gaussian_log_prob(samples, mean, actor.log_std)
    log_ratio = log_probs - old_log_probs
    ratio = np.exp(np.clip(log_ratio, -MAX_LOG_RATIO, MAX_LOG_RATIO))
    unclipped = ratio * advantages
    surrogate = clipped_surrogate(ratio, advantages, clip)
    n = len(advantages)
    loss = -float(surrogate.mean())

    d_log_prob = -advantages * ratio * (unclipped <= surrogate) / n
    d_mean, d_log_std = gaussian_log_prob_grads(samples, mean, actor.log_std)
    grads, _ = mlp_backward(actor, tape, d_log_prob[:, None] * d_mean)
    grads[-1] = np.sum(d_log_prob[:, None] * d_log_std, axis=0)
    return loss, grads, log_ratio


def critic_loss_and_grad(critic: MlpParams, obs: np.ndarray,
                         targets: np.ndarray, coef: float) -> tuple[float, list[np.ndarray]]:
    values, tape = mlp_forward(critic, obs)
    err = values[:, 0] - targets
    loss = coef * float(np.mean(err ** 2))
    grads, _ = mlp_backward(critic, tape, (2.0 * coef * err / err.size)[:, None])
    return loss, grads


@dataclass
class PpoState:
    actor: MlpParams
    critic: MlpParams
    actor_opt: AdamState
    critic_opt: AdamState


def ppo_update(batch: ExperienceBatch, gae: GaeResult, state: PpoState, cfg: PpoConfig,
               rng: np.random.Generator) -> tuple[PpoState, dict]:
    actor, critic = state.actor, state.critic
    actor_opt, critic_opt = state.actor_opt, state.critic_opt
    n = len(batch)
    actor_losses, critic_losses, skipped = [], [], 0
    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, cfg.minibatch_size):
            idx = perm[start:start + cfg.minibatch_size]
            a_loss, a_grads, log_ratio = actor_loss_and_grad(
                actor, batch.obs[idx], batch.samples[idx], batch.log_probs[idx],
                gae.advantages[idx], cfg.clip)
            if np.any(np.abs(log_ratio) > MAX_LOG_RATIO):
                skipped += 1
                logger.warning("PPO minibatch skipped: log-ratio %.1f exceeds %.0f",
                               float(np.max(np.abs(log_ratio))), MAX_LOG_RATIO)
                continue
            c_loss, c_grads = critic_loss_and_grad(critic, batch.obs[idx], gae.value_targets[idx],
                                                   cfg.value_coef)
            actor, actor_opt = adam_step(actor_opt, actor, a_grads, cfg.lr)
            critic, critic_opt = adam_step(critic_opt, critic, c_grads, cfg.lr)
            actor_losses.append(a_loss)
            critic_losses.append(c_loss)
    stats = {
        "actor_loss": float(np.mean(actor_losses)) if actor_losses else float("nan"),
        "critic_loss": float(np.mean(critic_losses)) if critic_losses else float("nan"),
        "skipped_minibatches": skipped,
    }
    return PpoState(actor, critic, actor_opt, critic_opt), stats


def train_rlc(scenarios, setup, cfg: TrainRunConfig,
              ppo: PpoConfig | None = None) -> tuple[MlpParams, MlpParams, LearningCurve]:
    """Returns (actor, critic, curve); the curve tracks the mean cost of each experience batch."""
    ppo = ppo or PpoConfig()
    scenarios = cfg.check_scenarios(scenarios)
    actor = init_policy(scenarios, setup, cfg.lookahead, cfg.hidden, sub_seed(cfg.seed, "rlc-actor"),
                        log_std=ppo.log_std_init)
    critic = init_policy(scenarios, setup, cfg.lookahead, cfg.hidden, sub_seed(cfg.seed, "rlc-critic"),
                         output_dim=1, output_scale=1.0)
    state = PpoState(actor, critic, AdamState.for_params(actor), AdamState.for_params(critic))
    rng = sub_rng(cfg.seed, "ppo")
    curve = LearningCurve()
    start = time.perf_counter()
    episodes = 0

    for it in range(ppo.iterations):
        batch = collect_experience(state.actor, scenarios, setup, ppo, cfg.lookahead, rng)
        gae = compute_gae(batch, ppo.gamma, ppo.gae_lambda, state.critic)
        state, stats = ppo_update(batch, gae, state, ppo, rng)
        episodes += batch.episodes
        mean_cost = -float(batch.episode_returns().mean())
        curve.record(episodes, time.perf_counter() - start, mean_cost)
        logger.info("RLC iteration %d, %d episodes: mean cost %.2f, actor loss %.4f, critic loss %.2f",
                    it, episodes, mean_cost, stats["actor_loss"], stats["critic_loss"])
    return state.actor, state.critic, curve
