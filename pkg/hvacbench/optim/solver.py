"""
Box-constrained trajectory solver.

The search runs in box-normalised coordinates v = (u - lo) / (hi - lo) in
[0, 1], where one step size suits flows and supply temperature alike.
Stationarity is measured by the projected-gradient residual
||v - clip(v - g_v)||_inf.

Step rules:
  adam    projected Adam with step acceptance. A trial step is kept only if
          the objective does not increase; otherwise the step size halves.
  lbfgsb  scipy's bound-constrained quasi-Newton method.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.optimize import minimize

from hvacbench.errors import HvacBenchError, NonFiniteStateError, SolverDivergenceError
from hvacbench.optim.problem import TrajectoryProblem, rollout_cost, rollout_grad

logger = logging.getLogger(__name__)


class SolverOptions(BaseModel):
    model_config = ConfigDict(frozen=True)

    max_iters: int = Field(500, ge=0)
    tol: float = Field(1e-6, gt=0)
    step_rule: Literal["adam", "lbfgsb"] = "adam"
    lr: float = Field(0.05, gt=0)
    lr_growth: float = Field(1.1, ge=1.0)
    min_lr: float = Field(1e-12, gt=0)
    beta1: float = Field(0.9, ge=0, lt=1)
    beta2: float = Field(0.999, ge=0, lt=1)


@dataclass(frozen=True)
class SolveReport:
    objective: float
    residual: float
    iterations: int
    converged: bool
    wall_time: float
    step_rule: str = "adam"


class _Scaled:
    """Objective and gradient of a problem seen in box-normalised coordinates."""

    def __init__(self, p: TrajectoryProblem):
        self.p = p
        self.lo = np.tile(p.bounds.lower, (p.horizon, 1))
        self.width = np.tile(p.bounds.width, (p.horizon, 1))

    def to_u(self, v: np.ndarray) -> np.ndarray:
        return self.lo + self.width * v

    def to_v(self, u: np.ndarray) -> np.ndarray:
        return (u - self.lo) / self.width

    def value(self, v: np.ndarray) -> float:
        try:
            f, _ = rollout_cost(self.p, self.to_u(v))
        except NonFiniteStateError as e:
            raise SolverDivergenceError(str(e)) from e
        return f

    def value_and_grad(self, v: np.ndarray) -> tuple[float, np.ndarray]:
        u = self.to_u(v)
        try:
            f, states = rollout_cost(self.p, u)
        except NonFiniteStateError as e:
            raise SolverDivergenceError(str(e)) from e
        return f, rollout_grad(self.p, u, states) * self.width


def projected_residual(v: np.ndarray, g: np.ndarray) -> float:
    return float(np.max(np.abs(v - np.clip(v - g, 0.0, 1.0))))


def _adam(obj: _Scaled, v: np.ndarray, f: float, g: np.ndarray, res: float,
          opts: SolverOptions) -> tuple[np.ndarray, float, float, int]:
    m = np.zeros_like(v)
    s = np.zeros_like(v)
    lr, t, it = opts.lr, 0, 0
    while it < opts.max_iters and res >= opts.tol and lr >= opts.min_lr:
        it += 1
        m_trial = opts.beta1 * m + (1.0 - opts.beta1) * g
        s_trial = opts.beta2 * s + (1.0 - opts.beta2) * g * g
        m_hat = m_trial / (1.0 - opts.beta1 ** (t + 1))
        s_hat = s_trial / (1.0 - opts.beta2 ** (t + 1))
        v_trial = np.clip(v - lr * m_hat / (np.sqrt(s_hat) + 1e-12), 0.0, 1.0)
        f_trial = obj.value(v_trial)
        if f_trial <= f:
            _, g = obj.value_and_grad(v_trial)
            v, f, m, s, t = v_trial, f_trial, m_trial, s_trial, t + 1
            res = projected_residual(v, g)
            lr *= opts.lr_growth
        else:
            lr *= 0.5
    return v, f, res, it


def _lbfgsb(obj: _Scaled, v: np.ndarray, f: float, res: float,
            opts: SolverOptions) -> tuple[np.ndarray, float, float, int]:
    def fun(x):
        value, grad = obj.value_and_grad(x.reshape(v.shape))
        return value, grad.ravel()

    result = minimize(
        fun,
        v.ravel(),
        jac=True,
        method="L-BFGS-B",
        bounds=[(0.0, 1.0)] * v.size,
        options={"maxiter": opts.max_iters, "gtol": 0.1 * opts.tol, "ftol": 1e-15},
    )
    v_new = np.clip(result.x.reshape(v.shape), 0.0, 1.0)
    f_new, g_new = obj.value_and_grad(v_new)
    if f_new > f:
        return v, f, res, int(result.nit)
    return v_new, f_new, projected_residual(v_new, g_new), int(result.nit)


def solve_projected(p: TrajectoryProblem, init: np.ndarray,
                    opts: SolverOptions | None = None) -> tuple[np.ndarray, SolveReport]:
    opts = opts or SolverOptions()
    start = time.perf_counter()
    obj = _Scaled(p)
    v = np.clip(obj.to_v(p.check_actions(init)), 0.0, 1.0)
    f, g = obj.value_and_grad(v)
    if not np.isfinite(f):
        raise SolverDivergenceError("objective at the initial point is not finite")
    res = projected_residual(v, g)

    iterations = 0
    if res >= opts.tol:
        if opts.step_rule == "adam":
            v, f, res, iterations = _adam(obj, v, f, g, res, opts)
        else:
            v, f, res, iterations = _lbfgsb(obj, v, f, res, opts)

    report = SolveReport(
        objective=f,
        residual=res,
        iterations=iterations,
        converged=res < opts.tol,
        wall_time=time.perf_counter() - start,
        step_rule=opts.step_rule,
    )
    return p.bounds.clip(obj.to_u(v)), report


def box_start(p: TrajectoryProblem, fraction_flow: float, fraction_supply: float) -> np.ndarray:
    """Constant plan at the given fractions of the flow and supply-temperature ranges."""
    b = p.bounds
    u = np.append(b.mdot_lo + fraction_flow * (b.mdot_hi - b.mdot_lo),
                  b.tsupply_lo + fraction_supply * (b.tsupply_hi - b.tsupply_lo))
    return np.tile(u, (p.horizon, 1))


def default_starts(p: TrajectoryProblem, warm: np.ndarray | None = None) -> list[np.ndarray]:
    """Mid-box and low-cooling starts, plus the warm start (or high cooling without one)."""
    starts = [box_start(p, 0.5, 0.5), box_start(p, 0.0, 1.0)]
    starts.append(box_start(p, 1.0, 0.0) if warm is None else p.bounds.clip(warm))
    return starts


def solve_multistart(p: TrajectoryProblem, starts: list[np.ndarray],
                     opts: SolverOptions | None = None) -> tuple[np.ndarray, SolveReport]:
    """
    Best of several local solves; ties keep the earliest start. The report
    carries the winning start's iteration count and the wall time of all
    starts together.
    """
    best: tuple[np.ndarray, SolveReport] | None = None
    total_time = 0.0
    failures = []
    for i, init in enumerate(starts):
        try:
            u, report = solve_projected(p, init, opts)
        except HvacBenchError as e:
            logger.debug("start %d failed: %s", i, e)
            failures.append(e)
            continue
        total_time += report.wall_time
        if best is None or report.objective < best[1].objective:
            best = (u, report)
    if best is None:
        raise SolverDivergenceError(f"all {len(starts)} starts failed: {failures[-1]}")
    u, report = best
    return u, SolveReport(report.objective, report.residual, report.iterations, report.converged,
                          total_time, report.step_rule)
