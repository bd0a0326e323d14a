"""
Implicit differentiation of a convexified MPC solution.

At a solution u*(theta) of the box-constrained problem, coordinates split into
an active set (pinned at a bound with the gradient pushing outward) and a free
set F. Stationarity on F, grad_F J(u*, theta) = 0, differentiated in theta gives

    H_FF du_F = -C_F dtheta,    H = d2J/du2,    C = d2J/du dtheta = Phi_H^T S^T

with Phi_k = dT_k/du the forward state sensitivities and S the state map.
Pinned coordinates do not move. The affine dynamics make Phi exact; the
Hessian picks up the fan cubic, the comfort band (zones outside it) and the
PC penalty.

The same factorisation gives the feedback derivatives of u*_0 with respect to
the measured temperatures and the previous action. Those parameters also move
the linearisation point, so their cross terms are differenced from the exact
gradient instead of written out.
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from hvacbench.errors import ConfigurationError, SingularSystemError
from hvacbench.optim.problem import TrajectoryProblem, rollout_grad, simulate_states
from hvacbench.thermal.linearize import LinearizedModel
from hvacbench.thermal.plant import plant_power, plant_power_grad

logger = logging.getLogger(__name__)

REGULARIZATION = 1e-8
FEEDBACK_STEP = 1e-5

ProblemBuilder = Callable[[np.ndarray, np.ndarray], TrajectoryProblem]


@dataclass(frozen=True)
class SensitivityResult:
    jacobian: np.ndarray        # (z+1, z): d u*_0 / d theta
    full: np.ndarray            # (H*(z+1), z): every action's sensitivity
    active: np.ndarray          # (H, z+1) bool
    regularized: bool = False
    wrt_state: np.ndarray | None = None     # (z+1, z): d u*_0 / d x0
    wrt_previous: np.ndarray | None = None  # (z+1, z+1): d u*_0 / d u_prev


def state_sensitivities(plant: LinearizedModel, horizon: int) -> np.ndarray:
    """Phi with shape (H+1, z, H*(z+1)); Phi[0] is zero."""
    z, m = plant.z, plant.z + 1
    phi = np.zeros((horizon + 1, z, horizon * m))
    for k in range(horizon):
        phi[k + 1] = plant.state_matrix @ phi[k]
        phi[k + 1][:, k * m:(k + 1) * m] += plant.input_matrices[k]
    return phi


def objective_hessian(p: TrajectoryProblem, u_seq: np.ndarray,
                      phi: np.ndarray | None = None) -> np.ndarray:
    plant = p.plant
    if not isinstance(plant, LinearizedModel):
        raise ConfigurationError("the exact Hessian needs a convexified (affine) plant")
    H, z, m = p.horizon, plant.z, plant.z + 1
    u_seq = p.check_actions(u_seq)
    if phi is None:
        phi = state_sensitivities(plant, H)
    states = simulate_states(p, u_seq)
    hess = np.zeros((H * m, H * m))

    for k in range(H):
        T = states[k]
        outside = (T < p.comfort_lower[k]) | (T > p.comfort_upper[k])
        if np.any(outside):
            rows = phi[k][outside]
            hess += 2.0 * p.cost.mu * rows.T @ rows

        u, t_out = u_seq[k], float(p.w[k, 0])
        curvature = np.zeros((m, m))
        curvature[:z, :z] = 6.0 * plant.power.k1 * float(np.sum(u[:-1]))
        block = float(p.prices[k]) * p.cost.tau * curvature
        if p.limits is not None:
            power = plant_power(plant, k, u, t_out)
            limit = float(p.limits[k])
            d_power = plant_power_grad(plant, k, u, t_out)
            violating = power > limit or power < 0.0
            slope = 2.0 * (max(0.0, power - limit) - max(0.0, -power))
            block = block + p.cost.nu * (2.0 * violating * np.outer(d_power, d_power) + slope * curvature)
        sl = slice(k * m, (k + 1) * m)
        hess[sl, sl] += block
    return hess


def active_set(p: TrajectoryProblem, u_seq: np.ndarray, grad: np.ndarray,
               atol: float = 1e-9, multiplier_tol: float = 1e-7) -> np.ndarray:
    """Coordinates at a bound whose scaled gradient pushes out of the box."""
    lo, width = p.bounds.lower, p.bounds.width
    scaled = grad * width
    at_lo = (u_seq - lo) <= atol * width
    at_hi = (lo + width - u_seq) <= atol * width
    return (at_lo & (scaled > multiplier_tol)) | (at_hi & (scaled < -multiplier_tol))


def _factor(matrix: np.ndarray) -> tuple[tuple, bool]:
    try:
        return scipy.linalg.cho_factor(matrix), False
    except np.linalg.LinAlgError:
        logger.warning("reduced Hessian not positive definite, adding %.0e*I", REGULARIZATION)
    try:
        return scipy.linalg.cho_factor(matrix + REGULARIZATION * np.eye(matrix.shape[0])), True
    except np.linalg.LinAlgError as e:
        raise SingularSystemError("reduced KKT system is singular even after regularisation") from e


def feedback_cross_terms(rebuild: ProblemBuilder, u_star: np.ndarray, state: np.ndarray,
                         previous: np.ndarray, step: float = FEEDBACK_STEP) -> np.ndarray:
    """
    d(grad_u J)/d[x0, u_prev] at fixed u, shape (H*(z+1), 2z+1). The
    operating point moves with both arguments, so each column is a central
    difference of the exact adjoint gradient of the rebuilt problem.
    """
    state = np.asarray(state, dtype=float)
    previous = np.asarray(previous, dtype=float)
    columns = []
    for which, base in enumerate((state, previous)):
        for i in range(base.size):
            h = step * max(1.0, abs(float(base[i])))
            grads = []
            for sign in (1.0, -1.0):
                args = [state.copy(), previous.copy()]
                args[which][i] += sign * h
                grads.append(rollout_grad(rebuild(*args), u_star).ravel())
            columns.append((grads[0] - grads[1]) / (2.0 * h))
    return np.column_stack(columns)


def first_action_sensitivity(p: TrajectoryProblem, u_star: np.ndarray, theta: np.ndarray,
                             rebuild: ProblemBuilder | None = None,
                             state: np.ndarray | None = None,
                             previous: np.ndarray | None = None) -> SensitivityResult:
    """
    With `rebuild(x0, u_prev)` (returning the problem `p` came from, same
    theta) the feedback Jacobians wrt the initial temperatures and the
    previous action come out of the same reduced KKT factorisation.
    """
    plant = p.plant
    if not isinstance(plant, LinearizedModel):
        raise ConfigurationError("sensitivities are defined for the convexified problem only")
    if rebuild is not None and (state is None or previous is None):
        raise ConfigurationError("feedback sensitivities need the state and previous action")
    p = replace(p, terminal=np.asarray(theta, dtype=float))
    u_star = p.check_actions(u_star)
    H, z, m = p.horizon, plant.z, plant.z + 1

    phi = state_sensitivities(plant, H)
    hess = objective_hessian(p, u_star, phi)
    cross = phi[H].T @ plant.model.state_map.T          # (H*m, z)
    if rebuild is not None:
        cross = np.hstack((cross, feedback_cross_terms(rebuild, u_star, state, previous)))
    active = active_set(p, u_star, rollout_grad(p, u_star))
    free = np.flatnonzero(~active.ravel())

    full = np.zeros((H * m, cross.shape[1]))
    regularized = False
    if free.size:
        factor, regularized = _factor(hess[np.ix_(free, free)])
        full[free] = -scipy.linalg.cho_solve(factor, cross[free])
    wrt_state = wrt_previous = None
    if rebuild is not None:
        wrt_state = full[:m, z:2 * z].copy()
        wrt_previous = full[:m, 2 * z:].copy()
    return SensitivityResult(jacobian=full[:m, :z].copy(), full=full[:, :z].copy(), active=active,
                             regularized=regularized, wrt_state=wrt_state,
                             wrt_previous=wrt_previous)
