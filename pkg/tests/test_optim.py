#!/usr/bin/env python3
"""
Trajectory rollouts, adjoint gradients, the projected solver and terminal-cost sensitivities
"""

import itertools
from dataclasses import replace

import numpy as np
import pytest

from hvacbench.controllers.base import ControllerKind, ControllerSpec, TerminalCostTable
from hvacbench.controllers.mpc import mpc_problem
from hvacbench.errors import ConfigurationError
from hvacbench.optim.problem import (
    TrajectoryProblem,
    problem_from_scenario,
    rollout_breakdown,
    rollout_cost,
    rollout_grad,
    simulate_states,
)
from hvacbench.optim.sensitivity import first_action_sensitivity, state_sensitivities
from hvacbench.optim.solver import (
    SolverOptions,
    box_start,
    default_starts,
    solve_multistart,
    solve_projected,
)
from hvacbench.scenarios.tariffs import planning_price_series, price_series
from hvacbench.thermal.cost import CostParams, PowerParams
from hvacbench.thermal.linearize import OperatingPoint, linearize
from hvacbench.thermal.model import ActionBounds, BuildingModel
from hvacbench.thermal.plant import BilinearPlant
from tests.conftest import make_day, minimum_power_plan, random_problem, tiny_building_setup

TIGHT = SolverOptions(step_rule="lbfgsb", tol=1e-10, max_iters=5000)


def _one_zone_problem(**overrides) -> TrajectoryProblem:
    model = BuildingModel(z=1, A=[[0.9]], B=[[0.1]], G=[[0.01, 0.001]])
    fields = dict(
        plant=BilinearPlant(model, PowerParams(cop=3.0, k1=0.0, k2=0.0)),
        x0=np.array([24.0]),
        w=np.array([[30.0, 500.0]]),
        prices=np.array([2.0]),
        comfort_lower=np.array([20.0]),
        comfort_upper=np.array([23.0]),
        bounds=ActionBounds.uniform(1, 0.2, 2.0, 10.0, 16.0),
        cost=CostParams(mu=20.0, nu=10.0, tau=0.5),
    )
    fields.update(overrides)
    return TrajectoryProblem(**fields)


def _finite_difference(p: TrajectoryProblem, u_seq: np.ndarray, h: float = 1e-6) -> np.ndarray:
    grad = np.zeros_like(u_seq)
    for idx in np.ndindex(u_seq.shape):
        plus, minus = u_seq.copy(), u_seq.copy()
        plus[idx] += h
        minus[idx] -= h
        grad[idx] = (rollout_cost(p, plus)[0] - rollout_cost(p, minus)[0]) / (2 * h)
    return grad


class TestRollout:
    """Forward simulation and cost accounting"""

    def test_hand_case(self):
        """6 kW at price 2 over half an hour plus one degree of discomfort"""
        p = _one_zone_problem()
        breakdown, states = rollout_breakdown(p, np.array([[1.0, 12.0]]))
        assert states[1, 0] == pytest.approx(21.2)
        assert breakdown.energy == pytest.approx(6.0)
        assert breakdown.comfort == pytest.approx(20.0)
        assert breakdown.power_limit == 0.0
        assert breakdown.energy_kwh == pytest.approx(3.0)
        assert breakdown.peak_power == pytest.approx(6.0)
        assert breakdown.total == pytest.approx(26.0)

    def test_terminal_and_power_limit(self):
        """theta * T_H and the PC penalty add to the total"""
        p = _one_zone_problem(terminal=np.array([1.0]), limits=np.array([5.0]))
        total, _ = rollout_cost(p, np.array([[1.0, 12.0]]))
        assert total == pytest.approx(26.0 + 21.2 + 10.0)

    def test_causality(self):
        """Changing a later action leaves earlier states untouched"""
        p, u = random_problem(0, horizon=5)
        base = simulate_states(p, u)
        u2 = u.copy()
        u2[3] = p.bounds.upper
        moved = simulate_states(p, u2)
        np.testing.assert_array_equal(base[:4], moved[:4])
        assert not np.allclose(base[4:], moved[4:])

    def test_wrong_shape(self):
        """Action sequences must be (H, z+1)"""
        p, _ = random_problem(0)
        with pytest.raises(ConfigurationError):
            rollout_cost(p, np.zeros((3, 3)))

    def test_minimum_power_plan(self):
        """Lowest flow and warmest supply at every step"""
        p, _ = random_problem(1, horizon=3)
        plan = minimum_power_plan(p)
        np.testing.assert_array_equal(plan[:, :-1], 0.2)
        np.testing.assert_array_equal(plan[:, -1], 16.0)


class TestRolloutGradient:
    """Adjoint gradient against central differences"""

    @pytest.mark.parametrize("seed", [0, 1, 2])
    @pytest.mark.parametrize("convex, pc", [(False, False), (True, False), (False, True)])
    def test_matches_finite_differences(self, seed, convex, pc):
        """Bilinear, convexified and power-limited problems"""
        p, u = random_problem(seed, z=2, horizon=4, convex=convex, pc=pc)
        np.testing.assert_allclose(rollout_grad(p, u), _finite_difference(p, u), rtol=1e-5, atol=1e-4)

    def test_last_action_only_affects_energy(self):
        """Without a terminal cost the last action's gradient is its power gradient alone"""
        p, u = random_problem(3, horizon=3, terminal=False)
        grad = rollout_grad(p, u)
        fd = _finite_difference(p, u)
        np.testing.assert_allclose(grad[-1], fd[-1], rtol=1e-5, atol=1e-4)
        assert grad[-1, -1] < 0.0


class TestProblemFromScenario:
    """Planning windows cut from a day"""

    def test_window(self):
        """The window slices disturbances, prices and comfort"""
        setup = tiny_building_setup()
        day = make_day("tou", steps=24)
        p = problem_from_scenario(day, setup.plant, setup.bounds, setup.cost, 10, 4, day.initial_temps)
        assert p.horizon == 4
        np.testing.assert_array_equal(p.w, day.w[10:14])
        np.testing.assert_array_equal(p.prices, price_series(day.tariff)[10:14])
        assert p.limits is None

    def test_window_past_end(self):
        """A window running past the end of the day is rejected"""
        setup = tiny_building_setup()
        day = make_day("tou", steps=24)
        with pytest.raises(ConfigurationError):
            problem_from_scenario(day, setup.plant, setup.bounds, setup.cost, 22, 4, day.initial_temps)

    def test_rtp_forecast_vs_realized(self):
        """Planning sees DAP unless realized prices are requested"""
        setup = tiny_building_setup()
        day = make_day("rtp", steps=24)
        plan = problem_from_scenario(day, setup.plant, setup.bounds, setup.cost, 0, 24, day.initial_temps)
        real = problem_from_scenario(day, setup.plant, setup.bounds, setup.cost, 0, 24, day.initial_temps,
                                     realized_prices=True)
        np.testing.assert_array_equal(plan.prices, planning_price_series(day.tariff))
        np.testing.assert_array_equal(real.prices, day.tariff.rtp)

    def test_pc_uses_program_weight(self):
        """PC days carry limits and the program's penalty weight"""
        setup = tiny_building_setup()
        day = make_day("pc", steps=24)
        p = problem_from_scenario(day, setup.plant, setup.bounds, setup.cost.model_copy(update={"nu": 1.0}),
                                  0, 24, day.initial_temps)
        assert p.cost.nu == day.tariff.nu
        assert p.limits.shape == (24,)


class TestSolver:
    """Projected trajectory solver"""

    @pytest.mark.parametrize("seed", [0, 1])
    def test_grid_oracle(self, seed):
        """On a one-zone, two-step convexified problem no grid point beats the solver"""
        p, _ = random_problem(seed, z=1, horizon=2, convex=True)
        u_star, report = solve_multistart(p, default_starts(p), TIGHT)

        axes = [np.linspace(lo, hi, 11) for lo, hi in zip(p.bounds.lower, p.bounds.upper)]
        grid_min = min(
            rollout_cost(p, np.array([[a, b], [c, d]]))[0]
            for a, b, c, d in itertools.product(axes[0], axes[1], axes[0], axes[1])
        )
        assert report.objective == pytest.approx(rollout_cost(p, u_star)[0], rel=1e-12)
        assert report.objective <= grid_min + 1e-6 * max(1.0, abs(grid_min))

    @pytest.mark.parametrize("rule", ["adam", "lbfgsb"])
    def test_descent(self, rule):
        """The solver never ends above its start and stays in the box"""
        p, u0 = random_problem(4, horizon=4)
        u, report = solve_projected(p, u0, SolverOptions(step_rule=rule, max_iters=200))
        assert report.objective <= rollout_cost(p, u0)[0]
        assert np.all(u >= p.bounds.lower) and np.all(u <= p.bounds.upper)
        assert report.step_rule == rule

    def test_optimal_start_needs_no_iterations(self):
        """Without comfort weight the minimum-power plan is optimal and stationary"""
        p, _ = random_problem(5, horizon=3, terminal=False)
        p = replace(p, cost=CostParams(mu=0.0, tau=1.0))
        u, report = solve_projected(p, minimum_power_plan(p))
        assert report.iterations == 0
        assert report.converged
        assert report.residual == 0.0
        np.testing.assert_array_equal(u, minimum_power_plan(p))

    def test_solves_to_minimum_power(self):
        """Starting mid-box the solver finds the minimum-power plan"""
        p, _ = random_problem(6, horizon=3, terminal=False)
        p = replace(p, cost=CostParams(mu=0.0, tau=1.0))
        u, report = solve_projected(p, box_start(p, 0.5, 0.5), SolverOptions(max_iters=2000))
        np.testing.assert_allclose(u, minimum_power_plan(p), atol=1e-6)
        assert report.converged

    def test_multistart_keeps_best(self):
        """The reported objective is the best over the starts"""
        p, _ = random_problem(7, horizon=3)
        starts = default_starts(p)
        single = [solve_projected(p, s, SolverOptions(max_iters=50))[1].objective for s in starts]
        _, report = solve_multistart(p, starts, SolverOptions(max_iters=50))
        assert report.objective == min(single)

    def test_multistart_iterations_within_budget(self):
        """The reported iterations are the winning start's and never exceed max_iters"""
        p, _ = random_problem(7, horizon=4)
        opts = SolverOptions(max_iters=20)
        starts = default_starts(p)
        _, report = solve_multistart(p, starts, opts)
        singles = [solve_projected(p, s, opts)[1] for s in starts]
        winner = min(range(len(starts)), key=lambda i: singles[i].objective)
        assert report.iterations <= opts.max_iters
        assert report.iterations == singles[winner].iterations

    @pytest.mark.parametrize("seed", [2, 3])
    def test_convex_starts_agree(self, seed):
        """On a convexified problem the least- and most-cooling starts reach the same objective"""
        p, _ = random_problem(seed, horizon=4, convex=True)
        _, low = solve_projected(p, box_start(p, 0.0, 1.0), TIGHT)
        _, high = solve_projected(p, box_start(p, 1.0, 0.0), TIGHT)
        assert low.objective == pytest.approx(high.objective, rel=1e-7, abs=1e-7)

    def test_default_starts(self):
        """Mid-box, low-cooling and warm starts"""
        p, u = random_problem(8, horizon=3)
        starts = default_starts(p, warm=u)
        assert len(starts) == 3
        np.testing.assert_allclose(starts[0][0], p.bounds.midpoint)
        np.testing.assert_allclose(starts[1][0], [0.2, 0.2, 16.0])
        np.testing.assert_array_equal(starts[2], u)


def _sensitivity_problem(theta: float) -> tuple[TrajectoryProblem, dict]:
    """One zone, one step, convexified: the optimal flow has a closed form."""
    model = BuildingModel(z=1, A=[[0.95]], B=[[0.05]], G=[[0.05, 0.01]])
    power = PowerParams(cop=3.0, k1=0.0076, k2=4.8865)
    point = OperatingPoint(mdot=np.array([1.0]), t_supply=13.0, temps=np.array([[25.0]]))
    plant = linearize(model, power, point)
    p = TrajectoryProblem(
        plant=plant,
        x0=np.array([25.0]),
        w=np.array([[30.0, 0.5]]),
        prices=np.array([1.0]),
        comfort_lower=np.array([16.0]),
        comfort_upper=np.array([28.0]),
        bounds=ActionBounds.uniform(1, 0.1, 30.0, 10.0, 16.0),
        cost=CostParams(tau=1.0),
        terminal=np.array([theta]),
    )
    b_flow = float(plant.input_matrices[0, 0, 0])       # 0.05 * (13 - 25)
    c_flow = (30.0 - 13.0) / power.cop
    flow = np.sqrt((-theta * b_flow - c_flow) / (3.0 * power.k1))
    return p, {"flow": flow, "d_flow": -b_flow / (6.0 * power.k1 * flow)}


class TestSensitivity:
    """Implicit differentiation of the convexified solution"""

    def test_closed_form(self):
        """Optimal flow and its theta-derivative match the closed form, supply temperature is pinned"""
        p, expected = _sensitivity_problem(20.0)
        u_star, _ = solve_projected(p, box_start(p, 0.5, 0.5), TIGHT)
        assert u_star[0, 0] == pytest.approx(expected["flow"], rel=1e-5)
        assert u_star[0, 1] == 10.0

        result = first_action_sensitivity(p, u_star, np.array([20.0]))
        assert result.jacobian.shape == (2, 1)
        assert result.jacobian[0, 0] == pytest.approx(expected["d_flow"], rel=1e-4)
        assert result.jacobian[1, 0] == 0.0
        np.testing.assert_array_equal(result.active, [[False, True]])
        assert not result.regularized

    def test_matches_resolve(self):
        """The derivative predicts how the solution moves when theta changes"""
        delta = 1e-2
        p0, _ = _sensitivity_problem(20.0)
        p1, _ = _sensitivity_problem(20.0 + delta)
        u0, _ = solve_projected(p0, box_start(p0, 0.5, 0.5), TIGHT)
        u1, _ = solve_projected(p1, box_start(p1, 0.5, 0.5), TIGHT)
        result = first_action_sensitivity(p0, u0, np.array([20.0]))
        np.testing.assert_allclose((u1[0] - u0[0]) / delta, result.jacobian[:, 0], rtol=5e-2, atol=1e-3)

    def test_all_pinned_gives_zero(self):
        """With every coordinate at a bound the Jacobian vanishes"""
        p, _ = random_problem(9, horizon=3, convex=True, terminal=False)
        p = replace(p, cost=CostParams(mu=0.0, tau=1.0))
        plan = minimum_power_plan(p)
        result = first_action_sensitivity(p, plan, np.zeros(2))
        assert result.active.all()
        np.testing.assert_array_equal(result.full, 0.0)

    def test_state_sensitivities(self):
        """Phi_1 is the first input matrix and Phi_0 is zero"""
        p, _ = random_problem(10, horizon=3, convex=True)
        phi = state_sensitivities(p.plant, 3)
        assert phi.shape == (4, 2, 9)
        np.testing.assert_array_equal(phi[0], 0.0)
        np.testing.assert_array_equal(phi[1][:, :3], p.plant.input_matrices[0])

    def test_bilinear_plant_rejected(self):
        """Sensitivities need the convexified plant"""
        p, u = random_problem(11, horizon=2)
        with pytest.raises(ConfigurationError):
            first_action_sensitivity(p, u, np.zeros(2))


class TestFeedbackSensitivity:
    """First-action derivatives wrt the measured temperatures and the previous action"""

    THETA = np.array([1.5, -0.5])

    def _rebuild(self):
        setup = tiny_building_setup()
        day = make_day(seed=4, heat=1.0)
        spec = ControllerSpec(ControllerKind.MPC_CL, 3, terminal=TerminalCostTable.zeros(2), solver=TIGHT)
        return lambda T, u_prev: mpc_problem(spec, setup, T, day, 3, u_prev, terminal=self.THETA)

    @staticmethod
    def _first_action(rebuild, T, u_prev):
        p = rebuild(T, u_prev)
        plan, _ = solve_multistart(p, default_starts(p), TIGHT)
        return p, plan

    def test_matches_resolve(self):
        """Central re-solve differences in the state and the previous action match the KKT Jacobians"""
        rebuild = self._rebuild()
        T, u_prev = np.array([24.0, 24.6]), np.array([0.9, 0.7, 13.0])
        p, plan = self._first_action(rebuild, T, u_prev)
        result = first_action_sensitivity(p, plan, self.THETA, rebuild, T, u_prev)
        assert result.wrt_state.shape == (3, 2)
        assert result.wrt_previous.shape == (3, 3)

        delta = 1e-3
        for which, base, jacobian in ((0, T, result.wrt_state), (1, u_prev, result.wrt_previous)):
            for i in range(base.size):
                firsts = []
                for sign in (1.0, -1.0):
                    args = [T.copy(), u_prev.copy()]
                    args[which][i] += sign * delta
                    firsts.append(self._first_action(rebuild, *args)[1][0])
                np.testing.assert_allclose((firsts[0] - firsts[1]) / (2 * delta), jacobian[:, i],
                                           rtol=5e-2, atol=1e-3)

    def test_theta_jacobian_unchanged(self):
        """Asking for feedback terms leaves the terminal-cost Jacobian as it was"""
        rebuild = self._rebuild()
        T, u_prev = np.array([24.0, 24.6]), np.array([0.9, 0.7, 13.0])
        p, plan = self._first_action(rebuild, T, u_prev)
        plain = first_action_sensitivity(p, plan, self.THETA)
        full = first_action_sensitivity(p, plan, self.THETA, rebuild, T, u_prev)
        np.testing.assert_allclose(full.jacobian, plain.jacobian, rtol=1e-10, atol=1e-12)
        assert plain.wrt_state is None and plain.wrt_previous is None

    def test_needs_state_and_previous_action(self):
        """A rebuild callback without the point to differentiate at is a configuration error"""
        rebuild = self._rebuild()
        p, plan = self._first_action(rebuild, np.array([24.0, 24.6]), np.array([0.9, 0.7, 13.0]))
        with pytest.raises(ConfigurationError):
            first_action_sensitivity(p, plan, self.THETA, rebuild)
