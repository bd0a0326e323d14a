#!/usr/bin/env python3
"""
Rule-based, optimisation-based and policy controllers
"""

from dataclasses import replace

import numpy as np
import pytest

import hvacbench.controllers.mpc as mpc_module
from hvacbench.controllers.base import (
    ControllerKind,
    ControllerSpec,
    TerminalCostTable,
    act,
    load_terminal_table,
    make_controller,
    save_terminal_table,
)
from hvacbench.controllers.mpc import (
    MpcController,
    OptController,
    mpc_act,
    mpc_problem,
    opt_plan,
    opt_problem,
    shift_plan,
)
from hvacbench.controllers.policy import PolicyController
from hvacbench.controllers.rbc import RbcConfig, RbcController, active_setpoint, rbc_act, rbc_grid_search
from hvacbench.errors import ConfigurationError, SolverDivergenceError
from hvacbench.harness.simulate import run_episode
from hvacbench.nn.mlp import init_mlp
from hvacbench.optim.problem import rollout_cost
from hvacbench.optim.solver import SolverOptions, box_start
from hvacbench.scenarios.observation import observation_size
from hvacbench.scenarios.tariffs import RtpTariff, TouTariff
from hvacbench.thermal.cost import CostParams
from hvacbench.thermal.setup import BuildingSetup
from tests.conftest import TINY_TAU, make_day, minimum_power_plan, tiny_building_setup

FAST = SolverOptions(max_iters=100)


def _step(hour: float, steps: int = 288) -> int:
    return int(round(hour * steps / 24))


class TestRbc:
    """Rule-based pre-cooling"""

    @pytest.mark.parametrize("hour, expected", [(10.0, 21.0), (13.0, 24.0), (20.0, 23.5), (7.0, 23.5), (18.0, 23.5)])
    def test_tou_setpoints(self, hour, expected):
        """Pre-cool from 8:00, float during the 12-18 peak, baseline otherwise"""
        day = make_day("tou", z=2, steps=288)
        assert active_setpoint(RbcConfig(), day, _step(hour)) == expected

    def test_pc_uses_event_window(self):
        """Under PC the event window [12:30, 16:30) drives the setpoints"""
        day = make_day("pc", z=2, steps=288)
        assert active_setpoint(RbcConfig(), day, _step(12.0)) == 21.0
        assert active_setpoint(RbcConfig(), day, _step(13.0)) == 24.0
        assert active_setpoint(RbcConfig(), day, _step(16.5)) == 23.5

    def test_proportional_flow(self, tiny_setup):
        """Flow follows the setpoint error, cold air whenever a zone is warm"""
        day = make_day("tou", z=2, steps=288)
        u = rbc_act(RbcConfig(gain=1.0), tiny_setup.bounds, np.array([24.5, 22.0]), day, _step(20.0))
        np.testing.assert_allclose(u.mdot, [1.0, 0.2])
        assert u.t_supply == 10.0

    def test_idle_when_cool(self, tiny_setup):
        """Below the setpoint the controller idles at minimum flow and warm supply"""
        day = make_day("tou", z=2, steps=288)
        u = rbc_act(RbcConfig(), tiny_setup.bounds, np.array([20.0, 20.5]), day, _step(20.0))
        np.testing.assert_allclose(u.mdot, [0.2, 0.2])
        assert u.t_supply == 16.0

    def test_flow_saturates(self, tiny_setup):
        """Large errors clip at the maximum flow"""
        day = make_day("tou", z=2, steps=288)
        u = rbc_act(RbcConfig(gain=5.0), tiny_setup.bounds, np.array([27.0, 27.0]), day, _step(13.0))
        np.testing.assert_allclose(u.mdot, [2.0, 2.0])

    def test_episode_actions_in_bounds(self, tiny_setup, tiny_day):
        """A full episode stays inside the action box"""
        result = run_episode(make_controller(ControllerSpec(ControllerKind.RBC), tiny_setup), tiny_day, tiny_setup)
        assert np.all(result.actions >= tiny_setup.bounds.lower - 1e-12)
        assert np.all(result.actions <= tiny_setup.bounds.upper + 1e-12)
        assert result.steps == tiny_day.steps

    def test_comfort_check(self):
        """Setpoints outside the comfort band are reported"""
        with pytest.raises(ConfigurationError):
            RbcConfig(precool_setpoint=19.0).check_comfort(20.0, 24.5)

    def test_reset_checks_day_schedule(self, tiny_setup, tiny_day):
        """A config pre-cooling below the occupied band is refused when the day starts"""
        controller = RbcController(RbcConfig(precool_setpoint=19.5), tiny_setup)
        with pytest.raises(ConfigurationError):
            controller.reset(tiny_day, tiny_day.initial_temps)
        RbcController(RbcConfig(), tiny_setup).reset(tiny_day, tiny_day.initial_temps)

    def test_rtp_window_on_coarse_day(self):
        """On a 3-hour-step RTP day the 09:00 price spike is the event window, 03:00 is not"""
        dap = np.ones(8)
        dap[3] = 10.0
        day = replace(make_day("rtp", steps=8), tariff=RtpTariff(rtp=dap, dap=dap))
        cfg = RbcConfig(precool_start=6.0, rtp_window_hours=1)
        assert active_setpoint(cfg, day, 1) == cfg.baseline_setpoint
        assert active_setpoint(cfg, day, 2) == cfg.precool_setpoint
        assert active_setpoint(cfg, day, 3) == cfg.event_setpoint
        assert active_setpoint(cfg, day, 4) == cfg.baseline_setpoint

    def test_unordered_setpoints(self):
        """Pre-cooling above the event setpoint is invalid"""
        with pytest.raises(ValueError):
            RbcConfig(precool_setpoint=25.0, event_setpoint=24.0)


class TestRbcGridSearch:
    """Exhaustive RBC tuning"""

    def test_tie_goes_to_earliest_start(self, tiny_setup, tiny_days):
        """With pre-cooling equal to the baseline, every start costs the same and the earliest wins"""
        base = RbcConfig(precool_setpoint=23.5, baseline_setpoint=23.5)
        best, table = rbc_grid_search(tiny_days, tiny_setup, {"precool_start": [11.0, 9.0, 10.0]}, base=base)
        assert best.precool_start == 9.0
        assert [cfg.precool_start for cfg, _ in table] == [9.0, 10.0, 11.0]
        costs = [cost for _, cost in table]
        assert costs[0] == costs[1] == costs[2]

    def test_best_is_minimum(self, tiny_setup, tiny_days):
        """The returned config has the lowest mean cost in the table"""
        best, table = rbc_grid_search(tiny_days, tiny_setup, {"precool_start": [6.0, 9.0],
                                                              "gain": [0.5, 2.0]})
        assert len(table) == 4
        assert dict((c, v) for c, v in table)[best] == min(v for _, v in table)

    def test_uncomfortable_candidates_skipped(self, tiny_setup, tiny_days):
        """Pre-cooling setpoints below the occupied band never enter the table"""
        best, table = rbc_grid_search(tiny_days, tiny_setup, {"precool_setpoint": [19.0, 21.0, 22.0]})
        assert sorted(cfg.precool_setpoint for cfg, _ in table) == [21.0, 22.0]
        assert best.precool_setpoint >= 20.0

    def test_no_comfortable_candidate(self, tiny_setup, tiny_days):
        """A grid with every candidate outside comfort is a configuration error"""
        with pytest.raises(ConfigurationError):
            rbc_grid_search(tiny_days, tiny_setup, {"event_setpoint": [25.0, 26.0]})

    def test_unknown_field(self, tiny_setup, tiny_days):
        """Grid keys must be RBC fields"""
        with pytest.raises(ConfigurationError):
            rbc_grid_search(tiny_days, tiny_setup, {"setpoint": [21.0]})

    def test_no_scenarios(self, tiny_setup):
        """An empty scenario list is rejected"""
        with pytest.raises(ConfigurationError):
            rbc_grid_search([], tiny_setup, {"precool_start": [8.0]})


class TestTerminalCostTable:
    """Hourly terminal-cost tables"""

    @pytest.mark.parametrize("t, k, expected", [(0, 1, 0), (100, 12, 9), (280, 12, 23), (287, 1, 23)])
    def test_index_for(self, t, k, expected):
        """The interval of the horizon end, capped at the last step"""
        assert TerminalCostTable.zeros(5).index_for(t, k, 288) == expected

    def test_must_cover_day(self):
        """Intervals must cover 24 hours"""
        with pytest.raises(ConfigurationError):
            TerminalCostTable(np.zeros((23, 5)))

    def test_save_and_load(self, tmp_path):
        """Tables survive a save/load"""
        table = TerminalCostTable(np.arange(48.0).reshape(24, 2))
        loaded = load_terminal_table(save_terminal_table(tmp_path / "t.json", table, lookahead=3))
        np.testing.assert_array_equal(loaded.thetas, table.thetas)

    def test_missing(self, tmp_path):
        """A missing table is a configuration error"""
        with pytest.raises(ConfigurationError):
            load_terminal_table(tmp_path / "none.json")


class TestControllerSpec:
    """Specs and artifacts"""

    def test_names(self):
        """Lookahead kinds carry K in their name"""
        assert ControllerSpec(ControllerKind.RBC).name == "RBC"
        assert ControllerSpec(ControllerKind.MPC, lookahead=6).name == "MPC-K6"
        spec = ControllerSpec(ControllerKind.MPC_CL, lookahead=12, terminal=TerminalCostTable.zeros(5))
        assert spec.name == "MPC-CL-K12"

    def test_policy_required(self):
        """DPC and RLC need a trained network"""
        with pytest.raises(ConfigurationError):
            ControllerSpec(ControllerKind.DPC, lookahead=3)
        with pytest.raises(ConfigurationError):
            ControllerSpec(ControllerKind.RLC, lookahead=3)

    def test_table_required(self):
        """MPC-CL needs a terminal-cost table and nothing else takes one"""
        with pytest.raises(ConfigurationError):
            ControllerSpec(ControllerKind.MPC_CL, lookahead=3)
        with pytest.raises(ConfigurationError):
            ControllerSpec(ControllerKind.MPC, lookahead=3, terminal=TerminalCostTable.zeros(5))

    def test_heads_match_kind(self):
        """RLC needs a log_std head, DPC must not have one"""
        squash = init_mlp(4, [3], 3, seed=0)
        gaussian = init_mlp(4, [3], 3, seed=0, log_std=-0.5)
        with pytest.raises(ConfigurationError):
            ControllerSpec(ControllerKind.RLC, lookahead=1, policy=squash)
        with pytest.raises(ConfigurationError):
            ControllerSpec(ControllerKind.DPC, lookahead=1, policy=gaussian)

    def test_act_step_range(self, tiny_setup, tiny_day):
        """act checks the step index"""
        with pytest.raises(ConfigurationError):
            act(ControllerSpec(ControllerKind.RBC), tiny_setup, tiny_day.initial_temps, tiny_day, tiny_day.steps)

    def test_act_returns_timing(self, tiny_setup, tiny_day):
        """act returns an in-box action and a non-negative time"""
        action, elapsed = act(ControllerSpec(ControllerKind.RBC), tiny_setup, tiny_day.initial_temps, tiny_day, 3)
        assert tiny_setup.bounds.contains(action.as_vector())
        assert elapsed >= 0.0


class TestOpt:
    """Whole-day optimal plan"""

    def test_minimum_power_without_comfort(self, tiny_setup, tiny_day):
        """With mu = 0 and positive prices on a hot day OPT runs at minimum power"""
        setup = BuildingSetup(tiny_setup.model, tiny_setup.bounds, cost=CostParams(mu=0.0, tau=TINY_TAU))
        controller = OptController(setup, SolverOptions(max_iters=2000))
        result = run_episode(controller, tiny_day, setup)
        np.testing.assert_allclose(result.actions, minimum_power_plan(opt_problem(tiny_day, setup)), atol=1e-6)
        assert controller.report.converged

    def test_plan_improves_on_every_start(self, tiny_setup, tiny_day):
        """The reported objective is the plan's day cost and beats each box start"""
        plan, report = opt_plan(tiny_day, tiny_setup, SolverOptions(max_iters=300))
        p = opt_problem(tiny_day, tiny_setup)
        assert plan.shape == (tiny_day.steps, tiny_setup.z + 1)
        assert report.objective == pytest.approx(rollout_cost(p, plan)[0])
        for start in (box_start(p, 0.5, 0.5), box_start(p, 0.0, 1.0), box_start(p, 1.0, 0.0)):
            assert report.objective <= rollout_cost(p, start)[0] + 1e-9


class TestMpc:
    """Receding-horizon controllers"""

    def test_shift_plan(self):
        """The warm start advances one step and repeats the tail"""
        plan = np.arange(6.0).reshape(3, 2)
        np.testing.assert_array_equal(shift_plan(plan, 3), [[2, 3], [4, 5], [4, 5]])
        np.testing.assert_array_equal(shift_plan(plan, 2), [[2, 3], [4, 5]])
        np.testing.assert_array_equal(shift_plan(plan, 4)[-1], [4, 5])

    def test_horizon_shrinks_at_end(self, tiny_setup, tiny_day):
        """Near the end of the day the problem covers only the remaining steps"""
        spec = ControllerSpec(ControllerKind.MPC, lookahead=4, solver=FAST)
        _, plan, _, problem = mpc_act(spec, tiny_setup, tiny_day.initial_temps, tiny_day, tiny_day.steps - 2)
        assert problem.horizon == 2
        assert plan.shape == (2, 3)

    @pytest.mark.parametrize("kind", [ControllerKind.MPC, ControllerKind.MPC_C])
    def test_actions_in_bounds(self, kind, tiny_setup, tiny_day):
        """MPC and MPC-C stay in the box over a whole day"""
        result = run_episode(MpcController(ControllerSpec(kind, lookahead=2, solver=FAST), tiny_setup),
                             tiny_day, tiny_setup)
        assert np.all(result.actions >= tiny_setup.bounds.lower - 1e-12)
        assert np.all(result.actions <= tiny_setup.bounds.upper + 1e-12)
        assert np.isfinite(result.total)

    def test_zero_table_matches_mpc_c(self, tiny_setup, tiny_day):
        """MPC-CL with an all-zero table acts exactly like MPC-C"""
        mpc_c = ControllerSpec(ControllerKind.MPC_C, lookahead=3, solver=FAST)
        mpc_cl = ControllerSpec(ControllerKind.MPC_CL, lookahead=3, solver=FAST,
                                terminal=TerminalCostTable.zeros(tiny_setup.z))
        a = run_episode(MpcController(mpc_c, tiny_setup), tiny_day, tiny_setup)
        b = run_episode(MpcController(mpc_cl, tiny_setup), tiny_day, tiny_setup)
        np.testing.assert_allclose(b.actions, a.actions, rtol=1e-10, atol=1e-10)
        assert b.total == pytest.approx(a.total, rel=1e-10)

    @pytest.mark.parametrize("hour", [0.0, 8.0, 10.5, 11.0])
    def test_no_precooling_before_eleven(self, hour):
        """With a one-hour lookahead, up to 11:00 a TOU day is planned exactly like a flat-price day"""
        base = tiny_building_setup()
        setup = BuildingSetup(base.model, base.bounds)
        day = make_day("tou", steps=288, seed=1)
        flat = replace(day, tariff=TouTariff(steps=288, peak_price=1.0))
        spec = ControllerSpec(ControllerKind.MPC, lookahead=12, solver=FAST)
        T = np.array([24.0, 24.4])
        action, _, _, p = mpc_act(spec, setup, T, day, _step(hour))
        flat_action, _, _, _ = mpc_act(spec, setup, T, flat, _step(hour))
        np.testing.assert_array_equal(action.as_vector(), flat_action.as_vector())
        np.testing.assert_array_equal(p.prices, 1.0)

    def test_peak_visible_after_eleven(self, tiny_setup):
        """From 11:05 the one-hour horizon reaches the 12:00 peak"""
        day = make_day("tou", steps=288, seed=1)
        spec = ControllerSpec(ControllerKind.MPC, lookahead=12, solver=FAST)
        p = mpc_problem(spec, tiny_setup, np.array([24.0, 24.4]), day, _step(11.0) + 1, tiny_setup.bounds.midpoint)
        assert p.prices[-1] == 10.0
        assert np.all(p.prices[:-1] == 1.0)

    def test_failed_solve_repeats_previous_action(self, tiny_setup, tiny_day, monkeypatch):
        """A solver failure falls back to the previous action and leaves a note"""
        def boom(*args, **kwargs):
            raise SolverDivergenceError("objective is not finite")

        monkeypatch.setattr(mpc_module, "mpc_act", boom)
        controller = MpcController(ControllerSpec(ControllerKind.MPC, lookahead=2), tiny_setup)
        result = run_episode(controller, tiny_day, tiny_setup)
        np.testing.assert_array_equal(result.actions, np.tile(tiny_setup.bounds.midpoint, (tiny_day.steps, 1)))
        assert len(result.notes) == tiny_day.steps


class TestPolicyController:
    """Deterministic policy evaluation"""

    def test_input_size_checked(self, tiny_setup, tiny_day):
        """A network trained for another observation size is refused at reset"""
        spec = ControllerSpec(ControllerKind.DPC, lookahead=2, policy=init_mlp(5, [4], 3, seed=0))
        with pytest.raises(ConfigurationError):
            PolicyController(spec, tiny_setup).reset(tiny_day, tiny_day.initial_temps)

    @pytest.mark.parametrize("log_std", [None, -0.5])
    def test_episode_in_bounds(self, tiny_setup, tiny_day, log_std):
        """Squash and clip heads both stay in the box"""
        kind = ControllerKind.DPC if log_std is None else ControllerKind.RLC
        net = init_mlp(observation_size(2, 2, "tou"), [8], 3, seed=1, output_scale=10.0, log_std=log_std)
        result = run_episode(PolicyController(ControllerSpec(kind, lookahead=2, policy=net), tiny_setup),
                             tiny_day, tiny_setup)
        assert np.all(result.actions >= tiny_setup.bounds.lower - 1e-12)
        assert np.all(result.actions <= tiny_setup.bounds.upper + 1e-12)

    def test_deterministic(self, tiny_setup, tiny_day):
        """Two evaluations give identical actions"""
        net = init_mlp(observation_size(2, 1, "tou"), [8], 3, seed=2)
        spec = ControllerSpec(ControllerKind.DPC, lookahead=1, policy=net)
        a = run_episode(PolicyController(spec, tiny_setup), tiny_day, tiny_setup)
        b = run_episode(PolicyController(spec, tiny_setup), tiny_day, tiny_setup)
        np.testing.assert_array_equal(a.actions, b.actions)


