from __future__ import annotations

import math

import pytest

from conftest import make_lp, uniform_rates
from qkdplan import naming
from qkdplan.builder import BuildConfig, build_model
from qkdplan.solver import SolveResult, SolverConfig, solve_milp, verify
from qkdplan.solver.result import relative_gap

EXACT = SolverConfig(mip_gap=0.0)


@pytest.mark.parametrize("budget, expected_b, expected_s", [(202, 2.0, 2.0), (200, 0.0, 0.0), (250, 50.0, 50.0)])
def test_two_node_budget_split(line2, budget, expected_b, expected_s):
    # unit rate and unit demand: B equals the device count once both ends are trusted
    topo, dm = line2
    model = build_model(topo, dm, uniform_rates(topo, 1.0, 1.0), BuildConfig(budget=budget, q2=100))
    result = solve_milp(model, EXACT)
    assert result.status == "optimal"
    assert result.objective == pytest.approx(expected_b, abs=1e-9)
    assert result.assignment[naming.s_var(0, 1)] == pytest.approx(expected_s, abs=1e-9)
    trusted = expected_s > 0
    assert result.assignment[naming.t_var(0)] == pytest.approx(float(trusted), abs=1e-9)
    assert verify(model, result).ok


def test_csc_route_avoids_trusting_server(path3):
    # CSC through node 1 needs only the ends trusted; C2C needs all three
    topo, dm = path3
    model = build_model(topo, dm, uniform_rates(topo, 1.0, 1.0), BuildConfig(budget=210, q1=1, q2=100))
    result = solve_milp(model, EXACT)
    assert result.objective == pytest.approx(10.0)
    assert result.assignment[naming.shat_var(0, 1, 2)] == pytest.approx(10.0)
    assert result.assignment[naming.t_var(1)] == pytest.approx(0.0)


def test_knapsack():
    # max 5a + 4b + 3c, 2a + 3b + c <= 5, 4a + b + 2c <= 11, 3a + 4b + 2c <= 8, integers
    model = make_lp([5, 4, 3], [([2, 3, 1], "<=", 5), ([4, 1, 2], "<=", 11), ([3, 4, 2], "<=", 8)],
                    integer=(0, 1, 2))
    result = solve_milp(model, EXACT)
    assert result.status == "optimal"
    assert result.objective == pytest.approx(13.0)


def test_fractional_lp_integer_optimum():
    # LP optimum 4.5 at x = 1.5; integer optimum 3 at x = 1
    model = make_lp([3], [([2], "<=", 3)], integer=(0,))
    result = solve_milp(model, EXACT)
    assert result.objective == pytest.approx(3.0)
    assert result.stats["nodes"] >= 1


def test_integer_infeasible():
    model = make_lp([1], [([2], "=", 1)], integer=(0,))
    assert solve_milp(model, EXACT).status == "infeasible"


def test_unbounded():
    model = make_lp([1, 1], [([1, -1], "<=", 1)], integer=(0,))
    assert solve_milp(model, EXACT).status == "unbounded"


def test_gap_limit_status(path3):
    topo, dm = path3
    model = build_model(topo, dm, uniform_rates(topo, 3.0, 2.0), BuildConfig(budget=1000, q2=7))
    loose = solve_milp(model, SolverConfig(mip_gap=0.5))
    exact = solve_milp(model, EXACT)
    assert exact.status == "optimal"
    assert loose.status in ("optimal", "gap-limit")
    assert loose.gap <= 0.5
    assert loose.objective <= exact.objective + 1e-9
    assert loose.bound >= exact.objective - 1e-9


def test_solution_limit(path3):
    topo, dm = path3
    model = build_model(topo, dm, uniform_rates(topo, 3.0, 2.0), BuildConfig(budget=1000, q2=7))
    result = solve_milp(model, SolverConfig(mip_gap=0.0, solution_limit=1))
    assert result.status in ("solution-limit", "optimal")
    assert result.stats["incumbents"] >= 1
    assert verify(model, result).ok


def test_mip_start_is_used(path3):
    topo, dm = path3
    model = build_model(topo, dm, uniform_rates(topo, 1.0, 1.0), BuildConfig(budget=500))
    result = solve_milp(model, EXACT)
    assert result.stats["start_used"] is True


def test_workers_give_same_optimum(path3):
    topo, dm = path3
    model = build_model(topo, dm, uniform_rates(topo, 3.0, 2.0), BuildConfig(budget=1000, q2=7))
    one = solve_milp(model, EXACT)
    two = solve_milp(model, SolverConfig(mip_gap=0.0, workers=2))
    assert two.objective == pytest.approx(one.objective, abs=1e-9)


def test_result_round_trip():
    result = SolveResult("time-limit", None, math.inf, {}, math.inf, {"nodes": 3})
    back = SolveResult.from_dict(result.to_dict())
    assert back.status == "time-limit" and back.bound == math.inf and back.objective is None


@pytest.mark.parametrize("obj, bound, gap", [(10.0, 11.0, 0.1), (10.0, 10.0, 0.0), (0.0, 1.0, 1e10), (None, 1.0, math.inf)])
def test_relative_gap(obj, bound, gap):
    assert relative_gap(obj, bound) == pytest.approx(gap)


@pytest.mark.parametrize("bad", [dict(time_limit_s=0), dict(mip_gap=1.0), dict(workers=0), dict(solution_limit=0)])
def test_solver_config_validation(bad):
    with pytest.raises(ValueError):
        SolverConfig(**bad)
