from __future__ import annotations

import math

import pytest

from conftest import uniform_rates
from qkdplan import naming
from qkdplan.builder import BuildConfig, build_model
from qkdplan.evaluate import (
    CELLS,
    Cell,
    Comparison,
    average_comparisons,
    compare_modes,
    compute_gsod,
    compute_sod,
    delivered_key_rate,
    deployment_from_result,
    format_plot_data,
    format_table,
)
from qkdplan.solver import SolveResult, SolverConfig, solve_milp
from qkdplan.topology import Demand, DemandMatrix, Topology

EXACT = SolverConfig(mip_gap=0.0)


@pytest.fixture
def star():
    """Hub 0 with leaves 1, 2, 3; demands from 1 to 2 and 1 to 3."""
    topo = Topology.build([0, 1, 2, 3], [(0, 1, 10.0), (0, 2, 10.0), (0, 3, 10.0)], name="star")
    dm = DemandMatrix.build([Demand(1, 2, 2.0), Demand(1, 3, 1.0, 2.0)])
    return topo, dm


def solve(topo, dm, cfg, c2c=1.0, csc=1.0):
    model = build_model(topo, dm, uniform_rates(topo, c2c, csc), cfg)
    result = solve_milp(model, EXACT)
    return model, result, deployment_from_result(model, result, dm, cfg)


def test_gsod_equals_objective(star):
    topo, dm = star
    cfg = BuildConfig(budget=500, q2=50)
    _, result, dep = solve(topo, dm, cfg)
    assert compute_gsod(dep) == pytest.approx(result.objective, abs=1e-9)
    assert dep.check() == []
    assert dep.cost <= cfg.budget + 1e-9


def test_sod_per_pair(star):
    topo, dm = star
    _, result, dep = solve(topo, dm, BuildConfig(budget=500, q2=50))
    for d in dm.entries:
        assert compute_sod(dep, d.pair) == pytest.approx(delivered_key_rate(dep, d.pair) / d.key_demand)
        assert compute_sod(dep, d.pair) >= result.objective - 1e-9


def test_trust_canonicalization(line2):
    topo, dm = line2
    cfg = BuildConfig(budget=1000, q2=0)
    model = build_model(topo, dm, uniform_rates(topo, 1.0, 1.0), cfg)
    result = solve_milp(model, EXACT)
    # an empty deployment that still pays for trust on node 0
    values = {name: 0.0 for name in result.assignment}
    values[naming.t_var(0)] = 1.0
    dep = deployment_from_result(model, SolveResult("optimal", 0.0, 0.0, values), dm, cfg)
    assert dep.T == {0: 0, 1: 0}


def test_check_flags_budget_overrun(line2):
    topo, dm = line2
    cfg = BuildConfig(budget=300, q2=100)
    _, _, dep = solve(topo, dm, cfg)
    over = type(dep)(**{**dep.__dict__, "budget": 1.0})
    assert any("exceeds budget" in p for p in over.check())


def test_errors(star):
    topo, dm = star
    _, _, dep = solve(topo, dm, BuildConfig(budget=500, q2=50))
    with pytest.raises(ValueError, match="no positive key demand"):
        compute_sod(dep, (2, 1))
    with pytest.raises(ValueError):
        deployment_from_result(build_model(topo, dm, uniform_rates(topo, 1, 1)),
                               SolveResult("infeasible", None, None), dm, BuildConfig())


def test_to_dict_is_json_ready(star):
    import json

    topo, dm = star
    _, _, dep = solve(topo, dm, BuildConfig(budget=500, q2=50))
    d = json.loads(json.dumps(dep.to_dict()))
    assert set(d["sod"]) == {"1-2", "1-3"}
    assert d["trusted"] == [n for n, t in dep.T.items() if t]


def test_compare_modes(star):
    topo, dm = star
    comp = compare_modes(topo, dm, uniform_rates(topo, 1.0, 1.0), BuildConfig(budget=500, q2=50), EXACT, "star")
    assert [(c.mode, c.relay_selection) for c in comp.cells] == list(CELLS)
    assert comp.standardized("hybrid", True) == 100.0
    assert not comp.partial
    hybrid = comp.cell("hybrid", True).mg_sod
    assert hybrid >= comp.cell("pure-c2c", True).mg_sod - 1e-9
    assert hybrid >= comp.cell("hybrid", False).mg_sod - 1e-9
    table = format_table(comp)
    assert "hybrid" in table and "100.0%" in table
    csv = format_plot_data([("star", comp)]).splitlines()
    assert csv[0].startswith("x,mode,relay_selection,mg_sod")
    assert len(csv) == 7


def make_comparison(values, status="optimal"):
    cells = tuple(Cell(mode, sel, v, status, 0.0, 1.0) for (mode, sel), v in zip(CELLS, values))
    return Comparison(cells, "x", 1, status != "optimal")


def test_average_then_standardize():
    a = make_comparison([10, 5, 1, 8, 4, 1])
    b = make_comparison([30, 5, 1, 8, 4, 1])
    avg = average_comparisons([a, b])
    assert avg.cell("hybrid", True).mg_sod == 20.0
    # the mean of standardized values would be 35.0; ratio of means is 25.0
    assert avg.standardized("pure-c2c", True) == pytest.approx(25.0)
    assert avg.instances == 2 and not avg.partial


def test_average_flags_partial():
    avg = average_comparisons([make_comparison([1] * 6), make_comparison([1] * 6, "time-limit")])
    assert avg.partial
    assert avg.cell("hybrid", True).status == "time-limit"


def test_zero_reference_standardizes_to_nan():
    comp = make_comparison([0, 0, 0, 0, 0, 0])
    assert comp.standardized("hybrid", True) == 100.0
    assert math.isnan(comp.standardized("pure-c2c", True))
