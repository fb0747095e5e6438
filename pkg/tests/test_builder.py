from __future__ import annotations

import math

import pytest

from conftest import uniform_rates
from qkdplan import naming
from qkdplan.builder import BuildConfig, build_model
from qkdplan.model import Domain
from qkdplan.rates import Rates
from qkdplan.solver import verify
from qkdplan.topology import Demand, DemandMatrix, InputError


def test_path3_dimensions(path3):
    topo, dm = path3
    model = build_model(topo, dm, uniform_rates(topo, 1.0, 1.0))
    # B, 2 S, 1 Shat, 3 trust triples, 2 * (2 edges + 1 CSC edge) flows
    assert len(model.variables) == 1 + 2 + 1 + 9 + 6
    names = [c.name for c in model.constraints]
    assert names.count("budget") == 1
    assert [n for n in names if n.startswith("flow_")] == ["flow_0_2_1"]
    assert sum(n.startswith("ttight_") for n in names) == 3
    assert len(names) == 2 + 1 + 1 + 1 + 1 + 1 + 3 * 4


def test_capacity_row_pools_both_directions(path3):
    topo, dm = path3
    model = build_model(topo, dm, uniform_rates(topo, 4.0, 1.0))
    row = dict(model.constraint("cap_0_1").coeffs)
    assert row == {
        naming.f_var(0, 2, 0, 1): 1.0,
        naming.f_var(0, 2, 1, 0): 1.0,
        naming.s_var(0, 1): -4.0,
    }


def test_csc_flow_skips_server(path3):
    topo, dm = path3
    model = build_model(topo, dm, uniform_rates(topo, 1.0, 1.0))
    row = dict(model.constraint("flow_0_2_1").coeffs)
    # node 1 only serves the CSC edge, so its row holds C2C flows alone
    assert set(row) == {naming.f_var(0, 2, a, b) for a, b in ((0, 1), (1, 0), (1, 2), (2, 1))}


def test_budget_row(path3):
    topo, dm = path3
    model = build_model(topo, dm, uniform_rates(topo, 1.0, 1.0), BuildConfig(budget=50, q1=3, q2=7))
    row = dict(model.constraint("budget").coeffs)
    assert row[naming.s_var(0, 1)] == 1.0
    assert row[naming.shat_var(0, 1, 2)] == 3.0
    assert row[naming.t_var(2)] == 7.0
    assert model.constraint("budget").rhs == 50


@pytest.mark.parametrize("mode, s_ub, shat_ub", [
    ("hybrid", math.inf, math.inf),
    ("pure-c2c", math.inf, 0.0),
    ("pure-csc", 0.0, math.inf),
])
def test_mode_bounds(path3, mode, s_ub, shat_ub):
    topo, dm = path3
    model = build_model(topo, dm, uniform_rates(topo, 1.0, 1.0), BuildConfig(mode=mode))
    assert model.variable(naming.s_var(0, 1)).ub == s_ub
    assert model.variable(naming.shat_var(0, 1, 2)).ub == shat_ub


def test_no_selection_all_nodes(path3):
    topo, dm = path3
    model = build_model(topo, dm, uniform_rates(topo, 1.0, 1.0), BuildConfig(relay_selection=False))
    assert all(model.variable(naming.t_var(n)).lb == 1.0 for n in topo.nodes)
    assert not any(c.name.startswith("ttight_") for c in model.constraints)


def test_no_selection_device_roles(path3):
    topo, dm = path3
    cfg = BuildConfig(relay_selection=False, baseline="device-roles")
    model = build_model(topo, dm, uniform_rates(topo, 1.0, 1.0), cfg)
    role = model.variable(naming.role_var(1))
    assert role.domain is Domain.BINARY
    # the server of 0-1-2 counts as a role holder
    assert dict(model.constraint("trole_1").coeffs)[naming.shat_var(0, 1, 2)] == 1.0
    assert model.variable(naming.t_var(1)).lb == 0.0


def test_trust_rows_and_big_m(path3):
    topo, dm = path3
    cfg = BuildConfig(budget=100, q1=0.5)
    assert cfg.big_m_value == 1 + 2 * 100 / 0.5
    model = build_model(topo, dm, uniform_rates(topo, 1.0, 1.0), cfg)
    big = dict(model.constraint("tbigm_0").coeffs)
    assert big[naming.t_var(0)] == -cfg.big_m_value
    assert model.variable(naming.tp_var(0)).domain is Domain.BINARY
    assert model.variable(naming.tpp_var(0)).domain is Domain.CONTINUOUS
    assert BuildConfig(big_m=5).big_m_value == 5.0


@pytest.mark.parametrize("bad", [
    dict(budget=-1), dict(q1=0), dict(q2=-1), dict(mode="c2c"), dict(big_m=0), dict(baseline="x"),
])
def test_config_validation(bad):
    with pytest.raises(ValueError):
        BuildConfig(**bad)


def test_start_is_feasible(path3):
    topo, dm = path3
    for selection in (True, False):
        model = build_model(topo, dm, uniform_rates(topo, 1.0, 1.0),
                            BuildConfig(budget=1000, relay_selection=selection))
        assert verify(model, model.start).ok


def test_inactive_pairs_get_no_flows(path3):
    topo, _ = path3
    dm = DemandMatrix.build([Demand(0, 2, 1.0), Demand(2, 0, 0.0)])
    model = build_model(topo, dm, uniform_rates(topo, 1.0, 1.0))
    assert naming.f_var(0, 2, 0, 1) in model.index
    assert not any(model.keys[v.name][1:2] == ((2, 0),) for v in model.variables)


def test_errors(path3):
    topo, dm = path3
    with pytest.raises(InputError, match="no demand pairs"):
        build_model(topo, DemandMatrix.build([Demand(0, 2, 0.0)]), uniform_rates(topo, 1.0, 1.0))
    with pytest.raises(InputError, match="missing C2C rate"):
        build_model(topo, dm, Rates({}, {}))
    with pytest.raises(InputError, match="unknown node"):
        build_model(topo, DemandMatrix.build([Demand(0, 9, 1.0)]), uniform_rates(topo, 1.0, 1.0))
