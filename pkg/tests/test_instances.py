from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy.sparse.csgraph import connected_components
import scipy.sparse as sp

from qkdplan.instances import GenSpec, gen_family, gen_instance, instance_seeds, nsfnet_fixture, read_family, write_family
from qkdplan.topology import enumerate_csc_edges

# two-paths u-p-v counted by scanning node pairs for common neighbours
NSFNET_CSC_EDGES = 44


def is_connected(topo):
    idx = {n: i for i, n in enumerate(topo.nodes)}
    u = [idx[a] for a, _, _ in topo.edges]
    v = [idx[b] for _, b, _ in topo.edges]
    graph = sp.coo_matrix((np.ones(len(u)), (u, v)), shape=(len(idx), len(idx)))
    return connected_components(graph, directed=False)[0] == 1


def test_ten_node_family_shape():
    family = gen_family(GenSpec())
    assert len(family) == 10
    for inst in family:
        assert len(inst.topology.nodes) == 10
        assert len(inst.topology.edges) == 15
        assert len(inst.users) == 2
        assert len(inst.demands) == 2
        assert {d.pair for d in inst.demands.entries} == {(inst.users[0], inst.users[1]), (inst.users[1], inst.users[0])}
        assert all(d.beta == 1.0 and 100 <= d.kbps <= 500 for d in inst.demands.entries)
        assert all(10 <= length <= 500 for *_, length in inst.topology.edges)
        assert is_connected(inst.topology)


def test_deterministic_and_seed_sensitive():
    a, b = gen_family(GenSpec(seed=3)), gen_family(GenSpec(seed=3))
    assert a == b
    assert gen_family(GenSpec(seed=4)) != a
    assert len(set(instance_seeds(GenSpec(instances=50)))) == 50


@pytest.mark.parametrize("n, degree, fraction, edges, users", [
    (55, 3.0, 0.2, 83, 11),  # 82.5 rounds half up
    (5, 3.0, 0.2, 8, 1),
    (7, 2.0, 0.5, 7, 4),
])
def test_counts(n, degree, fraction, edges, users):
    spec = GenSpec(n_nodes=n, avg_degree=degree, user_fraction=fraction)
    assert (spec.edge_count, spec.user_count) == (edges, users)


@settings(max_examples=25, deadline=None)
@given(st.integers(3, 25), st.floats(2.0, 4.0), st.integers(0, 2**32))
def test_generated_graphs_connected_and_simple(n, degree, seed):
    m = math.floor(degree * n / 2 + 0.5)
    assume(n - 1 <= m <= n * (n - 1) // 2)
    spec = GenSpec(n_nodes=n, avg_degree=degree, instances=1, seed=seed)
    inst = gen_instance(spec, 0, seed)
    keys = [(u, v) for u, v, _ in inst.topology.edges]
    assert len(keys) == len(set(keys)) == spec.edge_count
    assert all(u != v for u, v in keys)
    assert is_connected(inst.topology)


def test_edge_length_mean_within_three_sigma():
    spec = GenSpec(n_nodes=200, avg_degree=10.0, instances=10, seed=11)
    lengths = np.array([l for inst in gen_family(spec) for *_, l in inst.topology.edges])
    assert lengths.size == 10_000
    lo, hi = spec.length_range_km
    sigma = (hi - lo) / math.sqrt(12) / math.sqrt(lengths.size)
    assert abs(lengths.mean() - (lo + hi) / 2) <= 3 * sigma


@pytest.mark.parametrize("bad", [
    dict(n_nodes=1), dict(user_fraction=0), dict(user_fraction=1.5), dict(instances=0),
    dict(length_range_km=(5, 1)), dict(demand_range_kbps=(-1, 1)), dict(n_nodes=4, avg_degree=4.0),
])
def test_spec_validation(bad):
    with pytest.raises(ValueError):
        GenSpec(**bad)


def test_retry_cap():
    # 5 edges cannot connect 10 nodes
    spec = GenSpec(n_nodes=10, avg_degree=1.0, max_retries=5)
    with pytest.raises(RuntimeError, match="no connected graph"):
        gen_family(spec)


def test_nsfnet_fixture():
    topo, demands = nsfnet_fixture()
    assert len(topo.nodes) == 14
    assert len(topo.edges) == 21
    assert len(enumerate_csc_edges(topo)) == NSFNET_CSC_EDGES
    assert is_connected(topo)
    assert len(demands.active()) > 0
    assert demands.nodes() <= set(topo.nodes)


def test_family_directory_round_trip(tmp_path):
    family = gen_family(GenSpec(n_nodes=8, instances=3, seed=5))
    write_family(family, tmp_path / "fam", {"note": "x"})
    assert (tmp_path / "fam" / "instance_002" / "topology.yaml").exists()
    assert read_family(tmp_path / "fam") == family


def test_spec_dict_round_trip():
    spec = GenSpec(n_nodes=12, length_range_km=(1.0, 2.0))
    assert GenSpec.from_dict(spec.to_dict()) == spec
