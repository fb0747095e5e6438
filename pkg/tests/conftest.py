from __future__ import annotations

import math
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from qkdplan.model import Constraint, Domain, ModelIR, Variable  # noqa: E402
from qkdplan.rates import Rates  # noqa: E402
from qkdplan.topology import Demand, DemandMatrix, Topology, enumerate_csc_edges  # noqa: E402


def make_lp(c, rows, bounds=None, sense="maximize", integer=()):
    """Model from dense data: ``rows`` are ``(coeffs, sense, rhs)``."""
    n = len(c)
    bounds = bounds or [(0.0, math.inf)] * n
    names = [f"x{j}" for j in range(n)]
    variables = tuple(
        Variable(names[j], Domain.INTEGER if j in integer else Domain.CONTINUOUS, *bounds[j])
        for j in range(n)
    )
    constraints = tuple(
        Constraint(f"r{i}", tuple((names[j], float(a)) for j, a in enumerate(coeffs) if a), s, float(rhs))
        for i, (coeffs, s, rhs) in enumerate(rows)
    )
    objective = tuple((names[j], float(cj)) for j, cj in enumerate(c) if cj)
    return ModelIR(variables, constraints, objective, sense)


def uniform_rates(topology: Topology, c2c: float, csc: float) -> Rates:
    return Rates(
        {(u, v): c2c for u, v, _ in topology.edges},
        {e.key: csc for e in enumerate_csc_edges(topology)},
    )


@pytest.fixture
def line2():
    """Two nodes, one fiber, one demand of 1 kbps."""
    topo = Topology.build([0, 1], [(0, 1, 10.0)], name="line2")
    return topo, DemandMatrix.build([Demand(0, 1, 1.0)])


@pytest.fixture
def path3():
    """0 - 1 - 2 with a demand between the ends."""
    topo = Topology.build([0, 1, 2], [(0, 1, 10.0), (1, 2, 10.0)], name="path3")
    return topo, DemandMatrix.build([Demand(0, 2, 1.0)])


# -- acceptance summary ---------------------------------------------------------

_CRITERIA: dict[int, tuple[str, list[str]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            number, title = mark.args
            _CRITERIA.setdefault(number, (title, []))[1].append(item.nodeid)


_OUTCOMES: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if report.when == "call" or report.outcome != "passed":
        previous = _OUTCOMES.get(report.nodeid, "passed")
        _OUTCOMES[report.nodeid] = report.outcome if previous == "passed" else previous


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, nodeids = _CRITERIA[number]
        outcomes = [_OUTCOMES.get(n, "not run") for n in nodeids]
        if any(o == "failed" for o in outcomes):
            verdict = "FAIL"
        elif all(o == "passed" for o in outcomes):
            verdict = "PASS"
        elif all(o == "not run" for o in outcomes):
            verdict = "NOT RUN"
        else:
            verdict = "INCOMPLETE"
        terminalreporter.write_line(f"criterion {number} ({title}): {verdict}")
