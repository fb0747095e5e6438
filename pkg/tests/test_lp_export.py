from __future__ import annotations

import math

import highspy
import pytest

from conftest import make_lp, uniform_rates
from qkdplan.builder import BuildConfig, build_model
from qkdplan.model import Constraint, Domain, ModelIR, Variable, export_lp, format_lp, format_solution, parse_solution
from qkdplan.solver import SolverConfig, solve_milp, verify


def highs_solve(path, gap=0.0):
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("mip_rel_gap", gap)
    h.readModel(str(path))
    h.run()
    lp = h.getLp()
    values = dict(zip(lp.col_names_, h.getSolution().col_value))
    return h.getModelStatus(), h.getInfo().objective_function_value, values


def test_format_sections():
    model = ModelIR(
        (Variable("x", Domain.INTEGER, -2, 5), Variable("y", Domain.BINARY, 0, 1), Variable("z", lb=-math.inf),
         Variable("w", Domain.BINARY, 1, 1)),
        (Constraint("c1", (("x", 1.0), ("y", -2.5)), "<=", 3.0),),
        (("x", 1.0),),
    )
    text = format_lp(model)
    assert text.startswith("\\ model\nMaximize\n obj: x\nSubject To\n c1: x - 2.5 y <= 3\n")
    assert " -2 <= x <= 5" in text
    assert " z free" in text
    assert " w = 1" in text
    general = text.split("General\n")[1].split("Binary")[0]
    assert "x" in general and "w" in general
    assert text.split("Binary\n")[1] == "y\nEnd\n"
    assert text.endswith("End\n")


def test_round_trip_through_highs(tmp_path, path3):
    topo, dm = path3
    model = build_model(topo, dm, uniform_rates(topo, 3.0, 2.0), BuildConfig(budget=400, q2=20))
    path = export_lp(model, tmp_path / "m.lp")
    status, objective, values = highs_solve(path)
    assert status == highspy.HighsModelStatus.kOptimal
    ours = solve_milp(model, SolverConfig(mip_gap=0.0))
    assert objective == pytest.approx(ours.objective, abs=1e-6)
    assert verify(model, values).ok


def test_textbook_lp_through_highs(tmp_path):
    model = make_lp([5, 4, 3], [([2, 3, 1], "<=", 5), ([4, 1, 2], "<=", 11), ([3, 4, 2], "<=", 8)])
    _, objective, _ = highs_solve(export_lp(model, tmp_path / "t.lp"))
    assert objective == pytest.approx(13.0)


def test_long_rows_wrap(tmp_path):
    n = 400
    model = make_lp([1] * n, [([1] * n, "<=", 1)])
    text = format_lp(model)
    assert max(len(line) for line in text.splitlines()) <= 255
    _, objective, _ = highs_solve(export_lp(model, tmp_path / "w.lp"))
    assert objective == pytest.approx(1.0)


def test_solution_file_round_trip():
    values = {"B": 1.0 / 3.0, "S_0_1": 2.0}
    text = format_solution(values, {"status": "optimal"})
    assert text.startswith("# status = optimal\n")
    assert parse_solution(text) == values


@pytest.mark.parametrize("text, match", [
    ("x 1\n", "expected 'name = value'"),
    ("x = 1\nx = 2\n", "duplicate"),
    ("x = one\n", "not a number"),
])
def test_solution_file_errors(text, match):
    with pytest.raises(ValueError, match=match):
        parse_solution(text)
