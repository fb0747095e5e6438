"""Re-check an assignment against a model, row by row, without the solver."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

from ..model import ModelIR
from .result import SolveResult

INTEGRALITY_TOL = 1e-6


@dataclass(frozen=True)
class Violation:
    kind: str  # constraint | bound | integrality | missing
    name: str
    amount: float

    def __str__(self) -> str:
        return f"{self.kind} {self.name}: {self.amount:.3g}"


@dataclass
class VerifyReport:
    violations: list[Violation] = field(default_factory=list)
    checked_constraints: int = 0
    checked_variables: int = 0
    objective: float | None = None

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "checked_constraints": self.checked_constraints,
            "checked_variables": self.checked_variables,
            "objective": self.objective,
            "violations": [vars(v) for v in self.violations],
        }


def verify(
    model: ModelIR,
    solution: SolveResult | Mapping[str, float],
    feas_tol: float = 1e-6,
    int_tol: float = INTEGRALITY_TOL,
) -> VerifyReport:
    """Check every constraint, bound and integrality claim.

    A row passes when its violation is at most ``feas_tol`` times the row
    scale ``max(1, |rhs|, max_j |a_j x_j|)``; bounds use ``max(1, |bound|)``.
    """
    values = solution.assignment if isinstance(solution, SolveResult) else solution
    report = VerifyReport()
    missing = [v.name for v in model.variables if v.name not in values]
    for name in missing:
        report.violations.append(Violation("missing", name, math.inf))
    if missing:
        return report

    for v in model.variables:
        x = values[v.name]
        report.checked_variables += 1
        if not math.isfinite(x):
            report.violations.append(Violation("bound", v.name, math.inf))
            continue
        if x < v.lb - feas_tol * max(1.0, abs(v.lb)):
            report.violations.append(Violation("bound", v.name, v.lb - x))
        if x > v.ub + feas_tol * max(1.0, abs(v.ub)):
            report.violations.append(Violation("bound", v.name, x - v.ub))
        if v.is_integral and abs(x - round(x)) > int_tol:
            report.violations.append(Violation("integrality", v.name, abs(x - round(x))))

    for con in model.constraints:
        report.checked_constraints += 1
        terms = [c * values[n] for n, c in con.coeffs]
        act = math.fsum(terms)
        scale = max([1.0, abs(con.rhs)] + [abs(t) for t in terms])
        if con.sense == "<=":
            excess = act - con.rhs
        elif con.sense == ">=":
            excess = con.rhs - act
        else:
            excess = abs(act - con.rhs)
        if excess > feas_tol * scale:
            report.violations.append(Violation("constraint", con.name, excess))
    report.objective = model.objective_value(values)
    return report
