"""Revised simplex LP solver, branch-and-bound MILP solver and solution checks."""

from .bnb import solve_milp
from .result import STATUSES, NumericalError, SolveResult, SolverConfig
from .simplex import solve_lp
from .verify import VerifyReport, Violation, verify

__all__ = [
    "STATUSES",
    "NumericalError",
    "SolveResult",
    "SolverConfig",
    "VerifyReport",
    "Violation",
    "solve_lp",
    "solve_milp",
    "verify",
]
