"""Solver-agnostic linear model and its LP-file / solution-file formats."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Mapping

import numpy as np
import scipy.sparse as sp


class Domain(str, Enum):
    CONTINUOUS = "continuous"
    INTEGER = "integer"
    BINARY = "binary"


SENSES = ("<=", "=", ">=")


@dataclass(frozen=True)
class Variable:
    name: str
    domain: Domain = Domain.CONTINUOUS
    lb: float = 0.0
    ub: float = math.inf

    @property
    def is_integral(self) -> bool:
        return self.domain is not Domain.CONTINUOUS


@dataclass(frozen=True)
class Constraint:
    name: str
    coeffs: tuple[tuple[str, float], ...]
    sense: str
    rhs: float = 0.0

    def activity(self, values: Mapping[str, float]) -> float:
        return math.fsum(c * values[n] for n, c in self.coeffs)


@dataclass(frozen=True)
class ModelIR:
    """Variables, linear constraints and a linear objective.

    ``keys`` maps variable names back to structured keys, e.g.
    ``"S_0_1" -> ("S", (0, 1))``; models not produced by the builder may
    leave it empty. ``start`` is an optional known-feasible assignment
    (a MIP start); the solver checks it before using it as an incumbent.
    """

    variables: tuple[Variable, ...]
    constraints: tuple[Constraint, ...]
    objective: tuple[tuple[str, float], ...]
    sense: str = "maximize"
    name: str = "model"
    keys: Mapping[str, tuple] = field(default_factory=dict, compare=False)
    start: Mapping[str, float] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.sense not in ("maximize", "minimize"):
            raise ValueError(f"unknown objective sense {self.sense!r}")
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            dup = next(n for n in names if names.count(n) > 1)
            raise ValueError(f"duplicate variable name {dup!r}")
        declared = set(names)
        for con in self.constraints:
            if con.sense not in SENSES:
                raise ValueError(f"constraint {con.name}: unknown sense {con.sense!r}")
            for n, _ in con.coeffs:
                if n not in declared:
                    raise ValueError(f"constraint {con.name} references undeclared variable {n!r}")
        for n, _ in self.objective:
            if n not in declared:
                raise ValueError(f"objective references undeclared variable {n!r}")
        con_names = [c.name for c in self.constraints]
        if len(set(con_names)) != len(con_names):
            raise ValueError("duplicate constraint names")

    @property
    def index(self) -> dict[str, int]:
        return {v.name: i for i, v in enumerate(self.variables)}

    def variable(self, name: str) -> Variable:
        return self.variables[self.index[name]]

    def constraint(self, name: str) -> Constraint:
        for c in self.constraints:
            if c.name == name:
                return c
        raise KeyError(name)

    def objective_value(self, values: Mapping[str, float]) -> float:
        return math.fsum(c * values[n] for n, c in self.objective)

    def relaxed(self) -> ModelIR:
        """Copy with every variable continuous (bounds kept)."""
        return ModelIR(
            tuple(Variable(v.name, Domain.CONTINUOUS, v.lb, v.ub) for v in self.variables),
            self.constraints, self.objective, self.sense, self.name, self.keys, self.start,
        )

    def to_arrays(self) -> ArrayModel:
        return ArrayModel.from_model(self)


@dataclass
class ArrayModel:
    """Column-oriented numeric form of a :class:`ModelIR`.

    The objective is always stored for *minimization*; ``obj_sign`` converts
    back (``reported = obj_sign * c @ x``).
    """

    c: np.ndarray
    A: sp.csc_matrix
    rhs: np.ndarray
    senses: tuple[str, ...]
    lb: np.ndarray
    ub: np.ndarray
    integral: np.ndarray
    binary: np.ndarray
    names: tuple[str, ...]
    obj_sign: float

    @classmethod
    def from_model(cls, model: ModelIR) -> ArrayModel:
        index = model.index
        n = len(model.variables)
        rows, cols, vals = [], [], []
        for i, con in enumerate(model.constraints):
            for name, coef in con.coeffs:
                rows.append(i)
                cols.append(index[name])
                vals.append(coef)
        A = sp.csc_matrix((vals, (rows, cols)), shape=(len(model.constraints), n), dtype=float)
        A.sum_duplicates()
        sign = -1.0 if model.sense == "maximize" else 1.0
        c = np.zeros(n)
        for name, coef in model.objective:
            c[index[name]] += sign * coef
        return cls(
            c=c,
            A=A,
            rhs=np.array([con.rhs for con in model.constraints], dtype=float),
            senses=tuple(con.sense for con in model.constraints),
            lb=np.array([v.lb for v in model.variables], dtype=float),
            ub=np.array([v.ub for v in model.variables], dtype=float),
            integral=np.array([v.is_integral for v in model.variables], dtype=bool),
            binary=np.array([v.domain is Domain.BINARY for v in model.variables], dtype=bool),
            names=tuple(v.name for v in model.variables),
            obj_sign=sign,
        )


# -- LP file --------------------------------------------------------------

_LINE_WIDTH = 200


def _num(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def _terms(coeffs: Iterable[tuple[str, float]]) -> list[str]:
    out = []
    for name, coef in coeffs:
        if coef == 0:
            continue
        sign = "-" if coef < 0 else "+"
        mag = abs(coef)
        body = name if mag == 1 else f"{_num(mag)} {name}"
        out.append(f"{sign} {body}")
    if out and out[0].startswith("+ "):
        out[0] = out[0][2:]
    return out


def _wrap(head: str, terms: list[str], tail: str) -> list[str]:
    lines, cur = [], head
    for term in terms + ([tail] if tail else []):
        if len(cur) + 1 + len(term) > _LINE_WIDTH and cur.strip():
            lines.append(cur)
            cur = "   " + term
        else:
            cur = f"{cur} {term}" if cur else term
    lines.append(cur)
    return lines


def format_lp(model: ModelIR) -> str:
    """Render ``model`` in CPLEX LP format.

    Binaries with bounds other than ``[0, 1]`` are written as bounded
    general integers, since LP readers reset bounds of declared binaries.
    """
    lines = [f"\\ {model.name}", "Maximize" if model.sense == "maximize" else "Minimize"]
    obj_terms = _terms(model.objective) or ["0 " + model.variables[0].name] if model.variables else []
    lines += _wrap(" obj:", obj_terms, "")
    lines.append("Subject To")
    for con in model.constraints:
        terms = _terms(con.coeffs) or [f"0 {model.variables[0].name}"]
        lines += _wrap(f" {con.name}:", terms, f"{con.sense} {_num(con.rhs)}")

    lines.append("Bounds")
    general, binary = [], []
    for v in model.variables:
        is_std_binary = v.domain is Domain.BINARY and v.lb == 0 and v.ub == 1
        if is_std_binary:
            binary.append(v.name)
            continue
        if v.is_integral:
            general.append(v.name)
        lb, ub = v.lb, v.ub
        if lb == ub:
            lines.append(f" {v.name} = {_num(lb)}")
        elif lb == -math.inf and ub == math.inf:
            lines.append(f" {v.name} free")
        elif ub == math.inf:
            if lb != 0:
                lines.append(f" {v.name} >= {_num(lb)}")
        else:
            lo = "-inf" if lb == -math.inf else _num(lb)
            lines.append(f" {lo} <= {v.name} <= {_num(ub)}")
    if general:
        lines.append("General")
        lines += _wrap("", general, "")
    if binary:
        lines.append("Binary")
        lines += _wrap("", binary, "")
    lines.append("End")
    return "\n".join(lines) + "\n"


def export_lp(model: ModelIR, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(format_lp(model))
    return path


# -- solution files ("name = value" lines) ----------------------------------


def format_solution(assignment: Mapping[str, float], header: Mapping[str, Any] | None = None) -> str:
    lines = [f"# {k} = {v}" for k, v in (header or {}).items()]
    lines += [f"{name} = {value!r}" for name, value in assignment.items()]
    return "\n".join(lines) + "\n"


def parse_solution(text: str, source: str = "<solution>") -> dict[str, float]:
    out: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        name, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"{source}:line {lineno}: expected 'name = value'")
        name = name.strip()
        if name in out:
            raise ValueError(f"{source}:line {lineno}: duplicate variable {name!r}")
        try:
            out[name] = float(value)
        except ValueError:
            raise ValueError(f"{source}:line {lineno}: value {value.strip()!r} is not a number") from None
    return out


def read_solution(path: str | Path) -> dict[str, float]:
    path = Path(path)
    return parse_solution(path.read_text(), source=str(path))
