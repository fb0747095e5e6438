"""Deployments, satisfaction degrees and the six-way mode comparison."""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

from .builder import MODES, BuildConfig, build_model
from .model import ModelIR
from .rates import Rates
from .solver import SolverConfig, SolveResult, solve_milp
from .topology import DemandMatrix, Topology

BUDGET_TOL = 1e-6
LIMIT_STATUSES = ("time-limit", "solution-limit")


@dataclass(frozen=True)
class Deployment:
    """Device placement, trust vector and key flows of one solved model.

    Flow keys are ``(pair, arc)`` with ``pair = (s, t)`` and ``arc`` either
    ``(a, b)`` for a C2C hop or ``(a, p, b)`` for a CSC hop from client
    ``a`` to client ``b`` through server ``p``.
    """

    S: dict[tuple, int]
    Shat: dict[tuple, int]
    T: dict[Any, int]
    F: dict[tuple, float]
    Fhat: dict[tuple, float]
    objective: float
    demands: DemandMatrix
    budget: float
    q1: float
    q2: float
    relay_selection: bool
    provenance: dict = field(default_factory=dict)

    @property
    def cost(self) -> float:
        return math.fsum(self.S.values()) + self.q1 * math.fsum(self.Shat.values()) + self.q2 * math.fsum(
            self.T.values()
        )

    def incidence(self, node) -> int:
        """Devices whose key endpoints include ``node`` (CSC servers excluded)."""
        total = sum(k for (u, v), k in self.S.items() if node in (u, v))
        total += sum(k for (u, _, v), k in self.Shat.items() if node in (u, v))
        return total

    def check(self) -> list[str]:
        problems = []
        if self.cost > self.budget + BUDGET_TOL * max(1.0, self.budget):
            problems.append(f"cost {self.cost} exceeds budget {self.budget}")
        if self.relay_selection:
            for node, t in self.T.items():
                if t != int(self.incidence(node) != 0):
                    problems.append(f"trust of node {node!r} is {t} with incidence {self.incidence(node)}")
        return problems

    def to_dict(self) -> dict:
        def arc(a):
            return "-".join(map(str, a))

        return {
            "objective": self.objective,
            "cost": self.cost,
            "budget": self.budget,
            "q1": self.q1,
            "q2": self.q2,
            "relay_selection": self.relay_selection,
            "c2c_devices": {arc(e): k for e, k in self.S.items() if k},
            "csc_devices": {arc(e): k for e, k in self.Shat.items() if k},
            "trusted": [n for n, t in self.T.items() if t],
            "flows": {
                f"{arc(pair)}:{arc(a)}": x for (pair, a), x in {**self.F, **self.Fhat}.items() if abs(x) > 0
            },
            "sod": {arc(d.pair): compute_sod(self, d.pair) for d in self.demands.active()},
            "provenance": self.provenance,
        }


def deployment_from_result(
    model: ModelIR,
    result: SolveResult,
    demands: DemandMatrix,
    cfg: BuildConfig,
    provenance: dict | None = None,
) -> Deployment:
    """Read a builder-produced model's assignment back into a Deployment.

    In selection mode the trust vector is canonicalized to ``[I(v) != 0]``;
    this never raises the cost since only useless trust is dropped.
    """
    if not result.has_solution:
        raise ValueError(f"result has no assignment (status {result.status})")
    values = result.assignment
    S, Shat, T, F, Fhat = {}, {}, {}, {}, {}
    objective = None
    for name, key in model.keys.items():
        kind = key[0]
        x = values[name]
        if kind == "B":
            objective = x
        elif kind == "S":
            S[key[1]] = int(round(x))
        elif kind == "Shat":
            Shat[key[1]] = int(round(x))
        elif kind == "T":
            T[key[1]] = int(round(x))
        elif kind == "F":
            F[(key[1], key[2])] = x
        elif kind == "Fhat":
            Fhat[(key[1], key[2])] = x
    if objective is None:
        raise ValueError("model has no objective variable B in its keys")
    dep = Deployment(
        S, Shat, T, F, Fhat, objective, demands, cfg.budget, cfg.q1, cfg.q2,
        cfg.relay_selection, dict(provenance or {}),
    )
    if cfg.relay_selection:
        canon = {n: int(dep.incidence(n) != 0) for n in T}
        dep = Deployment(
            S, Shat, canon, F, Fhat, objective, demands, cfg.budget, cfg.q1, cfg.q2,
            True, dep.provenance,
        )
    return dep


def delivered_key_rate(dep: Deployment, pair: tuple) -> float:
    """Net key flow leaving the source of ``pair`` over C2C and CSC hops."""
    s = pair[0]
    terms = []
    for (p, arc), x in dep.F.items():
        if p != pair:
            continue
        if arc[0] == s:
            terms.append(x)
        elif arc[-1] == s:
            terms.append(-x)
    for (p, arc), x in dep.Fhat.items():
        if p != pair:
            continue
        if arc[0] == s:
            terms.append(x)
        elif arc[-1] == s:
            terms.append(-x)
    return math.fsum(terms)


def compute_sod(dep: Deployment, pair: tuple) -> float:
    """Satisfaction degree of one demand pair."""
    d = dep.demands.get(*pair)
    if d is None or not d.key_demand > 0:
        raise ValueError(f"pair {pair!r} has no positive key demand")
    return delivered_key_rate(dep, pair) / d.key_demand


def compute_gsod(dep: Deployment) -> float:
    """Global satisfaction degree: the smallest SoD over all demand pairs."""
    pairs = dep.demands.active()
    if not pairs:
        raise ValueError("no demand pairs")
    return min(compute_sod(dep, d.pair) for d in pairs)


# -- mode comparison ----------------------------------------------------------

CELLS: tuple[tuple[str, bool], ...] = tuple((m, sel) for sel in (True, False) for m in MODES)


@dataclass(frozen=True)
class Cell:
    mode: str
    relay_selection: bool
    mg_sod: float | None
    status: str
    gap: float
    runtime_s: float

    @property
    def limited(self) -> bool:
        return self.status in LIMIT_STATUSES

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "relay_selection": self.relay_selection,
            "mg_sod": self.mg_sod,
            "status": self.status,
            "gap": self.gap if math.isfinite(self.gap) else str(self.gap),
            "runtime_s": self.runtime_s,
        }


@dataclass(frozen=True)
class Comparison:
    """Six cells (three modes, selection on and off) plus standardization."""

    cells: tuple[Cell, ...]
    label: str = ""
    instances: int = 1
    partial: bool = False

    def cell(self, mode: str, relay_selection: bool) -> Cell:
        for c in self.cells:
            if c.mode == mode and c.relay_selection == relay_selection:
                return c
        raise KeyError((mode, relay_selection))

    @property
    def reference(self) -> float | None:
        return self.cell("hybrid", True).mg_sod

    def standardized(self, mode: str, relay_selection: bool) -> float:
        """Cell value as a percentage of hybrid with relay selection."""
        ref = self.reference
        value = self.cell(mode, relay_selection).mg_sod
        if mode == "hybrid" and relay_selection and value is not None:
            return 100.0
        if value is None or ref is None or ref == 0:
            return math.nan
        return 100.0 * value / ref

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "instances": self.instances,
            "partial": self.partial,
            "cells": [
                {**c.to_dict(), "standardized_pct": _finite_or_str(self.standardized(c.mode, c.relay_selection))}
                for c in self.cells
            ],
        }


def _finite_or_str(x: float):
    return x if math.isfinite(x) else str(x)


def solve_cell(
    topology: Topology,
    demands: DemandMatrix,
    rates: Rates,
    cfg: BuildConfig,
    solver_cfg: SolverConfig,
) -> tuple[Cell, ModelIR, SolveResult]:
    start = time.monotonic()
    model = build_model(topology, demands, rates, cfg)
    result = solve_milp(model, solver_cfg)
    runtime = time.monotonic() - start
    cell = Cell(cfg.mode, cfg.relay_selection, result.objective, result.status, result.gap, runtime)
    return cell, model, result


def compare_modes(
    topology: Topology,
    demands: DemandMatrix,
    rates: Rates,
    cfg: BuildConfig | None = None,
    solver_cfg: SolverConfig | None = None,
    label: str = "",
) -> Comparison:
    """Solve all six mode/selection combinations of one instance.

    Solver limits are recorded on the cell instead of raised.
    """
    cfg = cfg or BuildConfig()
    solver_cfg = solver_cfg or SolverConfig()
    cells = []
    for mode, sel in CELLS:
        cell_cfg = BuildConfig(**{**cfg.to_dict(), "mode": mode, "relay_selection": sel})
        cells.append(solve_cell(topology, demands, rates, cell_cfg, solver_cfg)[0])
    partial = any(c.limited or c.mg_sod is None for c in cells)
    return Comparison(tuple(cells), label, 1, partial)


def average_comparisons(comparisons: Sequence[Comparison], label: str = "") -> Comparison:
    """Average raw MG-SoDs and runtimes per cell, then standardize the means.

    Cells without an incumbent are left out of their cell's mean; the result
    is flagged partial whenever any input cell was limited or missing.
    """
    if not comparisons:
        raise ValueError("no comparisons to average")
    cells = []
    partial = any(c.partial for c in comparisons)
    for mode, sel in CELLS:
        members = [c.cell(mode, sel) for c in comparisons]
        values = [m.mg_sod for m in members if m.mg_sod is not None]
        mean = math.fsum(values) / len(values) if values else None
        worst_gap = max((m.gap for m in members), default=math.inf)
        status = next((m.status for m in members if m.status not in ("optimal", "gap-limit")), "gap-limit")
        if all(m.status == "optimal" for m in members):
            status = "optimal"
        runtime = math.fsum(m.runtime_s for m in members) / len(members)
        cells.append(Cell(mode, sel, mean, status, worst_gap, runtime))
    return Comparison(tuple(cells), label, len(comparisons), partial)


def format_table(comparison: Comparison) -> str:
    """Plain-text table: rows are selection on/off, columns the three modes."""
    head = f"{'':<14}" + "".join(f"{m:>26}" for m in MODES)
    lines = []
    if comparison.label:
        lines.append(f"# {comparison.label} (instances: {comparison.instances})")
    lines.append(head)
    for sel in (True, False):
        row = f"{'selection' if sel else 'no-selection':<14}"
        for mode in MODES:
            c = comparison.cell(mode, sel)
            pct = comparison.standardized(mode, sel)
            value = "n/a" if c.mg_sod is None else f"{c.mg_sod:.4f}"
            flag = "*" if c.limited or c.mg_sod is None else " "
            row += f"{value:>14} ({pct:6.1f}%){flag}"
        lines.append(row)
    lines.append(f"{'runtime [s]':<14}" + "".join(
        f"{comparison.cell(m, True).runtime_s:>12.2f} /{comparison.cell(m, False).runtime_s:>10.2f} " for m in MODES
    ))
    if comparison.partial:
        lines.append("* solver limit reached or no incumbent; values are partial")
    return "\n".join(lines) + "\n"


PLOT_FIELDS = ("x", "mode", "relay_selection", "mg_sod", "standardized_pct", "runtime_s", "status", "partial")


def plot_rows(comparisons: Iterable[tuple[Any, Comparison]]) -> list[dict]:
    rows = []
    for x, comp in comparisons:
        for c in comp.cells:
            rows.append({
                "x": x,
                "mode": c.mode,
                "relay_selection": int(c.relay_selection),
                "mg_sod": "" if c.mg_sod is None else repr(c.mg_sod),
                "standardized_pct": repr(comp.standardized(c.mode, c.relay_selection)),
                "runtime_s": f"{c.runtime_s:.6f}",
                "status": c.status,
                "partial": int(comp.partial),
            })
    return rows


def format_plot_data(comparisons: Iterable[tuple[Any, Comparison]]) -> str:
    """CSV with one row per (x, cell); x is a graph size or instance label."""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=PLOT_FIELDS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(plot_rows(comparisons))
    return buf.getvalue()
