"""Best-bound branch-and-bound over simplex relaxations."""

from __future__ import annotations

import heapq
import itertools
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..model import ModelIR
from .result import NumericalError, SolveResult, SolverConfig, relative_gap
from .simplex import Basis, LPOutcome, SimplexSolver, TimeLimitReached
from .verify import verify

INT_TOL = 1e-6


@dataclass(order=True)
class _Node:
    sort_key: tuple
    depth: int = field(compare=False)
    changes: dict = field(compare=False)  # var index -> (lb, ub)
    score: float = field(compare=False)  # LP bound, larger is better
    x: np.ndarray = field(compare=False, repr=False)
    basis: Basis = field(compare=False, repr=False)


class _Search:
    def __init__(self, model: ModelIR, cfg: SolverConfig):
        self.cfg = cfg
        self.am = model.to_arrays()
        self.int_idx = np.flatnonzero(self.am.integral)
        names = self.am.names
        order = sorted(range(len(names)), key=lambda j: names[j])
        self.name_rank = np.empty(len(names), dtype=np.int64)
        self.name_rank[order] = np.arange(len(names))
        self.is_binary = self.am.binary
        self.engines = [SimplexSolver(self.am, cfg.feas_tol, cfg.opt_tol, seed=cfg.seed) for _ in range(cfg.workers)]
        self.seq = itertools.count()
        self.heap: list[_Node] = []
        self.inc_score = -math.inf
        self.inc_x: np.ndarray | None = None
        self.incumbents = 0
        self.lp_solves = 0
        self.max_depth = 0

    # scores are negated minimization objectives, so larger is better
    def _score(self, out: LPOutcome) -> float:
        return -out.objective

    def _bounds(self, changes: dict) -> tuple[np.ndarray, np.ndarray]:
        lb, ub = self.am.lb.copy(), self.am.ub.copy()
        for j, (lo, hi) in changes.items():
            lb[j], ub[j] = lo, hi
        return lb, ub

    def _fractional(self, x: np.ndarray) -> np.ndarray:
        vals = x[self.int_idx]
        return np.abs(vals - np.round(vals)) > INT_TOL

    def _branch_var(self, x: np.ndarray) -> int:
        """Most fractional variable, binaries before general integers,
        ties by variable name."""
        idx = self.int_idx[self._fractional(x)]
        if self.is_binary[idx].any():
            idx = idx[self.is_binary[idx]]
        v = x[idx]
        frac = np.minimum(v - np.floor(v), np.ceil(v) - v)
        tie = idx[frac >= frac.max() - 1e-12]
        return int(tie[np.argmin(self.name_rank[tie])])

    def _prunable(self, score: float) -> bool:
        if self.inc_x is None:
            return False
        return score <= self.inc_score + 1e-9 * max(1.0, abs(self.inc_score))

    def _solve(self, engine, changes, warm, deadline) -> LPOutcome:
        lb, ub = self._bounds(changes)
        return engine.solve(lb, ub, warm=warm, deadline=deadline)

    def _polish(self, engine, x: np.ndarray, changes: dict, warm: Basis, deadline) -> tuple[float, np.ndarray]:
        """Fix integers at their rounded values and re-solve for the rest."""
        fixed = dict(changes)
        for j in self.int_idx:
            r = float(np.round(x[j]))
            fixed[j] = (r, r)
        out = self._solve(engine, fixed, warm, deadline)
        if out.status == "optimal":
            xp = out.x.copy()
            xp[self.int_idx] = np.round(xp[self.int_idx])
            return self._score(out), xp
        xr = x.copy()
        xr[self.int_idx] = np.round(xr[self.int_idx])
        return -float(self.am.c @ xr), xr

    def _expand(self, engine, node: _Node, deadline) -> list[tuple[dict, LPOutcome, tuple]]:
        j = self._branch_var(node.x)
        v = node.x[j]
        lb, ub = self._bounds(node.changes)
        kids = []
        for lo, hi in ((lb[j], math.floor(v)), (math.ceil(v), ub[j])):
            changes = dict(node.changes)
            changes[j] = (float(lo), float(hi))
            try:
                out = self._solve(engine, changes, node.basis, deadline)
            except NumericalError as exc:
                raise NumericalError(f"node at depth {node.depth + 1} (branch on {self.am.names[j]}): {exc}") from exc
            polished = None
            if out.status == "optimal" and not self._fractional(out.x).any():
                polished = self._polish(engine, out.x, changes, out.basis, deadline)
            kids.append((changes, out, polished))
        return kids

    def _offer(self, score: float, x: np.ndarray) -> None:
        if self.inc_x is None or score > self.inc_score + 1e-12 * max(1.0, abs(self.inc_score)):
            self.inc_score, self.inc_x = score, x
            self.incumbents += 1
            self.heap = [n for n in self.heap if not self._prunable(n.score)]
            heapq.heapify(self.heap)

    def _accept(self, changes, out, polished, depth) -> _Node | None:
        self.lp_solves += 1
        if out.status != "optimal":
            return None
        score = self._score(out)
        if polished is not None:
            self._offer(*polished)
            return None
        if self._prunable(score):
            return None
        self.max_depth = max(self.max_depth, depth)
        return _Node((-score, -depth, next(self.seq)), depth, changes, score, out.x, out.basis)

    def global_bound(self, extra: list[_Node] = ()) -> float:
        best = max([n.score for n in self.heap] + [n.score for n in extra], default=-math.inf)
        return max(best, self.inc_score)


def solve_milp(model: ModelIR, cfg: SolverConfig | None = None) -> SolveResult:
    """Solve ``model`` to within ``cfg.mip_gap`` by best-bound branch-and-bound.

    With ``workers > 1`` the best open nodes are expanded in synchronous
    batches, so results depend only on the worker count.
    """
    cfg = cfg or SolverConfig()
    start = time.monotonic()
    deadline = start + cfg.time_limit_s
    S = _Search(model, cfg)
    am = S.am
    sign = am.obj_sign

    def report(status: str, bound_score: float) -> SolveResult:
        stats = {
            "nodes": S.lp_solves,
            "simplex_iterations": sum(e.iterations for e in S.engines),
            "bland_pivots": sum(e.bland_pivots for e in S.engines),
            "incumbents": S.incumbents,
            "open_nodes": len(S.heap),
            "max_depth": S.max_depth,
            "root_bound": root_bound,
            "start_used": start_used,
            "wall_time_s": time.monotonic() - start,
        }
        if S.inc_x is None:
            bound = None if not math.isfinite(bound_score) else -sign * bound_score
            return SolveResult(status, None, bound, stats=stats)
        obj = -sign * S.inc_score + 0.0  # no signed zero in reports
        bound = -sign * max(bound_score, S.inc_score)
        assignment = dict(zip(am.names, map(float, S.inc_x)))
        gap = relative_gap(S.inc_score, max(bound_score, S.inc_score))
        return SolveResult(status, obj, bound, assignment, gap, stats)

    root_bound = None
    start_used = False
    if model.start is not None and all(v.name in model.start for v in model.variables):
        if verify(model, model.start, cfg.feas_tol).ok:
            x0 = np.array([float(model.start[n]) for n in am.names])
            x0[S.int_idx] = np.round(x0[S.int_idx])
            S._offer(-float(am.c @ x0), x0)
            start_used = True
    engine = S.engines[0]
    try:
        root = engine.solve(deadline=deadline)
    except TimeLimitReached:
        return report("time-limit", math.inf)
    S.lp_solves += 1
    if root.status != "optimal":
        return report(root.status, -math.inf)
    root_bound = -sign * S._score(root)
    if not S._fractional(root.x).any():
        S._offer(*S._polish(engine, root.x, {}, root.basis, deadline))
        return report("optimal", S.inc_score)
    S.heap.append(_Node((-S._score(root), 0, next(S.seq)), 0, {}, S._score(root), root.x, root.basis))

    pool = ThreadPoolExecutor(cfg.workers) if cfg.workers > 1 else None
    try:
        while S.heap:
            if time.monotonic() > deadline:
                return report("time-limit", S.global_bound())
            top = S.heap[0].score
            if S.inc_x is not None and relative_gap(S.inc_score, top) <= cfg.mip_gap:
                return report("gap-limit", top)
            if S.incumbents >= cfg.solution_limit:
                return report("solution-limit", top)
            batch = []
            while S.heap and len(batch) < cfg.workers:
                node = heapq.heappop(S.heap)
                if not S._prunable(node.score):
                    batch.append(node)
            if not batch:
                continue
            try:
                if pool is None or len(batch) == 1:
                    expanded = [S._expand(engine, batch[0], deadline)]
                else:
                    futures = [pool.submit(S._expand, S.engines[k], n, deadline) for k, n in enumerate(batch)]
                    expanded = [f.result() for f in futures]
            except TimeLimitReached:
                return report("time-limit", S.global_bound(batch))
            # children are merged in batch order, so the search is deterministic
            for node, kids in zip(batch, expanded):
                for changes, out, polished in kids:
                    child = S._accept(changes, out, polished, node.depth + 1)
                    if child is not None:
                        heapq.heappush(S.heap, child)
    finally:
        if pool is not None:
            pool.shutdown()

    if S.inc_x is None:
        return report("infeasible", -math.inf)
    return report("optimal", S.inc_score)
