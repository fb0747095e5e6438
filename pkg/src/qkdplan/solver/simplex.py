"""Bounded-variable revised simplex (primal and dual).

Works on ``min c.x  s.t.  A x + s = rhs,  lb <= x <= ub`` where each row owns
a logical column ``s`` whose bounds encode the row sense. The column set is
fixed, so an optimal basis can be handed to a child problem with tightened
bounds and re-optimized with the dual simplex.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..model import ArrayModel, ModelIR
from .basis import DenseBasis, SparseBasis
from .result import NumericalError, SolveResult, SolverConfig, relative_gap

BASIC, AT_LB, AT_UB, FREE = 0, 1, 2, 3

DENSE_MAX_ROWS = 600
PIVOT_TOL = 1e-7
REL_PIVOT_TOL = 1e-7
REFACTOR_EVERY = 64
STALL_THRESHOLD = 50
PERTURBATION = 1e-5


def geometric_scaling(A: sp.spmatrix, passes: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Row and column factors that pull each row's and column's nonzero
    magnitudes toward 1. Factors are powers of two, so scaling is exact."""
    m, n = A.shape
    r, c = np.ones(m), np.ones(n)
    M = sp.csr_matrix(abs(A))
    M.eliminate_zeros()
    if M.nnz == 0:
        return r, c
    coo = M.tocoo()
    logv = np.log2(coo.data)
    for _ in range(passes):
        v = logv + np.log2(r)[coo.row] + np.log2(c)[coo.col]
        rmax = np.full(m, -np.inf)
        rmin = np.full(m, np.inf)
        np.maximum.at(rmax, coo.row, v)
        np.minimum.at(rmin, coo.row, v)
        has = np.isfinite(rmax)
        r[has] *= np.exp2(-(rmax[has] + rmin[has]) / 2)
        v = logv + np.log2(r)[coo.row] + np.log2(c)[coo.col]
        cmax = np.full(n, -np.inf)
        cmin = np.full(n, np.inf)
        np.maximum.at(cmax, coo.col, v)
        np.minimum.at(cmin, coo.col, v)
        has = np.isfinite(cmax)
        c[has] *= np.exp2(-(cmax[has] + cmin[has]) / 2)
    return np.exp2(np.round(np.log2(r))), np.exp2(np.round(np.log2(c)))


class TimeLimitReached(Exception):
    pass


@dataclass
class Basis:
    """Snapshot used to warm-start a later solve."""

    head: np.ndarray
    status: np.ndarray


@dataclass
class LPOutcome:
    status: str  # optimal | infeasible | unbounded
    x: np.ndarray | None
    objective: float  # in the minimization sense of ``ArrayModel.c``
    basis: Basis | None
    iterations: int


class SimplexSolver:
    """Reusable LP engine for one :class:`ArrayModel`.

    Bounds may be replaced per call; the constraint matrix may not.
    """

    def __init__(
        self,
        am: ArrayModel,
        feas_tol: float = 1e-6,
        opt_tol: float = 1e-7,
        dense: bool | None = None,
        stall_threshold: int = STALL_THRESHOLD,
        seed: int = 0,
        perturbation: float | None = None,
    ):
        self.am = am
        m, n = am.A.shape
        self.m, self.n = m, n
        self.feas_tol = feas_tol
        self.opt_tol = opt_tol
        self.stall_threshold = stall_threshold
        self.rng = np.random.default_rng(seed)
        if perturbation is None:
            # small models solve fine unperturbed and keep cleaner vertices
            perturbation = PERTURBATION if m > DENSE_MAX_ROWS else 0.0
        self.perturbation = perturbation
        self.row_scale, self.col_scale = geometric_scaling(am.A)
        scaled = sp.diags(self.row_scale) @ am.A @ sp.diags(self.col_scale)
        self.full = sp.hstack([scaled, sp.identity(m, format="csc")], format="csc")
        self.full.sort_indices()
        self.fullT = self.full.T.tocsr()
        self.c = np.concatenate([am.c * self.col_scale, np.zeros(m)])
        slack_lb = np.zeros(m)
        slack_ub = np.zeros(m)
        for i, sense in enumerate(am.senses):
            if sense == "<=":
                slack_ub[i] = math.inf
            elif sense == ">=":
                slack_lb[i] = -math.inf
        self.slack_lb, self.slack_ub = slack_lb, slack_ub
        self.b = np.asarray(am.rhs, dtype=float) * self.row_scale
        if dense is None:
            dense = m <= DENSE_MAX_ROWS
        self.factory = DenseBasis if dense else SparseBasis
        self.iterations = 0
        self.bland_pivots = 0

    # -- helpers ------------------------------------------------------------

    def _col(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        p0, p1 = self.full.indptr[j], self.full.indptr[j + 1]
        return self.full.indices[p0:p1], self.full.data[p0:p1]

    def _refactor(self) -> None:
        self.fac.refactor(self.full[:, self.head])
        self._recompute_x()

    def _recompute_x(self) -> None:
        x = self.x
        x[self.head] = 0.0
        self.x[self.head] = self.fac.ftran(self.b - self.full @ x)

    def _nonbasic_value(self, j: int, status: int) -> tuple[int, float]:
        lo, hi = self.lb[j], self.ub[j]
        if status == AT_UB and hi < math.inf:
            return AT_UB, hi
        if lo > -math.inf:
            return AT_LB, lo
        if hi < math.inf:
            return AT_UB, hi
        return FREE, 0.0

    def _setup(self, lb: np.ndarray, ub: np.ndarray, warm: Basis | None) -> None:
        self.lb = np.concatenate([lb / self.col_scale, self.slack_lb])
        self.ub = np.concatenate([ub / self.col_scale, self.slack_ub])
        if np.any(self.lb > self.ub + 1e-12):
            raise _Infeasible()
        total = self.n + self.m
        self.x = np.zeros(total)
        self.fac = self.factory(self.m)
        if warm is not None:
            self.head = warm.head.copy()
            self.status = warm.status.copy()
        else:
            self.head = np.arange(self.n, total)
            self.status = np.full(total, AT_LB, dtype=np.int8)
            self.status[self.head] = BASIC
        self.is_basic = self.status == BASIC
        self._snap_nonbasic()
        try:
            self._refactor()
        except NumericalError:
            if warm is None:
                raise
            self._setup(lb, ub, None)

    def _snap_nonbasic(self) -> None:
        for j in np.flatnonzero(~self.is_basic):
            self.status[j], self.x[j] = self._nonbasic_value(j, self.status[j])

    def _reduced_costs(self, cost: np.ndarray) -> np.ndarray:
        y = self.fac.btran(cost[self.head])
        d = cost - self.fullT @ y
        d[self.head] = 0.0
        return d

    def _primal_infeasibility(self) -> np.ndarray:
        xb = self.x[self.head]
        lo, hi = self.lb[self.head], self.ub[self.head]
        return np.maximum(lo - xb, 0.0) + np.maximum(xb - hi, 0.0)

    def _pivot(self, r: int, q: int, w: np.ndarray, leave_status: int, leave_value: float) -> None:
        leaving = self.head[r]
        self.head[r] = q
        self.status[q] = BASIC
        self.is_basic[q] = True
        self.status[leaving] = leave_status
        self.is_basic[leaving] = False
        self.x[leaving] = leave_value
        self.fac.update(r, w)
        if self.fac.updates >= REFACTOR_EVERY:
            self._refactor()

    def _tick(self, deadline: float | None) -> None:
        self.iterations += 1
        if self.iterations % 50 == 0 and deadline is not None and time.monotonic() > deadline:
            raise TimeLimitReached()
        if self.iterations > self.iteration_cap:
            raise NumericalError(f"simplex iteration cap {self.iteration_cap} exceeded")

    # -- primal ------------------------------------------------------------

    def _primal(self, deadline: float | None) -> str:
        """Composite primal simplex: minimizes the sum of bound violations of
        basic variables until none remain, then the true objective.
        """
        ftol, otol = self.feas_tol, self.opt_tol
        stall, bland = 0, False
        while True:
            self._tick(deadline)
            xb = self.x[self.head]
            lo, hi = self.lb[self.head], self.ub[self.head]
            below = xb < lo - ftol
            above = xb > hi + ftol
            phase1 = bool(below.any() or above.any())
            if phase1:
                cost = np.zeros(self.n + self.m)
                cost[self.head] = above.astype(float) - below.astype(float)
            else:
                cost = self.c
            d = self._reduced_costs(cost)
            st = self.status
            elig = ((st == AT_LB) & (d < -otol)) | ((st == AT_UB) & (d > otol)) | (
                (st == FREE) & (np.abs(d) > otol)
            )
            fixed = self.lb == self.ub
            elig &= ~fixed
            cands = np.flatnonzero(elig)
            if cands.size == 0:
                return "infeasible" if phase1 else "optimal"
            if bland:
                q = int(cands[0])
                self.bland_pivots += 1
            else:
                q = int(cands[np.argmax(np.abs(d[cands]))])
            direction = 1.0 if (st[q] == AT_LB or (st[q] == FREE and d[q] < 0)) else -1.0
            idx, vals = self._col(q)
            w = self.fac.ftran_sparse(idx, vals)
            delta = -direction * w  # change of x_B per unit step
            flip = self.ub[q] - self.lb[q]
            ptol = max(PIVOT_TOL, REL_PIVOT_TOL * np.abs(w).max(initial=0.0))
            target = self._targets(delta, ptol, lo, hi, below, above)
            limited = np.isfinite(target)
            if not limited.any() and not math.isfinite(flip) and ptol > PIVOT_TOL:
                # only tiny pivots limit the ray; accept them rather than call it unbounded
                target = self._targets(delta, PIVOT_TOL, lo, hi, below, above)
                limited = np.isfinite(target)

            if limited.any():
                rows = np.flatnonzero(limited)
                dr = delta[rows]
                exact = np.maximum((target[rows] - xb[rows]) / dr, 0.0)
                if bland:
                    tmin = exact.min()
                    tie = rows[exact <= tmin + 1e-12]
                    r = int(tie[np.argmin(self.head[tie])])
                    step = float(tmin)
                else:
                    relaxed = (target[rows] + np.sign(dr) * ftol - xb[rows]) / dr
                    tmax = relaxed.min()
                    ok = exact <= tmax
                    pick = rows[ok][np.argmax(np.abs(dr[ok]))]
                    r = int(pick)
                    step = float(exact[ok][np.argmax(np.abs(dr[ok]))])
            else:
                r, step = -1, math.inf

            if flip <= step:
                if not math.isfinite(flip):
                    if phase1:
                        raise NumericalError("unbounded direction during phase 1")
                    return "unbounded"
                self.x[self.head] += delta * flip
                self.x[q] = self.ub[q] if direction > 0 else self.lb[q]
                st[q] = AT_UB if direction > 0 else AT_LB
                stall, bland = 0, False
                continue

            self.x[self.head] += delta * step
            self.x[q] += direction * step
            tgt = target[r]
            leave_status = AT_LB if tgt == self.lb[self.head[r]] else AT_UB
            self._pivot(r, q, w, leave_status, tgt)
            if step * abs(d[q]) <= 1e-12:
                stall += 1
                if stall >= self.stall_threshold:
                    bland = True
            else:
                stall, bland = 0, False

    def _targets(self, delta, ptol, lo, hi, below, above) -> np.ndarray:
        """Bound each basic variable runs into along ``delta`` (nan if none)."""
        inc = (delta > ptol) & ~above
        dec = (delta < -ptol) & ~below
        target = np.full(self.m, np.nan)
        target[inc] = np.where(below[inc], lo[inc], hi[inc])
        target[dec] = np.where(above[dec], hi[dec], lo[dec])
        return target

    def _perturbed_primal(self, deadline: float | None) -> str:
        """Primal simplex on outward-shifted bounds, then a clean-up pass on
        the true bounds. The shift breaks the ties that make flow rows
        degenerate; since it only relaxes the problem, infeasibility and
        unboundedness carry over unchanged.
        """
        if self.perturbation <= 0:
            return self._primal(deadline)
        true_lb, true_ub = self.lb, self.ub
        movable = np.ones(self.n + self.m, dtype=bool)
        movable[: self.n] = true_lb[: self.n] < true_ub[: self.n]
        noise = self.perturbation * self.rng.uniform(1.0, 2.0, self.n + self.m)
        with np.errstate(invalid="ignore"):
            self.lb = np.where(movable, true_lb - noise * (1.0 + np.abs(true_lb)), true_lb)
            self.ub = np.where(movable, true_ub + noise * (1.0 + np.abs(true_ub)), true_ub)
        try:
            self._snap_nonbasic()
            self._recompute_x()
            status = self._primal(deadline)
        finally:
            self.lb, self.ub = true_lb, true_ub
            self._snap_nonbasic()
            self._recompute_x()
        if status != "optimal":
            return status
        if self._dual_feasible(self._reduced_costs(self.c)) and self._dual(deadline) == "infeasible":
            return "infeasible"
        return self._primal(deadline)

    def _perturbed_dual(self, deadline: float | None) -> str:
        """Dual simplex on costs nudged away from zero in the direction that
        keeps the current basis dual feasible. Zero-cost flow columns
        otherwise make almost every dual step degenerate.
        """
        if self.perturbation <= 0:
            return self._dual(deadline)
        true_c = self.c
        noise = self.perturbation * self.rng.uniform(1.0, 2.0, self.n + self.m) * (1.0 + np.abs(true_c))
        sign = np.where(self.status == AT_UB, -1.0, 1.0)
        sign[(self.status == FREE) | self.is_basic] = 0.0
        self.c = true_c + sign * noise
        try:
            return self._dual(deadline)
        finally:
            self.c = true_c

    # -- dual --------------------------------------------------------------

    def _dual_feasible(self, d: np.ndarray) -> bool:
        st = self.status
        otol = self.opt_tol
        fixed = self.lb == self.ub
        bad = ((st == AT_LB) & (d < -otol)) | ((st == AT_UB) & (d > otol)) | (
            (st == FREE) & (np.abs(d) > otol)
        )
        return not (bad & ~fixed).any()

    def _dual(self, deadline: float | None) -> str:
        ftol, otol = self.feas_tol, self.opt_tol
        stall, bland = 0, False
        fixed = self.lb == self.ub
        while True:
            self._tick(deadline)
            xb = self.x[self.head]
            lo, hi = self.lb[self.head], self.ub[self.head]
            viol = np.maximum(lo - xb, 0.0) + np.maximum(xb - hi, 0.0)
            infeas = np.flatnonzero(viol > ftol)
            if infeas.size == 0:
                return "optimal"
            if bland:
                r = int(infeas[np.argmin(self.head[infeas])])
            else:
                r = int(infeas[np.argmax(viol[infeas])])
            to_lower = xb[r] < lo[r]
            rho = self.fac.row(r)
            alpha = self.fullT @ rho
            d = self._reduced_costs(self.c)
            st = self.status
            nb = ~self.is_basic & ~fixed
            ptol = max(PIVOT_TOL, REL_PIVOT_TOL * np.abs(alpha[nb]).max(initial=0.0))
            if to_lower:
                elig = nb & (((st == AT_LB) & (alpha < -ptol)) | ((st == AT_UB) & (alpha > ptol)))
            else:
                elig = nb & (((st == AT_LB) & (alpha > ptol)) | ((st == AT_UB) & (alpha < -ptol)))
            elig |= nb & (st == FREE) & (np.abs(alpha) > ptol)
            cands = np.flatnonzero(elig)
            if cands.size == 0:
                return "infeasible"
            a = np.abs(alpha[cands])
            dd = np.abs(d[cands])
            ratio = dd / a
            if bland:
                tmin = ratio.min()
                q = int(cands[ratio <= tmin + 1e-12][0])
                self.bland_pivots += 1
            else:
                tmax = ((dd + otol) / a).min()
                ok = ratio <= tmax
                q = int(cands[ok][np.argmax(a[ok])])
            idx, vals = self._col(q)
            w = self.fac.ftran_sparse(idx, vals)
            if abs(w[r]) < PIVOT_TOL or abs(w[r] - alpha[q]) > 1e-6 * max(1.0, abs(w[r])):
                # row and column disagree on the pivot: rebuild and retry
                if self.fac.updates == 0:
                    raise NumericalError("unstable dual pivot")
                self._refactor()
                continue
            target = lo[r] if to_lower else hi[r]
            step = (xb[r] - target) / w[r]
            self.x[self.head] -= w * step
            self.x[q] += step
            dual_step = abs(d[q]) / abs(alpha[q])
            self._pivot(r, q, w, AT_LB if to_lower else AT_UB, target)
            if dual_step <= 1e-12:
                stall += 1
                if stall >= self.stall_threshold:
                    bland = True
            else:
                stall, bland = 0, False

    # -- driver ------------------------------------------------------------

    def solve(
        self,
        lb: np.ndarray | None = None,
        ub: np.ndarray | None = None,
        warm: Basis | None = None,
        deadline: float | None = None,
    ) -> LPOutcome:
        lb = self.am.lb if lb is None else lb
        ub = self.am.ub if ub is None else ub
        start_iters = self.iterations
        self.iteration_cap = self.iterations + 50 * (self.m + self.n) + 1000
        try:
            self._setup(lb, ub, warm)
        except _Infeasible:
            return LPOutcome("infeasible", None, math.inf, None, 0)

        status = None
        if warm is not None:
            try:
                if self._dual_feasible(self._reduced_costs(self.c)):
                    if self._perturbed_dual(deadline) == "infeasible":
                        return LPOutcome("infeasible", None, math.inf, None, self.iterations - start_iters)
                    status = self._perturbed_primal(deadline)
            except NumericalError:
                # the warm path broke down: start over from the slack basis
                self._setup(lb, ub, None)
                status = None
        if status is None:
            status = self._perturbed_primal(deadline)
        for _ in range(3):
            if status != "optimal":
                break
            # clean up drift accumulated through eta updates
            self._refactor()
            if self._primal_infeasibility().max(initial=0.0) <= self.feas_tol:
                break
            status = self._primal(deadline)
        iters = self.iterations - start_iters
        if status != "optimal":
            return LPOutcome(status, None, -math.inf if status == "unbounded" else math.inf, None, iters)
        x = self.x[: self.n] * self.col_scale
        basis = Basis(self.head.copy(), self.status.copy())
        return LPOutcome("optimal", x, float(self.am.c @ x), basis, iters)


class _Infeasible(Exception):
    pass


def solve_lp(model: ModelIR, cfg: SolverConfig | None = None) -> SolveResult:
    """Solve the continuous relaxation of ``model`` with the revised simplex."""
    cfg = cfg or SolverConfig()
    am = model.to_arrays()
    start = time.monotonic()
    engine = SimplexSolver(am, cfg.feas_tol, cfg.opt_tol, seed=cfg.seed)
    try:
        out = engine.solve(deadline=start + cfg.time_limit_s)
    except TimeLimitReached:
        return SolveResult("time-limit", None, None, stats=_stats(engine, start))
    stats = _stats(engine, start)
    if out.status != "optimal":
        return SolveResult(out.status, None, None, stats=stats)
    obj = am.obj_sign * out.objective + 0.0
    assignment = dict(zip(am.names, map(float, out.x)))
    return SolveResult("optimal", obj, obj, assignment, relative_gap(obj, obj), stats)


def _stats(engine: SimplexSolver, start: float) -> dict:
    return {
        "nodes": 0,
        "simplex_iterations": engine.iterations,
        "bland_pivots": engine.bland_pivots,
        "wall_time_s": time.monotonic() - start,
    }
