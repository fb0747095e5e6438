"""Basis factorizations for the revised simplex.

Both keep the product form ``B^-1 = E_k ... E_1 B_0^-1`` between
refactorizations; the dense variant folds each eta into an explicit inverse.
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .result import NumericalError


class DenseBasis:
    """Explicit inverse, updated in place. Suited to a few hundred rows."""

    def __init__(self, m: int):
        self.m = m
        self.inv = np.eye(m)
        self.updates = 0

    def refactor(self, B: sp.spmatrix) -> None:
        dense = B.toarray() if sp.issparse(B) else np.asarray(B)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", la.LinAlgWarning)
                lu = la.lu_factor(dense, check_finite=False)
        except (ValueError, la.LinAlgError) as exc:
            raise NumericalError(f"basis factorization failed: {exc}") from exc
        diag = np.abs(np.diag(lu[0]))
        if diag.size and diag.min() <= 1e-11 * max(1.0, diag.max()):
            raise NumericalError("singular basis")
        self.inv = la.lu_solve(lu, np.eye(self.m), check_finite=False)
        self.updates = 0

    def ftran(self, v: np.ndarray) -> np.ndarray:
        return self.inv @ v

    def ftran_sparse(self, idx: np.ndarray, vals: np.ndarray) -> np.ndarray:
        return self.inv[:, idx] @ vals

    def btran(self, v: np.ndarray) -> np.ndarray:
        return v @ self.inv

    def row(self, r: int) -> np.ndarray:
        return self.inv[r].copy()

    def update(self, r: int, w: np.ndarray) -> None:
        pivot_row = self.inv[r] / w[r]
        self.inv -= np.outer(w, pivot_row)
        self.inv[r] = pivot_row
        self.updates += 1


class SparseBasis:
    """Sparse LU of the last refactorized basis plus an eta file."""

    def __init__(self, m: int):
        self.m = m
        self.lu = None
        self.etas: list[tuple[int, np.ndarray]] = []

    @property
    def updates(self) -> int:
        return len(self.etas)

    def refactor(self, B: sp.spmatrix) -> None:
        try:
            self.lu = spla.splu(sp.csc_matrix(B), permc_spec="COLAMD")
        except RuntimeError as exc:
            raise NumericalError(f"basis factorization failed: {exc}") from exc
        diag = np.abs(self.lu.U.diagonal())
        if diag.size and diag.min() <= 1e-11 * max(1.0, diag.max()):
            raise NumericalError("singular basis")
        self.etas = []

    def ftran(self, v: np.ndarray) -> np.ndarray:
        z = self.lu.solve(np.asarray(v, dtype=float))
        for r, w in self.etas:
            zr = z[r] / w[r]
            if zr != 0.0:
                z -= w * zr
            z[r] = zr
        return z

    def ftran_sparse(self, idx: np.ndarray, vals: np.ndarray) -> np.ndarray:
        v = np.zeros(self.m)
        v[idx] = vals
        return self.ftran(v)

    def btran(self, v: np.ndarray) -> np.ndarray:
        z = np.array(v, dtype=float)
        for r, w in reversed(self.etas):
            z[r] = (z[r] - (w @ z - w[r] * z[r])) / w[r]
        return self.lu.solve(z, trans="T")

    def row(self, r: int) -> np.ndarray:
        e = np.zeros(self.m)
        e[r] = 1.0
        return self.btran(e)

    def update(self, r: int, w: np.ndarray) -> None:
        self.etas.append((r, w.copy()))
