"""Sparse and dense linear algebra used by all solver modules.

Triplet accumulation converts to SciPy CSR; direct solves go through
SuperLU; symmetric generalized eigenproblems and the spectral fractional
Gram matrices are dense (desk scale).  All entry points are deterministic
in single-threaded use.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SingularSystemError(RuntimeError):
    """Direct solve failed; ``pivot_index`` locates the offending pivot when known."""

    def __init__(self, message: str, pivot_index: int = -1):
        super().__init__(message)
        self.pivot_index = pivot_index


class TripletBuffer:
    """Accumulates (row, col, value) entries; duplicates are summed on conversion."""

    def __init__(self, nrows: int, ncols: int):
        self.nrows = int(nrows)
        self.ncols = int(ncols)
        self._rows: list[np.ndarray] = []
        self._cols: list[np.ndarray] = []
        self._vals: list[np.ndarray] = []

    def add(self, rows, cols, values) -> None:
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        values = np.asarray(values, dtype=float).ravel()
        if not (rows.size == cols.size == values.size):
            raise ValueError("rows, cols and values must have equal length")
        if rows.size == 0:
            return
        if rows.min() < 0 or rows.max() >= self.nrows:
            raise ValueError("row index out of range")
        if cols.min() < 0 or cols.max() >= self.ncols:
            raise ValueError("column index out of range")
        self._rows.append(rows)
        self._cols.append(cols)
        self._vals.append(values)


def to_csr(buf: TripletBuffer) -> sp.csr_matrix:
    """Convert a triplet buffer to canonical CSR (duplicates summed, indices sorted)."""
    if not buf._rows:
        return sp.csr_matrix((buf.nrows, buf.ncols))
    rows = np.concatenate(buf._rows)
    cols = np.concatenate(buf._cols)
    vals = np.concatenate(buf._vals)
    mat = sp.coo_matrix((vals, (rows, cols)), shape=(buf.nrows, buf.ncols)).tocsr()
    mat.sum_duplicates()
    mat.sort_indices()
    return mat


def _locate_bad_pivot(dense: np.ndarray) -> int:
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(dense, check_finite=False)
    diag = np.abs(np.diag(lu))
    scale = np.abs(dense).max(axis=1)
    scale[scale == 0] = 1.0
    bad = np.nonzero(diag <= 1e-14 * scale)[0]
    return int(bad[0]) if bad.size else int(np.argmin(diag))


def solve_sparse(matrix, rhs: np.ndarray) -> np.ndarray:
    """Solve a square sparse system by LU with partial pivoting.

    Guarantees a relative residual below 1e-10 (one step of iterative
    refinement is applied if needed); raises SingularSystemError otherwise.
    """
    mat = sp.csc_matrix(matrix)
    if mat.shape[0] != mat.shape[1]:
        raise ValueError(f"matrix is {mat.shape}, expected square")
    rhs = np.asarray(rhs, dtype=float)
    try:
        lu = spla.splu(mat)
        x = lu.solve(rhs)
    except RuntimeError as exc:
        pivot = _locate_bad_pivot(mat.toarray()) if mat.shape[0] <= 2000 else -1
        raise SingularSystemError(
            f"sparse LU failed ({exc}); suspect pivot index {pivot}", pivot) from exc
    if not np.all(np.isfinite(x)):
        pivot = _locate_bad_pivot(mat.toarray()) if mat.shape[0] <= 2000 else -1
        raise SingularSystemError(
            f"sparse LU produced non-finite entries; suspect pivot index {pivot}", pivot)
    bnorm = np.linalg.norm(rhs)
    if bnorm > 0:
        res = np.linalg.norm(mat @ x - rhs) / bnorm
        if res > 1e-10:
            x = x + lu.solve(rhs - mat @ x)
            res = np.linalg.norm(mat @ x - rhs) / bnorm
        if res > 1e-10:
            raise SingularSystemError(
                f"solve residual {res:.3e} exceeds 1e-10; system near-singular")
    return x


def _check_symmetric(mat: np.ndarray, name: str, tol: float = 1e-12) -> None:
    scale = max(np.abs(mat).max(), 1.0)
    if np.abs(mat - mat.T).max() > tol * scale:
        raise ValueError(f"{name} is not symmetric within {tol} relative")


def generalized_eig(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of A v = mu B v for symmetric A, SPD B.

    Returns eigenvalues ascending and B-orthonormal eigenvectors as columns.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.shape[0] != a.shape[1]:
        raise ValueError("A and B must be square with equal shape")
    if a.shape[0] > 5000:
        raise ValueError("dense eigensolve limited to dimension 5000")
    _check_symmetric(a, "A")
    _check_symmetric(b, "B")
    try:
        np.linalg.cholesky(b)
    except np.linalg.LinAlgError as exc:
        raise ValueError("B is not positive definite") from exc
    vals, vecs = scipy.linalg.eigh(a, b)
    return vals, vecs


def fractional_gram(mass: np.ndarray, stiffness: np.ndarray, exponent: float) -> np.ndarray:
    """Gram matrix of a discrete fractional-order norm on a finite element space.

    Built from the shifted pencil (K + M) v = mu M v, whose spectrum is >= 1,
    as  M V diag(mu^s) V^T M  with M-orthonormal eigenvectors V.  s = 0
    returns the mass matrix itself; s = 1 reconstructs K + M; s = -1/2 gives
    the dual-trace norm used for the coupling multiplier.
    """
    mass = np.asarray(mass, dtype=float)
    stiffness = np.asarray(stiffness, dtype=float)
    if exponent == 0:
        return mass.copy()
    vals, vecs = generalized_eig(stiffness + mass, mass)
    powers = vals ** exponent
    mv = mass @ vecs
    return (mv * powers) @ mv.T
