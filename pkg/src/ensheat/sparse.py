"""Sparse CSR utilities and a reusable SPD factorization.

The direct solver is a banded Cholesky computed after a reverse
Cuthill-McKee reordering.  One factorization serves an unlimited number of
right-hand sides, and the triangular sweeps use only elementwise column
updates (no reductions), so solving a block of columns jointly is
bit-identical to solving them one at a time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import reverse_cuthill_mckee

# Relative pivot threshold: the operators assembled by this package are SPD
# by construction, so a tiny or negative pivot indicates an assembly bug.
PIVOT_RTOL = 1e-13


class NotSpdError(ValueError):
    """Raised when a factorization pivot is not acceptably positive."""


def csr_from_triplets(n: int, rows, cols=None, values=None) -> sp.csr_array:
    """Canonical n x n CSR from (row, col, value) triplets.

    Duplicate entries are summed.  ``rows`` may alternatively be an
    iterable of (i, j, v) triples, in which case ``cols``/``values`` are
    not given.

    Raises
    ------
    ValueError
        If any index is out of range.
    """
    if cols is None and values is None:
        trip = list(rows)
        if trip:
            rows = np.array([t[0] for t in trip], dtype=np.int64)
            cols = np.array([t[1] for t in trip], dtype=np.int64)
            values = np.array([t[2] for t in trip], dtype=np.float64)
        else:
            rows = np.empty(0, dtype=np.int64)
            cols = np.empty(0, dtype=np.int64)
            values = np.empty(0, dtype=np.float64)
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    values = np.asarray(values, dtype=np.float64)
    if rows.size and (rows.min() < 0 or rows.max() >= n):
        raise ValueError("row index out of range")
    if cols.size and (cols.min() < 0 or cols.max() >= n):
        raise ValueError("column index out of range")
    A = sp.coo_array((values, (rows, cols)), shape=(n, n)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def add_scaled(A: sp.csr_array, B: sp.csr_array, alpha: float, beta: float) -> sp.csr_array:
    """alpha*A + beta*B on the union sparsity pattern."""
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch: {A.shape} vs {B.shape}")
    C = (A * alpha + B * beta).tocsr()
    C.sort_indices()
    return C


def matvec(A: sp.csr_array, x: np.ndarray) -> np.ndarray:
    """A @ x with an explicit dimension check."""
    x = np.asarray(x)
    if x.shape[0] != A.shape[1]:
        raise ValueError(f"dimension mismatch: {A.shape} @ {x.shape}")
    return A @ x


def _lower_band_from_csr(A: sp.csr_array) -> tuple[np.ndarray, int]:
    """Lower band of a symmetric CSR matrix.

    Returns ``C`` of shape (n, w+1) with ``C[j, m] = A[j+m, j]`` and the
    half bandwidth ``w``.
    """
    n = A.shape[0]
    coo = A.tocoo()
    lower = coo.row >= coo.col
    r = coo.row[lower]
    c = coo.col[lower]
    v = coo.data[lower]
    w = int((r - c).max()) if len(r) else 0
    C = np.zeros((n, w + 1), dtype=np.float64)
    C[c, r - c] = v
    return C, w


@dataclass(eq=False)
class SpdFactorization:
    """Cholesky factorization P A P^T = L L^T, reusable for many solves.

    ``perm`` is the fill-reducing permutation (row i of the permuted system
    is row ``perm[i]`` of the original).  The factor is held in banded
    storage; ``lower_factor()`` materializes it as sparse for inspection.
    """

    n: int
    perm: np.ndarray
    bandwidth: int
    _lband: np.ndarray   # _lband[j, m] = L[j+m, j]
    _uband: np.ndarray   # _uband[j, m] = L[j, j-m]

    def lower_factor(self) -> sp.csr_array:
        """The lower-triangular factor L (in permuted ordering) as CSR."""
        n, w = self.n, self.bandwidth
        j = np.repeat(np.arange(n), w + 1)
        m = np.tile(np.arange(w + 1), n)
        keep = (j + m < n) & (self._lband[j, m] != 0.0)
        return csr_from_triplets(n, (j + m)[keep], j[keep], self._lband[j, m][keep])

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Solve A x = b for one vector or a matrix of right-hand sides.

        The forward/back substitutions update whole column blocks with
        elementwise operations only, so each column's result is bitwise
        independent of how many other columns are solved alongside it.
        """
        b = np.asarray(b, dtype=np.float64)
        if b.shape[0] != self.n:
            raise ValueError(f"dimension mismatch: n={self.n}, rhs {b.shape}")
        single = b.ndim == 1
        X = b.reshape(self.n, 1).copy() if single else b.copy()
        X = X[self.perm]
        n, w = self.n, self.bandwidth
        L, U = self._lband, self._uband
        for j in range(n):
            xj = X[j] / L[j, 0]
            X[j] = xj
            m = min(w, n - 1 - j)
            if m:
                X[j + 1:j + 1 + m] -= L[j, 1:1 + m, None] * xj
        for j in range(n - 1, -1, -1):
            xj = X[j] / U[j, 0]
            X[j] = xj
            m = min(w, j)
            if m:
                X[j - m:j] -= U[j, 1:1 + m][::-1, None] * xj
        out = np.empty_like(X)
        out[self.perm] = X
        return out[:, 0] if single else out


def factorize_spd(A: sp.csr_array, ordering: str = "rcm") -> SpdFactorization:
    """Sparse Cholesky of a symmetric positive definite matrix.

    Parameters
    ----------
    A : symmetric CSR matrix (explicit symmetric storage).
    ordering : "rcm" for reverse Cuthill-McKee bandwidth reduction,
        "natural" to factor in the given ordering.

    Raises
    ------
    NotSpdError
        If a pivot falls at or below ``PIVOT_RTOL`` times the largest
        diagonal entry; the message names the offending index.
    """
    A = sp.csr_array(A)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix must be square, got {A.shape}")
    asym = abs(A - A.T)
    if asym.nnz and asym.max() > 1e-12 * max(abs(A).max(), 1.0):
        raise ValueError("matrix is not symmetric")

    if ordering == "rcm":
        perm = np.asarray(reverse_cuthill_mckee(A, symmetric_mode=True), dtype=np.int64)
    elif ordering == "natural":
        perm = np.arange(A.shape[0], dtype=np.int64)
    else:
        raise ValueError(f"unknown ordering {ordering!r}")

    Ap = A[perm][:, perm].tocsr()
    C, w = _lower_band_from_csr(Ap)
    n = A.shape[0]
    max_diag = C[:, 0].max() if n else 1.0
    pivot_floor = PIVOT_RTOL * max_diag

    # Right-looking banded Cholesky.  After eliminating column j, the
    # rank-one update touches columns j+1 .. j+w; the sheared gather G with
    # G[c, r] = v[c + r] (zero beyond the band) expresses the update on the
    # banded storage in one vectorized subtraction.
    idx = np.arange(w)[:, None] + np.arange(w)[None, :]
    for j in range(n):
        d = C[j, 0]
        if d <= pivot_floor:
            raise NotSpdError(
                f"pivot {d!r} at index {perm[j]} (elimination step {j}) is not "
                f"positive definite (threshold {pivot_floor!r})"
            )
        ljj = np.sqrt(d)
        C[j, 0] = ljj
        m = min(w, n - 1 - j)
        if m == 0:
            continue
        v = C[j, 1:1 + m] / ljj
        C[j, 1:1 + m] = v
        vpad = np.zeros(2 * m, dtype=np.float64)
        vpad[:m] = v
        G = vpad[idx[:m, :m]]
        C[j + 1:j + 1 + m, 0:m] -= v[:, None] * G

    # Transposed band for the back substitution: U[j, m] = L[j, j-m].
    rows = np.arange(n)[:, None] - np.arange(w + 1)[None, :]
    valid = rows >= 0
    U = np.where(valid, C[rows.clip(0), np.arange(w + 1)[None, :]], 0.0)

    return SpdFactorization(n=n, perm=perm, bandwidth=w, _lband=C, _uband=U)


def solve(fact: SpdFactorization, b: np.ndarray) -> np.ndarray:
    """Solve through an existing factorization (single or multi-RHS)."""
    return fact.solve(b)


@dataclass
class CgResult:
    x: np.ndarray
    iterations: int
    converged: bool
    relative_residual: float


def cg_solve(
    A: sp.csr_array,
    b: np.ndarray,
    tol: float = 1e-12,
    max_iter: int | None = None,
    precondition: bool = True,
) -> CgResult:
    """Conjugate gradients with an optional Jacobi preconditioner.

    Returns the iterate once the relative residual drops below ``tol`` or
    ``max_iter`` is reached; non-convergence is flagged on the result
    rather than raised.
    """
    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] != A.shape[0]:
        raise ValueError(f"dimension mismatch: {A.shape} vs rhs {b.shape}")
    n = A.shape[0]
    if max_iter is None:
        max_iter = 10 * n
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return CgResult(np.zeros_like(b), 0, True, 0.0)
    dinv = 1.0 / A.diagonal() if precondition else np.ones(n)
    x = np.zeros_like(b)
    r = b.copy()
    z = dinv * r
    p = z.copy()
    rz = r @ z
    for k in range(1, max_iter + 1):
        Ap = A @ p
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        rel = np.linalg.norm(r) / bnorm
        if rel <= tol:
            return CgResult(x, k, True, float(rel))
        z = dinv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    return CgResult(x, max_iter, False, float(np.linalg.norm(r) / bnorm))


def mm_write(path, A: sp.csr_array) -> None:
    """MatrixMarket coordinate export (debug helper)."""
    from scipy.io import mmwrite

    mmwrite(path, sp.coo_array(A))


def mm_read(path) -> sp.csr_array:
    """MatrixMarket coordinate import (debug helper)."""
    from scipy.io import mmread

    return sp.csr_array(mmread(path))
