"""CSR storage and the symmetric positive definite solve behind every Newton step."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from loguru import logger

from .errors import AsymmetricMatrixError, LinearSolveError

SYMMETRY_TOL = 1e-10
DEFAULT_REL_TOL = 1e-12
_REFINEMENT_STEPS = 3


@dataclass(frozen=True, eq=False)
class CsrMatrix:
    """Immutable CSR matrix in canonical form (sorted columns, no duplicates)."""

    matrix: sp.csr_matrix

    @property
    def nrows(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def ncols(self) -> int:
        return int(self.matrix.shape[1])

    @property
    def shape(self) -> Tuple[int, int]:
        return self.nrows, self.ncols

    @property
    def row_ptr(self) -> np.ndarray:
        return self.matrix.indptr

    @property
    def col_idx(self) -> np.ndarray:
        return self.matrix.indices

    @property
    def vals(self) -> np.ndarray:
        return self.matrix.data

    @property
    def nnz(self) -> int:
        return int(self.matrix.nnz)

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def transpose(self) -> "CsrMatrix":
        return from_scipy(self.matrix.transpose())

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()

    def max_asymmetry(self) -> float:
        diff = self.matrix - self.matrix.transpose()
        return float(np.abs(diff.data).max()) if diff.nnz else 0.0

    def quadratic_form(self, x: np.ndarray) -> float:
        return float(x @ spmv(self, x))

    def __add__(self, other: "CsrMatrix") -> "CsrMatrix":
        if not isinstance(other, CsrMatrix):
            return NotImplemented
        if other.shape != self.shape:
            raise ValueError(f"Shape mismatch: {self.shape} vs {other.shape}")
        return from_scipy(self.matrix + other.matrix)

    def __mul__(self, scalar: float) -> "CsrMatrix":
        return from_scipy(self.matrix * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "CsrMatrix":
        return self * -1.0


def from_scipy(matrix: sp.spmatrix) -> CsrMatrix:
    csr = sp.csr_matrix(matrix, copy=True)
    csr.sum_duplicates()
    csr.sort_indices()
    return CsrMatrix(csr)


def csr_from_arrays(
    rows: np.ndarray,
    cols: np.ndarray,
    vals: np.ndarray,
    nrows: int,
    ncols: int,
) -> CsrMatrix:
    """Build a CSR matrix from coordinate arrays, summing duplicates.

    Entries are ordered by (row, col, value) before summation, so the stored
    sums do not depend on the order the triplets were generated in. The same
    ordering makes a symmetric multiset of triplets produce an exactly
    symmetric matrix.
    """
    rows = np.asarray(rows, dtype=np.int64).ravel()
    cols = np.asarray(cols, dtype=np.int64).ravel()
    vals = np.asarray(vals, dtype=float).ravel()
    if not (len(rows) == len(cols) == len(vals)):
        raise ValueError("Triplet arrays must have equal length")
    if len(rows) and (rows.min() < 0 or rows.max() >= nrows or cols.min() < 0 or cols.max() >= ncols):
        raise IndexError(f"Triplet index out of range for a {nrows}x{ncols} matrix")

    order = np.lexsort((vals, cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    if len(rows):
        starts = np.flatnonzero(np.r_[True, (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])])
        data = np.add.reduceat(vals, starts)
        rows, cols = rows[starts], cols[starts]
    else:
        data = vals
    indptr = np.zeros(nrows + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=nrows), out=indptr[1:])
    matrix = sp.csr_matrix((data, cols, indptr), shape=(nrows, ncols))
    matrix.has_sorted_indices = True
    return CsrMatrix(matrix)


def csr_from_triplets(triplets: Iterable[Tuple[int, int, float]], nrows: int, ncols: int) -> CsrMatrix:
    items = list(triplets)
    if not items:
        return csr_from_arrays(np.empty(0), np.empty(0), np.empty(0), nrows, ncols)
    rows, cols, vals = zip(*items)
    return csr_from_arrays(np.array(rows), np.array(cols), np.array(vals), nrows, ncols)


def assemble_blocks(
    blocks: Mapping[Tuple[int, int], CsrMatrix],
    row_sizes: Sequence[int],
    col_sizes: Sequence[int],
) -> CsrMatrix:
    """Scatter blocks keyed by (block row, block col) into one matrix."""
    row_off = np.r_[0, np.cumsum(row_sizes)].astype(np.int64)
    col_off = np.r_[0, np.cumsum(col_sizes)].astype(np.int64)
    rows, cols, vals = [np.empty(0, dtype=np.int64)], [np.empty(0, dtype=np.int64)], [np.empty(0)]
    for (i, j), block in sorted(blocks.items()):
        if block.shape != (row_sizes[i], col_sizes[j]):
            raise ValueError(f"Block ({i}, {j}) has shape {block.shape}")
        coo = block.matrix.tocoo()
        rows.append(coo.row + row_off[i])
        cols.append(coo.col + col_off[j])
        vals.append(coo.data)
    return csr_from_arrays(
        np.concatenate(rows),
        np.concatenate(cols),
        np.concatenate(vals),
        int(row_off[-1]),
        int(col_off[-1]),
    )


def block_matrix(blocks: Sequence[Sequence[Optional[CsrMatrix]]]) -> CsrMatrix:
    """Stack a grid of blocks; ``None`` marks a zero block."""
    row_sizes = [next(b.nrows for b in row if b is not None) for row in blocks]
    col_sizes = [next(row[j].ncols for row in blocks if row[j] is not None) for j in range(len(blocks[0]))]
    keyed = {(i, j): b for i, row in enumerate(blocks) for j, b in enumerate(row) if b is not None}
    return assemble_blocks(keyed, row_sizes, col_sizes)


def embed(A: CsrMatrix, row_offset: int, col_offset: int, nrows: int, ncols: int) -> CsrMatrix:
    """Place ``A`` inside an otherwise empty ``nrows x ncols`` matrix."""
    coo = A.matrix.tocoo()
    return csr_from_arrays(coo.row + row_offset, coo.col + col_offset, coo.data, nrows, ncols)


def identity(n: int) -> CsrMatrix:
    return from_scipy(sp.identity(n, format="csr"))


def diagonal_matrix(values: np.ndarray) -> CsrMatrix:
    return from_scipy(sp.diags(np.asarray(values, dtype=float), format="csr"))


def spmv(A: CsrMatrix, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (A.ncols,):
        raise ValueError(f"Vector of shape {x.shape} does not match {A.ncols} columns")
    return A.matrix @ x


def _check_symmetric(A: CsrMatrix) -> None:
    if A.nrows != A.ncols:
        raise AsymmetricMatrixError(f"Matrix is not square: {A.shape}")
    scale = float(np.abs(A.vals).max()) if A.nnz else 0.0
    asym = A.max_asymmetry()
    if asym > SYMMETRY_TOL * scale:
        raise AsymmetricMatrixError(f"Matrix asymmetry {asym:.3e} exceeds {SYMMETRY_TOL:.0e} relative to {scale:.3e}")


def solve_spd(
    A: CsrMatrix,
    b: np.ndarray,
    rel_tol: float = DEFAULT_REL_TOL,
    *,
    abs_tol: float = 0.0,
    method: str = "direct",
) -> np.ndarray:
    """Solve ``A x = b`` for symmetric positive definite ``A``.

    Args:
        A: Symmetric matrix, checked to ``SYMMETRY_TOL`` relative to its largest entry.
        b: Right-hand side.
        rel_tol: Residual target relative to ``||b||``.
        abs_tol: Absolute residual target; the looser of the two applies.
        method: ``"direct"`` (sparse LU in symmetric mode plus iterative refinement)
            or ``"cg"`` (Jacobi-preconditioned conjugate gradients capped at
            ``10 * nrows`` iterations).

    Returns:
        Solution vector.

    Raises:
        AsymmetricMatrixError: If ``A`` is not symmetric.
        LinearSolveError: If the residual contract cannot be met, or a
            factorization pivot is nonpositive (``A`` is not positive definite).
    """
    b = np.asarray(b, dtype=float)
    if b.shape != (A.nrows,):
        raise ValueError(f"Right-hand side of shape {b.shape} does not match {A.nrows} rows")
    _check_symmetric(A)
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return np.zeros_like(b)
    target = max(rel_tol * b_norm, abs_tol)

    if method == "direct":
        try:
            lu = spla.splu(
                A.matrix.tocsc(),
                permc_spec="MMD_AT_PLUS_A",
                diag_pivot_thresh=0.0,
                options={"SymmetricMode": True},
            )
        except RuntimeError as exc:
            raise LinearSolveError(f"Factorization failed: {exc}") from exc
        # diagonal pivoting makes the U diagonal the LDL^T pivots
        pivots = lu.U.diagonal()
        if np.any(pivots <= 0.0):
            raise LinearSolveError(f"Nonpositive pivot {float(pivots.min()):.3e}; matrix is not positive definite")
        x = lu.solve(b)
        residual = float(np.linalg.norm(b - A.matrix @ x))
        for _ in range(_REFINEMENT_STEPS):
            if residual <= target:
                break
            x = x + lu.solve(b - A.matrix @ x)
            residual = float(np.linalg.norm(b - A.matrix @ x))
    elif method == "cg":
        diag = A.diagonal()
        if np.any(diag <= 0.0):
            raise LinearSolveError("Nonpositive diagonal entry; matrix is not positive definite")
        precond = spla.LinearOperator(A.shape, matvec=lambda v: v / diag, dtype=float)
        x, info = spla.cg(A.matrix, b, rtol=0.0, atol=target, maxiter=10 * A.nrows, M=precond)
        residual = float(np.linalg.norm(b - A.matrix @ x))
        if info > 0:
            raise LinearSolveError(f"CG did not converge in {10 * A.nrows} iterations (residual {residual:.3e})", residual)
    else:
        raise ValueError(f"Unknown solve method: {method}")

    if not np.isfinite(residual) or residual > target:
        raise LinearSolveError(f"Residual {residual:.3e} above target {target:.3e}", residual)
    logger.debug("solve_spd n={} residual={:.3e} target={:.3e}", A.nrows, residual, target)
    return x
