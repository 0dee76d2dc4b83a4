"""Shared linear-algebra substrate: validated symmetric matrices, SPD solves,
symmetric eigendecomposition and weighted Gram-Schmidt.

All heavier kernels sit on top of scipy (SuperLU in symmetric mode for the
sparse SPD factorization, LAPACK ``syevd`` via ``scipy.linalg.eigh`` for the
dense eigenproblem).  The wrappers exist to pin down the contracts the rest
of the package relies on: symmetry is validated once at construction time,
SPD solves carry a residual guarantee, eigenvalues come back sorted
descending, and orthonormalization works in an arbitrary SPD inner product.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sparse
import scipy.sparse.linalg as spla


class DimensionMismatch(Exception):
    """Operand shapes are inconsistent."""


class NotSpd(Exception):
    """Matrix is not symmetric positive definite."""


class ConvergenceFailure(Exception):
    """A factorization or eigensolver did not converge."""


class EmptyOutput(Exception):
    """Orthonormalization dropped every input vector."""


# Relative tolerance for symmetry validation at construction time.
_SYM_TOL = 1e-12

# Every SPD solve must satisfy ||A x - b|| <= _RESIDUAL_TOL * ||b||.
_RESIDUAL_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class SparseSymMatrix:
    """Sparse symmetric matrix in CSR form, validated once at construction."""

    mat: sparse.csr_matrix

    def __post_init__(self):
        m = self.mat
        if not sparse.issparse(m):
            raise TypeError("SparseSymMatrix expects a scipy sparse matrix")
        if m.format != "csr":
            object.__setattr__(self, "mat", m.tocsr())
            m = self.mat
        if m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise DimensionMismatch(f"square matrix required, got shape {m.shape}")
        if m.nnz and not np.all(np.isfinite(m.data)):
            raise ValueError("matrix contains non-finite entries")
        scale = float(np.abs(m.data).max()) if m.nnz else 0.0
        gap = abs(m - m.T)
        if gap.nnz and float(gap.data.max()) > _SYM_TOL * max(scale, 1.0):
            raise ValueError("matrix is not symmetric")

    @property
    def n(self) -> int:
        return self.mat.shape[0]

    def dot(self, x: np.ndarray) -> np.ndarray:
        return self.mat @ x

    def __matmul__(self, x: np.ndarray) -> np.ndarray:
        return self.mat @ x

    def toarray(self) -> np.ndarray:
        return self.mat.toarray()


@dataclass(frozen=True, eq=False)
class DenseSymMatrix:
    """Dense symmetric matrix, validated once at construction."""

    mat: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mat, dtype=float)
        object.__setattr__(self, "mat", m)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise DimensionMismatch(f"square matrix required, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("matrix contains non-finite entries")
        scale = float(np.abs(m).max())
        if scale and float(np.abs(m - m.T).max()) > _SYM_TOL * scale:
            raise ValueError("matrix is not symmetric")

    @property
    def n(self) -> int:
        return self.mat.shape[0]


def sparse_sym(mat) -> SparseSymMatrix:
    """Wrap a dense array or any scipy sparse format as a SparseSymMatrix."""
    if sparse.issparse(mat):
        return SparseSymMatrix(mat.tocsr())
    return SparseSymMatrix(sparse.csr_matrix(np.asarray(mat, dtype=float)))


def _as_sparse(a) -> sparse.csr_matrix:
    if isinstance(a, SparseSymMatrix):
        return a.mat
    if sparse.issparse(a):
        return a.tocsr()
    return sparse.csr_matrix(np.asarray(a, dtype=float))


class SpdFactor:
    """Reusable direct factorization of a sparse SPD matrix.

    Uses SuperLU with symmetric-mode diagonal pivoting, which behaves like a
    fill-reducing Cholesky: for an SPD input the row and column permutations
    agree and the pivots on U's diagonal are all positive.  A nonpositive
    pivot or a permutation mismatch disproves positive definiteness.
    """

    def __init__(self, a: SparseSymMatrix):
        if not isinstance(a, SparseSymMatrix):
            a = sparse_sym(a)
        self._a = a
        try:
            self._lu = spla.splu(
                a.mat.tocsc(),
                diag_pivot_thresh=0.0,
                permc_spec="MMD_AT_PLUS_A",
                options={"SymmetricMode": True},
            )
        except RuntimeError as exc:
            raise NotSpd(f"factorization failed: {exc}") from exc
        if np.any(self._lu.U.diagonal() <= 0.0) or np.any(
            self._lu.perm_r != self._lu.perm_c
        ):
            raise NotSpd("nonpositive pivot encountered")

    @property
    def n(self) -> int:
        return self._a.n

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Solve A x = b for one right-hand side or a matrix of columns."""
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.n:
            raise DimensionMismatch(
                f"right-hand side has {b.shape[0]} rows, matrix has {self.n}"
            )
        x = self._lu.solve(b)
        # One step of iterative refinement keeps the residual contract even
        # for badly conditioned inputs; for FE matrices it never triggers.
        bnorm = np.linalg.norm(b)
        if bnorm > 0.0:
            resid = b - self._a.mat @ x
            if np.linalg.norm(resid) > _RESIDUAL_TOL * bnorm:
                x = x + self._lu.solve(resid)
            if __debug__:
                rel = np.linalg.norm(b - self._a.mat @ x) / bnorm
                assert rel <= _RESIDUAL_TOL, f"SPD solve residual {rel:.3e}"
        return x


def solve_spd(a: SparseSymMatrix, b: np.ndarray) -> np.ndarray:
    """One-shot SPD solve; factor once and use SpdFactor for repeated solves."""
    return SpdFactor(a).solve(b)


def eig_sym(g) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a dense symmetric matrix.

    Returns (eigenvalues, eigenvectors) with eigenvalues sorted descending
    and eigenvectors as orthonormal columns in matching order.
    """
    if isinstance(g, DenseSymMatrix):
        arr = g.mat
    else:
        arr = DenseSymMatrix(np.asarray(g, dtype=float)).mat
    try:
        vals, vecs = scipy.linalg.eigh(arr)
    except scipy.linalg.LinAlgError as exc:
        raise ConvergenceFailure(f"symmetric eigensolver failed: {exc}") from exc
    return vals[::-1].copy(), vecs[:, ::-1].copy()


def m_inner(m, x: np.ndarray, y: np.ndarray) -> float:
    """Inner product x' M y for a sparse or dense symmetric weight M."""
    mm = m.mat if isinstance(m, (SparseSymMatrix, DenseSymMatrix)) else m
    return float(x @ (mm @ y))


def gram_schmidt(
    vectors: Sequence[np.ndarray], m, drop_tol: float = 1e-10
) -> list[np.ndarray]:
    """Orthonormalize vectors in the M-weighted inner product.

    Modified Gram-Schmidt with one re-orthogonalization pass.  A vector whose
    M-norm after projection drops below drop_tol times its original M-norm
    is discarded as numerically dependent.  Raises EmptyOutput if nothing
    survives.
    """
    mm = m.mat if isinstance(m, (SparseSymMatrix, DenseSymMatrix)) else m
    basis: list[np.ndarray] = []
    for v in vectors:
        v = np.asarray(v, dtype=float)
        norm0 = np.sqrt(max(float(v @ (mm @ v)), 0.0))
        if norm0 == 0.0:
            continue
        w = v.copy()
        for _ in range(2):
            for q in basis:
                w -= (q @ (mm @ w)) * q
        norm = np.sqrt(max(float(w @ (mm @ w)), 0.0))
        if norm <= drop_tol * norm0:
            continue
        basis.append(w / norm)
    if not basis:
        raise EmptyOutput("all vectors were dropped during orthonormalization")
    return basis
