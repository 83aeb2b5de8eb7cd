"""Sparse/dense linear algebra kernels used by assembly and the preconditioners.

Sparse matrices are ``scipy.sparse.csr_matrix`` objects kept in canonical
form: sorted column indices, no duplicate entries, float64 values.  Explicit
zeros produced by cancellation are *kept*, so sparsity patterns are exact.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .exceptions import ShapeError, SingularDiagonalError, SingularL33Error

__all__ = [
    "as_csr",
    "is_canonical_csr",
    "identity",
    "spmv",
    "diag_inverse",
    "scaled_triple_product",
    "DenseLU",
    "dense_lu_solve",
    "axpy",
    "dot",
    "norm2",
    "BlockVector",
]


def as_csr(A):
    """Return ``A`` as a canonical float64 CSR matrix (copying only if needed)."""
    if sp.issparse(A):
        A = sp.csr_matrix(A, dtype=np.float64)
    else:
        A = sp.csr_matrix(np.asarray(A, dtype=np.float64))
    if not A.has_canonical_format:
        A = A.copy()
        A.sum_duplicates()
    A.sort_indices()
    return A


def is_canonical_csr(A):
    """Check the CSR invariants: monotone offsets, strictly increasing columns."""
    indptr, indices = A.indptr, A.indices
    if indptr[0] != 0 or indptr[-1] != len(indices) or np.any(np.diff(indptr) < 0):
        return False
    for i in range(A.shape[0]):
        cols = indices[indptr[i]:indptr[i + 1]]
        if cols.size > 1 and np.any(np.diff(cols) <= 0):
            return False
    return True


def identity(n):
    return sp.identity(n, dtype=np.float64, format="csr")


def spmv(A, x):
    x = np.asarray(x, dtype=np.float64)
    if A.shape[1] != x.shape[0]:
        raise ShapeError(f"matrix has {A.shape[1]} columns but vector has length {x.shape[0]}")
    return A @ x


def diag_inverse(A, tol=1e-300):
    """Reciprocal of the diagonal of a square matrix.

    Raises ``SingularDiagonalError`` naming the first row whose diagonal
    magnitude is below ``tol``.
    """
    if A.shape[0] != A.shape[1]:
        raise ShapeError(f"diag_inverse needs a square matrix, got {A.shape}")
    d = A.diagonal()
    bad = np.flatnonzero(~(np.abs(d) >= tol))
    if bad.size:
        raise SingularDiagonalError(int(bad[0]), float(d[bad[0]]))
    return 1.0 / d


def scaled_triple_product(X, dinv, Y):
    """Sparse ``X @ diag(dinv) @ Y.T`` with the full symbolic pattern.

    The pattern comes from a product of the structural indicator matrices
    (no cancellation possible); values from the numeric product are then
    scattered into it, so entries that cancel exactly stay stored as zeros.
    """
    dinv = np.asarray(dinv, dtype=np.float64)
    if X.shape[1] != dinv.shape[0] or Y.shape[1] != dinv.shape[0]:
        raise ShapeError(
            f"incompatible shapes X{X.shape}, dinv({dinv.shape[0]}), Y{Y.shape}"
        )
    X = as_csr(X)
    Yt = as_csr(sp.csr_matrix(Y).T)
    pattern = as_csr(_indicator(X) @ _indicator(Yt))
    XD = X.copy()
    XD.data *= dinv[XD.indices]
    values = (XD @ Yt).tocoo()
    ncols = pattern.shape[1]
    rows = np.repeat(np.arange(pattern.shape[0]), np.diff(pattern.indptr))
    keys = rows.astype(np.int64) * ncols + pattern.indices
    pos = np.searchsorted(keys, values.row.astype(np.int64) * ncols + values.col)
    pattern.data[:] = 0.0
    pattern.data[pos] = values.data
    return pattern


def _indicator(A):
    out = A.copy()
    out.data = np.ones_like(out.data)
    return out


class DenseLU:
    """Partial-pivoting LU of a small dense matrix (the m-by-m multiplier block).

    Raises ``SingularL33Error`` when a pivot falls below
    ``pivot_tol * max|A|``, which signals linearly dependent flow-rate rows.
    """

    def __init__(self, A, pivot_tol=1e-14):
        A = np.atleast_2d(np.asarray(A, dtype=np.float64))
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ShapeError(f"DenseLU needs a square matrix, got {A.shape}")
        self.n = A.shape[0]
        scale = np.max(np.abs(A)) if A.size else 0.0
        if self.n and scale == 0.0:
            raise SingularL33Error("matrix is identically zero")
        self.lu, self.piv = sla.lu_factor(A, check_finite=True)
        pivots = np.abs(np.diag(self.lu))
        k = np.flatnonzero(pivots < pivot_tol * scale)
        if k.size:
            raise SingularL33Error(
                f"pivot {int(k[0])} is {pivots[k[0]]:.3e} (< {pivot_tol:g} * max|A| = "
                f"{pivot_tol * scale:.3e}); flow-rate rows are likely linearly dependent"
            )

    def solve(self, b):
        b = np.asarray(b, dtype=np.float64)
        if b.shape[0] != self.n:
            raise ShapeError(f"rhs length {b.shape[0]} != {self.n}")
        if self.n == 0:
            return b.copy()
        return sla.lu_solve((self.lu, self.piv), b)


def dense_lu_solve(A, b):
    return DenseLU(A).solve(b)


def _same_length(x, y):
    if np.shape(x) != np.shape(y):
        raise ShapeError(f"length mismatch: {np.shape(x)} vs {np.shape(y)}")


def axpy(a, x, y):
    """Return ``a*x + y`` (new array)."""
    _same_length(x, y)
    return a * np.asarray(x, dtype=np.float64) + np.asarray(y, dtype=np.float64)


def dot(x, y):
    _same_length(x, y)
    return float(np.dot(x, y))


def norm2(x):
    return float(np.linalg.norm(x))


@dataclass(frozen=True)
class BlockVector:
    """Monolithic (velocity, pressure, multiplier) vector with fixed partitions."""

    data: np.ndarray
    sizes: tuple

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        sizes = tuple(int(s) for s in self.sizes)
        if data.ndim != 1 or data.shape[0] != sum(sizes):
            raise ShapeError(f"vector of length {data.shape} does not match partition {sizes}")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "sizes", sizes)

    @classmethod
    def from_parts(cls, *parts):
        parts = [np.asarray(p, dtype=np.float64).ravel() for p in parts]
        return cls(np.concatenate(parts) if parts else np.zeros(0), tuple(len(p) for p in parts))

    @classmethod
    def zeros(cls, sizes):
        return cls(np.zeros(sum(sizes)), tuple(sizes))

    def block(self, i):
        start = sum(self.sizes[:i])
        return self.data[start:start + self.sizes[i]]

    @property
    def u(self):
        return self.block(0)

    @property
    def p(self):
        return self.block(1)

    @property
    def lam(self):
        return self.block(2) if len(self.sizes) > 2 else np.zeros(0)

    def parts(self):
        return [self.block(i) for i in range(len(self.sizes))]

    def __len__(self):
        return self.data.shape[0]
