"""Approximate inner solvers used inside the block preconditioners.

Each solver is a *fixed* linear operator once built: no stopping tests, so the
outer Krylov method can stay non-flexible.
"""

import numba
import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..exceptions import ConfigError
from ..sparsecore import as_csr, diag_inverse


def parse_inner(kind):
    """Parse ``direct``, ``ilu0``, ``jacobi:k`` or ``chebyshev:k``.

    Returns ``(name, sweeps)``; ``sweeps`` is ``None`` for the factorizations.
    """
    if isinstance(kind, tuple):
        return kind
    name, _, arg = str(kind).strip().lower().partition(":")
    if name in ("direct", "directlu", "lu"):
        return ("direct", None)
    if name == "ilu0":
        return ("ilu0", None)
    if name in ("jacobi", "chebyshev"):
        try:
            k = int(arg) if arg else 3
        except ValueError:
            raise ConfigError(f"bad sweep count in inner solver {kind!r}") from None
        if k < 1:
            raise ConfigError(f"sweep count must be >= 1 in {kind!r}")
        return (name, k)
    raise ConfigError(f"unknown inner solver {kind!r}")


def make_inner_solver(kind, A):
    name, k = parse_inner(kind)
    if name == "direct":
        return DirectLU(A)
    if name == "ilu0":
        return ILU0(A)
    if name == "jacobi":
        return JacobiSweeps(A, k)
    return ChebyshevSweeps(A, k)


class DirectLU:
    """Sparse LU (SuperLU) or dense LU for matrices given as arrays."""

    kind = "direct"

    def __init__(self, A):
        self.shape = A.shape
        if sp.issparse(A):
            self._lu = spla.splu(sp.csc_matrix(A))
            self._solve = self._lu.solve
        else:
            import scipy.linalg as sla
            lu = sla.lu_factor(np.asarray(A, dtype=np.float64))
            self._solve = lambda b: sla.lu_solve(lu, b)

    def solve(self, b):
        if self.shape[0] == 0:
            return np.zeros_like(b)
        return self._solve(np.ascontiguousarray(b, dtype=np.float64))


@numba.njit(cache=True)
def _ilu0_factor(n, indptr, indices, data):
    lu = data.copy()
    diag = np.empty(n, dtype=np.int64)
    pos = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        diag[i] = -1
        for p in range(indptr[i], indptr[i + 1]):
            if indices[p] == i:
                diag[i] = p
        if diag[i] < 0:
            return lu, diag, i
    for i in range(n):
        for p in range(indptr[i], indptr[i + 1]):
            pos[indices[p]] = p
        for p in range(indptr[i], indptr[i + 1]):
            k = indices[p]
            if k >= i:
                break
            lu[p] /= lu[diag[k]]
            for q in range(diag[k] + 1, indptr[k + 1]):
                j = indices[q]
                t = pos[j]
                if t >= 0:
                    lu[t] -= lu[p] * lu[q]
        for p in range(indptr[i], indptr[i + 1]):
            pos[indices[p]] = -1
        if lu[diag[i]] == 0.0:
            return lu, diag, i
    return lu, diag, -1


@numba.njit(cache=True)
def _ilu0_solve(n, indptr, indices, lu, diag, b):
    x = b.copy()
    for i in range(n):
        s = x[i]
        for p in range(indptr[i], diag[i]):
            s -= lu[p] * x[indices[p]]
        x[i] = s
    for i in range(n - 1, -1, -1):
        s = x[i]
        for p in range(diag[i] + 1, indptr[i + 1]):
            s -= lu[p] * x[indices[p]]
        x[i] = s / lu[diag[i]]
    return x


class ILU0:
    """Incomplete LU with zero fill (sparsity of ``A`` retained exactly)."""

    kind = "ilu0"

    def __init__(self, A):
        A = as_csr(A)
        self.shape = A.shape
        self._indptr = A.indptr.astype(np.int64)
        self._indices = A.indices.astype(np.int64)
        self._lu, self._diag, bad = _ilu0_factor(A.shape[0], self._indptr, self._indices, A.data)
        if bad >= 0:
            raise ConfigError(f"ILU(0) breaks down: zero pivot in row {bad}")

    def solve(self, b):
        return _ilu0_solve(self.shape[0], self._indptr, self._indices, self._lu, self._diag,
                           np.ascontiguousarray(b, dtype=np.float64))


class JacobiSweeps:
    """``k`` damped-Jacobi sweeps from a zero initial guess."""

    kind = "jacobi"

    def __init__(self, A, sweeps, omega=2.0 / 3.0):
        self.A = as_csr(A)
        self.shape = A.shape
        self.sweeps = sweeps
        self.omega = omega
        self.dinv = diag_inverse(self.A)

    def solve(self, b):
        x = self.omega * self.dinv * b
        for _ in range(self.sweeps - 1):
            x += self.omega * self.dinv * (b - self.A @ x)
        return x


def estimate_lambda_max(A, dinv, iters=10, seed=0):
    """Power-method estimate of the largest eigenvalue of ``diag(A)^-1 A``."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(A.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = dinv * (A @ v)
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            return 1.0
        v = w / lam
    return lam


class ChebyshevSweeps:
    """``k`` steps of Jacobi-preconditioned Chebyshev iteration.

    Spectrum bounds: ``[lmax / eig_ratio, 1.1 * lmax]`` with ``lmax`` from 10
    deterministic power iterations.
    """

    kind = "chebyshev"

    def __init__(self, A, sweeps, eig_ratio=30.0):
        self.A = as_csr(A)
        self.shape = A.shape
        self.sweeps = sweeps
        self.dinv = diag_inverse(self.A)
        lmax = 1.1 * estimate_lambda_max(self.A, self.dinv)
        self.bounds = (lmax / eig_ratio, lmax)

    def solve(self, b):
        lo, hi = self.bounds
        theta = 0.5 * (hi + lo)
        delta = 0.5 * (hi - lo)
        sigma = theta / delta
        rho = 1.0 / sigma
        r = self.dinv * b
        d = r / theta
        x = d.copy()
        for _ in range(self.sweeps - 1):
            r = r - self.dinv * (self.A @ d)
            rho_new = 1.0 / (2.0 * sigma - rho)
            d = rho_new * rho * d + 2.0 * rho_new / delta * r
            rho = rho_new
            x += d
        return x
