"""SIMPLE and the general inexact block-LU family for the 2x2 system

    [ K   B^T ] [U]   [r1]
    [-B   S   ] [P] = [r2]

factored as ``[[K, 0], [-B, B H1 B^T + S]] @ [[I, H2 B^T], [0, I]]``.
SIMPLE is ``H1 = H2 = diag(K)^-1``, Chorin-Temam ``H1 = H2 = dt M^-1`` and
Yosida ``H1 = dt M^-1, H2 = K^-1``.  ``M^-1`` is approximated by
``diag(M)^-1`` so that the Schur block stays sparse.
"""

import numpy as np
import scipy.sparse as sp

from ..exceptions import ConfigError
from ..sparsecore import as_csr, diag_inverse, scaled_triple_product
from .base import BlockPreconditioner, diag_matrix, inner_solve
from .inner import make_inner_solver, parse_inner

DIAG_K = "diag_k"
DT_MASS_INV = "dt_mass_inv"
EXACT_K = "exact_k"

_H1_KINDS = (DIAG_K, DT_MASS_INV)
_H2_KINDS = (DIAG_K, DT_MASS_INV, EXACT_K)


class GeneralLUPreconditioner(BlockPreconditioner):
    """Inexact block LU preconditioner with configurable ``H1``/``H2``.

    Parameters
    ----------
    h1, h2 : {"diag_k", "dt_mass_inv", "exact_k"}
        Approximations of ``K^-1`` used in the Schur block (``h1``) and in
        the upper factor (``h2``).  ``h1="exact_k"`` is not supported since
        it needs a dense Schur complement.
    inner_k, inner_schur : str
        Inner solver kinds for ``K`` and the approximate Schur complement
        (``direct``, ``ilu0``, ``jacobi:k``, ``chebyshev:k``).

    Attributes
    ----------
    D_ : ndarray
        ``diag(K)``.
    Sigma_ : csr_matrix
        ``B H1 B^T + S``.
    """

    variant = "general_lu"

    def __init__(self, h1=DIAG_K, h2=DIAG_K, inner_k="direct", inner_schur="direct"):
        self.h1 = h1
        self.h2 = h2
        self.inner_k = inner_k
        self.inner_schur = inner_schur

    def _diag_approx(self, kind, system):
        if kind == DIAG_K:
            return self.Dinv_
        if system.M is None or system.dt is None:
            raise ConfigError(f"{kind!r} needs a mass matrix and a positive time step")
        return system.dt * diag_inverse(system.M)

    def fit(self, system, y=None):
        if self.h1 not in _H1_KINDS or self.h2 not in _H2_KINDS:
            raise ConfigError(f"unsupported (H1, H2) combination ({self.h1!r}, {self.h2!r})")
        parse_inner(self.inner_k)
        parse_inner(self.inner_schur)
        K, B, S = system.K, system.B, system.S
        self.K_, self.B_, self.S_ = K, B, S
        self.D_ = K.diagonal()
        self.Dinv_ = diag_inverse(K)
        self.H1_ = self._diag_approx(self.h1, system)
        self.H2_ = None if self.h2 == EXACT_K else self._diag_approx(self.h2, system)
        self.Sigma_ = as_csr(scaled_triple_product(B, self.H1_, B) + S)
        self.K_solver_ = make_inner_solver(self.inner_k, K)
        self.Sigma_solver_ = make_inner_solver(self.inner_schur, self.Sigma_)
        self.sizes_ = (K.shape[0], B.shape[0])
        self.variant_ = self.variant
        return self

    def _upper(self, z2):
        BTz = self.B_.T @ z2
        if self.H2_ is None:
            return inner_solve(self.K_solver_, BTz, "upper K solve")
        return self.H2_ * BTz

    def _apply(self, parts):
        r1, r2 = parts[:2]
        y1 = inner_solve(self.K_solver_, r1, "K y1 = r1")
        y2 = inner_solve(self.Sigma_solver_, r2 + self.B_ @ y1, "Sigma y2 = r2 + B y1")
        z2 = y2
        z1 = y1 - self._upper(z2)
        return [z1, z2]

    def _H2BT(self):
        if self.H2_ is not None:
            return as_csr(diag_matrix(self.H2_) @ self.B_.T)
        # dense K^-1 B^T: desk-size verification only
        BT = self.B_.T.toarray()
        return as_csr(sp.csr_matrix(np.column_stack(
            [self.K_solver_.solve(BT[:, j]) for j in range(BT.shape[1])])))

    def factors(self):
        nu, npr = self.sizes_
        L = sp.bmat([[self.K_, None], [-self.B_, self.Sigma_]], format="csr")
        U = sp.bmat([[sp.identity(nu), self._H2BT()], [None, sp.identity(npr)]], format="csr")
        return as_csr(L), as_csr(U)

    def explicit_matrix(self):
        """Closed form of the factor product, built without the factors:
        ``[[K, K H2 B^T], [-B, S + B (H1 - H2) B^T]]``."""
        H2BT = self._H2BT()
        corner = self.S_ + scaled_triple_product(self.B_, self.H1_, self.B_) - self.B_ @ H2BT
        return as_csr(sp.bmat([[self.K_, self.K_ @ H2BT], [-self.B_, corner]], format="csr"))


class SimplePreconditioner(GeneralLUPreconditioner):
    """SIMPLE: ``H1 = H2 = diag(K)^-1``, ``Sigma = B D^-1 B^T + S``."""

    variant = "simple"

    def __init__(self, inner_k="direct", inner_schur="direct"):
        self.inner_k = inner_k
        self.inner_schur = inner_schur

    @property
    def h1(self):
        return DIAG_K

    @property
    def h2(self):
        return DIAG_K

    def explicit_matrix(self):
        """``[[K, K D^-1 B^T], [-B, S]]``."""
        KDBT = self.K_ @ diag_matrix(self.Dinv_) @ self.B_.T
        return as_csr(sp.bmat([[self.K_, KDBT], [-self.B_, self.S_]], format="csr"))


def simple_like_solve(pre, F):
    """Three-step SIMPLE-like solver for ``A x = (F, 0)``.

    Solve ``K U~ = F``, then ``Sigma P = B U~``, then correct
    ``U = U~ - D^-1 B^T P``.
    """
    U_tilde = pre.K_solver_.solve(F)
    P = pre.Sigma_solver_.solve(pre.B_ @ U_tilde)
    U = U_tilde - pre.Dinv_ * (pre.B_.T @ P)
    return U, P
