"""Block preconditioners for the flow-rate augmented system

    [ K    B^T  Phi^T ]
    [-B    S    0     ]
    [ Phi  0    0     ]

``AugmentedSimplePreconditioner`` (aug-aS) factors it as

    [ K    0         0   ] [ I  D^-1 B^T  D^-1 Phi^T      ]
    [-B    Sigma     0   ] [ 0  I         W^-1 Sigma_pl   ]
    [ Phi  -Sigma_lp L33 ] [ 0  0         I               ]

with ``D = diag(K)``, ``Sigma = B D^-1 B^T + S``, ``W = diag(Sigma)``,
``Sigma_lp = Phi D^-1 B^T``, ``Sigma_pl = B D^-1 Phi^T``,
``Sigma_l = Phi D^-1 Phi^T`` and ``L33 = Sigma_lp W^-1 Sigma_pl - Sigma_l``.
"""

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from ..exceptions import ConfigError
from ..sparsecore import DenseLU, as_csr, diag_inverse, scaled_triple_product
from .base import BlockPreconditioner, diag_matrix, inner_solve
from .inner import DirectLU, make_inner_solver, parse_inner
from .simple import SimplePreconditioner

MAX_MULTIPLIERS = 32
MAX_EXACT_SIZE = 5000


def _check_phi(Phi):
    m = Phi.shape[0]
    if m < 1:
        raise ConfigError("the augmented preconditioner needs at least one flow section")
    if m > MAX_MULTIPLIERS:
        raise ConfigError(f"m = {m} exceeds the dense multiplier-block limit {MAX_MULTIPLIERS}")
    empty = np.flatnonzero(np.diff(as_csr(Phi).indptr) == 0)
    nonzero = np.abs(Phi).sum(axis=1).A1 > 0
    if empty.size or not nonzero.all():
        raise ConfigError("every flow-rate row of Phi must be non-zero")


class AugmentedSimplePreconditioner(BlockPreconditioner):
    """aug-aS: augmented SIMPLE with approximate ``K`` and ``Sigma`` solves.

    With ``inner_k = inner_schur = "direct"`` this is the exact augmented
    SIMPLE factorization; the multiplier block ``L33`` is always factorized
    densely with partial pivoting.

    Attributes
    ----------
    D_, W_ : ndarray
        ``diag(K)`` and ``diag(Sigma)``.
    Sigma_, Sigma_lp_, Sigma_pl_ : csr_matrix
    Sigma_l_, L33_ : ndarray of shape (m, m)
    """

    variant = "aug_simple"

    def __init__(self, inner_k="direct", inner_schur="direct"):
        self.inner_k = inner_k
        self.inner_schur = inner_schur

    def fit(self, system, y=None):
        parse_inner(self.inner_k)
        parse_inner(self.inner_schur)
        K, B, S, Phi = system.K, system.B, system.S, system.Phi
        _check_phi(Phi)
        self.K_, self.B_, self.S_, self.Phi_ = K, B, S, Phi
        self.D_ = K.diagonal()
        self.Dinv_ = diag_inverse(K)
        self.Sigma_ = as_csr(scaled_triple_product(B, self.Dinv_, B) + S)
        self.W_ = self.Sigma_.diagonal()
        self.Winv_ = diag_inverse(self.Sigma_)
        self.Sigma_lp_ = scaled_triple_product(Phi, self.Dinv_, B)
        self.Sigma_pl_ = scaled_triple_product(B, self.Dinv_, Phi)
        self.Sigma_l_ = scaled_triple_product(Phi, self.Dinv_, Phi).toarray()
        self.L33_ = (scaled_triple_product(self.Sigma_lp_, self.Winv_, self.Sigma_pl_.T).toarray()
                     - self.Sigma_l_)
        self.L33_lu_ = DenseLU(self.L33_)
        self.K_solver_ = make_inner_solver(self.inner_k, K)
        self.Sigma_solver_ = make_inner_solver(self.inner_schur, self.Sigma_)
        self.sizes_ = (K.shape[0], B.shape[0], Phi.shape[0])
        self.variant_ = self.variant
        return self

    def _apply(self, parts):
        r1, r2, r3 = parts
        # forward sweep
        y1 = inner_solve(self.K_solver_, r1, "K y1 = r1")
        y2 = inner_solve(self.Sigma_solver_, r2 + self.B_ @ y1, "Sigma y2 = r2 + B y1")
        y3 = inner_solve(self.L33_lu_, r3 - self.Phi_ @ y1 + self.Sigma_lp_ @ y2,
                         "L33 y3 = r3 - Phi y1 + Sigma_lp y2")
        # backward sweep
        z3 = y3
        z2 = y2 - self.Winv_ * (self.Sigma_pl_ @ z3)
        z1 = y1 - self.Dinv_ * (self.B_.T @ z2) - self.Dinv_ * (self.Phi_.T @ z3)
        return [z1, z2, z3]

    def factors(self):
        nu, npr, m = self.sizes_
        Dm = diag_matrix(self.Dinv_)
        L = sp.bmat([
            [self.K_, None, None],
            [-self.B_, self.Sigma_, None],
            [self.Phi_, -self.Sigma_lp_, sp.csr_matrix(self.L33_)],
        ], format="csr")
        U = sp.bmat([
            [sp.identity(nu), Dm @ self.B_.T, Dm @ self.Phi_.T],
            [None, sp.identity(npr), diag_matrix(self.Winv_) @ self.Sigma_pl_],
            [None, None, sp.identity(m)],
        ], format="csr")
        return as_csr(L), as_csr(U)

    def explicit_matrix(self):
        """Closed form of the factor product (independent of the stored ``L33``)::

            [ K    K D^-1 B^T   K D^-1 Phi^T               ]
            [-B    S            -(I - Sigma W^-1) Sigma_pl ]
            [ Phi  0            0                          ]
        """
        nu, npr, m = self.sizes_
        Dm = diag_matrix(self.Dinv_)
        corr = self.Sigma_pl_ - self.Sigma_ @ diag_matrix(self.Winv_) @ self.Sigma_pl_
        return as_csr(sp.bmat([
            [self.K_, self.K_ @ Dm @ self.B_.T, self.K_ @ Dm @ self.Phi_.T],
            [-self.B_, self.S_, -corr],
            [self.Phi_, sp.csr_matrix((m, npr)), sp.csr_matrix((m, m))],
        ], format="csr"))


class AugmentedIdentityPreconditioner(BlockPreconditioner):
    """aug-aS-I: the 2x2 SIMPLE preconditioner plus an identity multiplier block."""

    variant = "aug_identity"

    def __init__(self, inner_k="direct", inner_schur="direct"):
        self.inner_k = inner_k
        self.inner_schur = inner_schur

    def fit(self, system, y=None):
        self.simple_ = SimplePreconditioner(self.inner_k, self.inner_schur).fit(system)
        self.sizes_ = self.simple_.sizes_ + (system.Phi.shape[0],)
        self.variant_ = self.variant
        return self

    def _apply(self, parts):
        z1, z2 = self.simple_._apply(parts[:2])
        return [z1, z2, parts[2].copy()]

    def factors(self):
        L, U = self.simple_.factors()
        I = sp.identity(self.sizes_[2])
        return as_csr(sp.block_diag([L, I])), as_csr(sp.block_diag([U, I]))

    def explicit_matrix(self):
        return as_csr(sp.block_diag([self.simple_.explicit_matrix(), sp.identity(self.sizes_[2])]))


class ExactAugmentedLU(BlockPreconditioner):
    """Exact block LU factorization of the augmented matrix (desk sizes only).

    Uses a sparse LU of ``K`` and a dense LU of the exact pressure Schur
    complement ``B K^-1 B^T + S``.
    """

    variant = "exact_lu"

    def __init__(self, max_size=MAX_EXACT_SIZE):
        self.max_size = max_size

    def fit(self, system, y=None):
        if system.n > self.max_size:
            raise ConfigError(f"exact LU refused: system size {system.n} > {self.max_size}")
        K, B, S, Phi = system.K, system.B, system.S, system.Phi
        self.K_, self.B_, self.S_, self.Phi_ = K, B, S, Phi
        self.K_solver_ = DirectLU(K)
        lu = self.K_solver_._lu
        self.KinvBT_ = lu.solve(B.T.toarray())
        self.KinvPhiT_ = lu.solve(Phi.T.toarray()) if Phi.shape[0] else np.zeros((K.shape[0], 0))
        self.schur_ = B @ self.KinvBT_ + S.toarray()
        self.schur_lu_ = sla.lu_factor(self.schur_)
        self.schur_BKinvPhiT_ = sla.lu_solve(self.schur_lu_, B @ self.KinvPhiT_)
        PhiKinvBT = Phi @ self.KinvBT_
        self.L32_ = -PhiKinvBT
        self.L33_ = PhiKinvBT @ self.schur_BKinvPhiT_ - Phi @ self.KinvPhiT_
        self.L33_lu_ = DenseLU(self.L33_) if Phi.shape[0] else None
        self.sizes_ = (K.shape[0], B.shape[0], Phi.shape[0])
        self.variant_ = self.variant
        return self

    def _apply(self, parts):
        r1, r2, r3 = parts
        y1 = self.K_solver_.solve(r1)
        y2 = sla.lu_solve(self.schur_lu_, r2 + self.B_ @ y1)
        z3 = self.L33_lu_.solve(r3 - self.Phi_ @ y1 - self.L32_ @ y2) if r3.size else r3.copy()
        z2 = y2 - self.schur_BKinvPhiT_ @ z3
        z1 = y1 - self.K_solver_.solve(self.B_.T @ z2 + self.Phi_.T @ z3)
        return [z1, z2, z3]

    def factors(self):
        nu, npr, m = self.sizes_
        L = sp.bmat([
            [self.K_, None, None],
            [-self.B_, sp.csr_matrix(self.schur_), None],
            [self.Phi_, sp.csr_matrix(self.L32_), sp.csr_matrix(self.L33_)],
        ], format="csr")
        U = sp.bmat([
            [sp.identity(nu), sp.csr_matrix(self.KinvBT_), sp.csr_matrix(self.KinvPhiT_)],
            [None, sp.identity(npr), sp.csr_matrix(self.schur_BKinvPhiT_)],
            [None, None, sp.identity(m)],
        ], format="csr")
        return as_csr(L), as_csr(U)


def augmented_simple_like_solve(pre, F, Q):
    """Five-step augmented SIMPLE-like solver for ``A x = (F, 0, Q)``.

    1. ``K U~ = F``
    2. ``Sigma P~ = B U~``
    3. ``L33 Lambda = Q + Sigma_lp P~ - Phi U~``
    4. ``P = P~ - W^-1 Sigma_pl Lambda``
    5. ``U = U~ - D^-1 B^T P - D^-1 Phi^T Lambda``
    """
    U_tilde = pre.K_solver_.solve(F)
    P_tilde = pre.Sigma_solver_.solve(pre.B_ @ U_tilde)
    Lam = pre.L33_lu_.solve(Q + pre.Sigma_lp_ @ P_tilde - pre.Phi_ @ U_tilde)
    P = P_tilde - pre.Winv_ * (pre.Sigma_pl_ @ Lam)
    U = U_tilde - pre.Dinv_ * (pre.B_.T @ P) - pre.Dinv_ * (pre.Phi_.T @ Lam)
    return U, P, Lam


def error_matrix(pre, system):
    """``A_aug - P`` with ``P`` the product of the preconditioner's stored factors."""
    A = system.matrix()
    if pre.sizes_ != system.sizes:
        A = A[:sum(pre.sizes_), :sum(pre.sizes_)]
    return as_csr(A - pre.preconditioner_matrix())


def block(matrix, sizes, i, j):
    """Sub-block ``(i, j)`` (0-based) of a matrix partitioned by ``sizes``."""
    b = np.cumsum((0,) + tuple(sizes))
    return matrix[b[i]:b[i + 1]][:, b[j]:b[j + 1]]


__all__ = [
    "AugmentedSimplePreconditioner",
    "AugmentedIdentityPreconditioner",
    "ExactAugmentedLU",
    "augmented_simple_like_solve",
    "error_matrix",
    "block",
]
