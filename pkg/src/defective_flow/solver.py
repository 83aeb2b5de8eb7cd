"""Estimator-style front end: preconditioner + GMRES on one block system."""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .krylov import KrylovParams, gmres
from .precond import make_preconditioner


class MonolithicSolver(BaseEstimator):
    """Preconditioned GMRES for the augmented velocity-pressure-multiplier system.

    >>> solver = MonolithicSolver(preconditioner="aug-as").fit(system)  # doctest: +SKIP
    >>> x = solver.solve()                                               # doctest: +SKIP
    >>> solver.stats_.iterations                                         # doctest: +SKIP
    """

    def __init__(self, preconditioner="aug-as", inner="direct", inner_schur=None,
                 rel_tol=1e-8, abs_tol=1e-50, restart=200, max_iters=2000, flexible=False):
        self.preconditioner = preconditioner
        self.inner = inner
        self.inner_schur = inner_schur
        self.rel_tol = rel_tol
        self.abs_tol = abs_tol
        self.restart = restart
        self.max_iters = max_iters
        self.flexible = flexible

    def krylov_params(self):
        return KrylovParams(self.rel_tol, self.abs_tol, self.restart, self.max_iters,
                            self.flexible)

    def fit(self, system, y=None):
        pre = self.preconditioner
        if isinstance(pre, str):
            pre = make_preconditioner(pre, self.inner, self.inner_schur)
        self.system_ = system
        self.preconditioner_ = pre.fit(system)
        return self

    def solve(self, b=None, x0=None):
        """Solve with the fitted system's RHS (or ``b``); stats land in ``stats_``."""
        check_is_fitted(self, "preconditioner_")
        b = self.system_.rhs() if b is None else np.asarray(b, dtype=np.float64)
        x, self.stats_ = gmres(self.system_.matrix(), b, M=self.preconditioner_.apply, x0=x0,
                               params=self.krylov_params())
        return x

    def fit_solve(self, system, b=None, x0=None):
        return self.fit(system).solve(b, x0)

    predict = solve
