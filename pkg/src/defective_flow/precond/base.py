import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ..exceptions import InnerSolverError, ShapeError
from ..sparsecore import BlockVector, as_csr


class BlockPreconditioner(BaseEstimator):
    """Common plumbing for the block preconditioners.

    Subclasses implement ``fit(system)`` and ``_apply(parts) -> parts``.
    ``apply``/``transform`` accept either a flat array or a
    :class:`~defective_flow.sparsecore.BlockVector`.
    """

    variant = None

    def _split(self, r):
        check_is_fitted(self, "sizes_")
        data = r.data if isinstance(r, BlockVector) else np.asarray(r, dtype=np.float64)
        if data.shape != (sum(self.sizes_),):
            raise ShapeError(f"residual has shape {data.shape}, expected ({sum(self.sizes_)},)")
        bounds = np.cumsum((0,) + tuple(self.sizes_))
        return [data[bounds[i]:bounds[i + 1]] for i in range(len(self.sizes_))]

    def apply(self, r):
        z = np.concatenate(self._apply(self._split(r)))
        return BlockVector(z, self.sizes_) if isinstance(r, BlockVector) else z

    def transform(self, r):
        return self.apply(r)

    def __call__(self, r):
        return self.apply(r)

    def as_linear_operator(self):
        from scipy.sparse.linalg import LinearOperator
        n = sum(self.sizes_)
        return LinearOperator((n, n), matvec=self.apply, dtype=np.float64)

    def preconditioner_matrix(self):
        """``L @ U`` from the stored factors."""
        L, U = self.factors()
        return as_csr(L @ U)


def inner_solve(solver, b, step):
    try:
        return solver.solve(b)
    except Exception as exc:  # noqa: BLE001 - re-raised with the step label
        raise InnerSolverError(step, exc) from exc


def diag_matrix(d):
    return sp.diags(np.asarray(d, dtype=np.float64), format="csr")
