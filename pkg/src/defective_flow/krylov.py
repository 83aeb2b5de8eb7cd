"""Restarted right-preconditioned GMRES and its flexible variant.

Right preconditioning means the minimized residual is the true residual
``b - A x``, so convergence tests and iteration counts do not depend on the
scaling of the preconditioner.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .exceptions import BreakdownError, ConfigError, ShapeError

_REORTH_THRESHOLD = 0.7


@dataclass
class KrylovParams:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-50
    restart: int = 200
    max_iters: int = 2000
    flexible: bool = False

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ConfigError("Krylov tolerances must be positive")
        if self.restart < 1 or self.max_iters < 1:
            raise ConfigError("restart and max_iters must be >= 1")
        if self.restart > self.max_iters:
            self.restart = self.max_iters


@dataclass
class KrylovStats:
    iterations: int = 0
    residuals: list = field(default_factory=list)
    converged: bool = False
    wall_time: float = 0.0
    restarts: int = 0
    true_residual: float = float("nan")
    rhs_norm: float = float("nan")

    @property
    def relative_residual(self):
        return self.true_residual / self.rhs_norm if self.rhs_norm > 0 else self.true_residual


def _as_action(op, n, what):
    if op is None:
        return None
    if callable(op) and not hasattr(op, "shape"):
        return op
    if hasattr(op, "shape"):
        if op.shape != (n, n):
            raise ShapeError(f"{what} has shape {op.shape}, expected ({n}, {n})")
        if hasattr(op, "matvec"):
            return op.matvec
        return lambda v: op @ v
    raise TypeError(f"{what} must be a matrix or a callable")


def _givens(a, b):
    if b == 0.0:
        return 1.0, 0.0
    h = np.hypot(a, b)
    return a / h, b / h


def gmres(A, b, M=None, x0=None, params=None, callback=None, **kwargs):
    """Solve ``A x = b`` with restarted right-preconditioned GMRES.

    ``A`` and ``M`` may be matrices or callables ``v -> A v`` / ``v -> M^-1 v``.
    Keyword arguments override fields of ``params``.  Returns ``(x, stats)``;
    hitting ``max_iters`` is reported through ``stats.converged`` rather than
    raised.
    """
    params = params or KrylovParams()
    if kwargs:
        params = KrylovParams(**{**params.__dict__, **kwargs})
    b = np.asarray(b, dtype=np.float64)
    n = b.shape[0]
    matvec = _as_action(A, n, "operator")
    precond = _as_action(M, n, "preconditioner") or (lambda v: v.copy())
    flexible = params.flexible

    t0 = time.perf_counter()
    stats = KrylovStats()
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64)
    if x.shape != (n,):
        raise ShapeError(f"x0 has shape {x.shape}, expected ({n},)")
    bnorm = float(np.linalg.norm(b))
    stats.rhs_norm = bnorm
    tol = params.rel_tol * bnorm + params.abs_tol

    k_max = params.restart
    V = np.empty((k_max + 1, n))
    Z = np.empty((k_max, n)) if flexible else None
    H = np.zeros((k_max + 1, k_max))
    cs = np.zeros(k_max)
    sn = np.zeros(k_max)

    r = b - matvec(x) if x.any() else b.copy()
    beta = float(np.linalg.norm(r))
    stats.residuals.append(beta)
    while True:
        if not np.isfinite(beta):
            raise BreakdownError("non-finite residual norm")
        if beta <= tol:
            stats.converged = True
            break
        if stats.iterations >= params.max_iters:
            break
        V[0] = r / beta
        g = np.zeros(k_max + 1)
        g[0] = beta
        H[:] = 0.0
        k = 0
        for j in range(k_max):
            z = precond(V[j])
            if flexible:
                Z[j] = z
            w = matvec(z)
            norm_before = float(np.linalg.norm(w))
            for i in range(j + 1):
                h = V[i] @ w
                H[i, j] += h
                w -= h * V[i]
            hn = float(np.linalg.norm(w))
            if hn < _REORTH_THRESHOLD * norm_before:
                for i in range(j + 1):
                    h = V[i] @ w
                    H[i, j] += h
                    w -= h * V[i]
                hn = float(np.linalg.norm(w))
            H[j + 1, j] = hn
            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = t
            cs[j], sn[j] = _givens(H[j, j], H[j + 1, j])
            H[j, j] = cs[j] * H[j, j] + sn[j] * H[j + 1, j]
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            est = abs(g[j + 1])
            if not np.isfinite(est):
                raise BreakdownError(f"non-finite residual at iteration {stats.iterations + 1}")
            stats.iterations += 1
            stats.residuals.append(est)
            if callback is not None:
                callback(stats.iterations, est)
            k = j + 1
            happy = hn <= 1e-14 * norm_before or hn == 0.0
            if est <= tol or happy or stats.iterations >= params.max_iters:
                break
            V[j + 1] = w / hn

        y = _back_substitute(H[:k, :k], g[:k])
        if flexible:
            x += y @ Z[:k]
        else:
            x += precond(y @ V[:k])
        r = b - matvec(x)
        beta = float(np.linalg.norm(r))
        if beta > tol and stats.iterations < params.max_iters:
            stats.restarts += 1
        elif beta > tol:
            if not np.isfinite(beta):
                raise BreakdownError("non-finite residual norm")
            break

    stats.true_residual = beta
    stats.wall_time = time.perf_counter() - t0
    return x, stats


def _back_substitute(R, g):
    k = R.shape[0]
    y = np.zeros(k)
    for i in range(k - 1, -1, -1):
        if R[i, i] == 0.0:
            raise BreakdownError("singular Hessenberg system")
        y[i] = (g[i] - R[i, i + 1:k] @ y[i + 1:k]) / R[i, i]
    return y


def fgmres(A, b, M=None, x0=None, params=None, callback=None, **kwargs):
    """Flexible GMRES: the preconditioned basis is stored, so ``M`` may vary
    between iterations."""
    kwargs["flexible"] = True
    return gmres(A, b, M=M, x0=x0, params=params, callback=callback, **kwargs)
