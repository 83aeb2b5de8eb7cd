"""Reference solutions for parallel-plate channel flow, and error norms.

The channel occupies ``0 <= y <= H`` and the flow rate is per unit depth.
Any consistent unit system works; the experiment drivers use CGS.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import ConfigError, DomainError, ShapeError


@dataclass(frozen=True)
class ChannelFlowSpec:
    """Channel height, viscosity and the prescribed flow rate.

    Steady mode uses ``Q``; pulsatile mode uses ``Q0 * sin(omega * t)``.
    """

    height: float
    nu: float
    Q: float = 0.0
    Q0: float = 0.0
    omega: float = 0.0

    def __post_init__(self):
        if not (self.height > 0 and self.nu > 0 and self.omega >= 0):
            raise ConfigError(f"invalid channel flow parameters {self}")

    @property
    def womersley_number(self):
        """``(H/2) sqrt(omega / nu)``."""
        return 0.5 * self.height * np.sqrt(self.omega / self.nu)


def _check_y(spec, y):
    y = np.asarray(y, dtype=np.float64)
    eps = 1e-12 * spec.height
    if np.any(y < -eps) or np.any(y > spec.height + eps):
        raise DomainError(f"y must lie in [0, {spec.height}]")
    return np.clip(y, 0.0, spec.height)


def poiseuille_velocity(spec, y):
    """Steady axial velocity ``6 Q y (H - y) / H^3``."""
    y = _check_y(spec, y)
    H = spec.height
    return 6.0 * spec.Q / H**3 * y * (H - y)


def _womersley_coefficients(spec):
    if spec.omega == 0:
        raise DomainError("omega = 0: use poiseuille_velocity for steady flow")
    k = np.sqrt(1j * spec.omega / spec.nu)
    H = spec.height
    # amplitude of the driving term such that int_0^H u dy = Q0 sin(omega t)
    G = 1j * spec.omega * spec.Q0 / (H - 2.0 * np.tanh(0.5 * k * H) / k)
    return k, G


def _shape(k, H, y):
    # cosh(k (y - H/2)) / cosh(k H / 2), written to avoid overflow
    return (np.exp(k * (y - H)) + np.exp(-k * y)) / (1.0 + np.exp(-k * H))


def womersley_channel_velocity(spec, y, t):
    """Periodic solution of ``u_t = g(t) + nu u_yy``, ``u(0) = u(H) = 0``,
    with flow rate ``Q0 sin(omega t)``."""
    y = _check_y(spec, y)
    k, G = _womersley_coefficients(spec)
    amp = G / (1j * spec.omega) * (1.0 - _shape(k, spec.height, y))
    return np.imag(amp * np.exp(1j * spec.omega * np.asarray(t, dtype=np.float64)))


def womersley_channel_forcing(spec, t):
    """The uniform driving term ``g(t)`` (minus the axial pressure gradient)."""
    _, G = _womersley_coefficients(spec)
    return np.imag(G * np.exp(1j * spec.omega * np.asarray(t, dtype=np.float64)))


def crank_nicolson_channel(spec, n_points=2000, steps_per_period=20000, periods=None,
                           t_eval=None, tol=1e-10):
    """Brute-force finite-difference solution of the pulsatile channel problem.

    Second-order differences on ``n_points`` equispaced nodes (walls
    included), Crank-Nicolson in time, and the forcing of every step chosen
    so the trapezoidal flow rate matches ``Q0 sin(omega t)`` exactly.  The
    run starts from rest and continues for ``periods`` periods (by default
    enough for the start-up transient to decay below ``tol``).  Returns
    ``(y, u)`` with ``u`` sampled at ``t_eval`` (folded into the final
    period; default: the last time level).
    """
    if spec.omega <= 0:
        raise DomainError("the pulsatile oracle needs omega > 0")
    H, nu = spec.height, spec.nu
    T = 2.0 * np.pi / spec.omega
    if periods is None:
        decay = nu * np.pi**2 / H**2 * T
        periods = int(min(200, max(3, np.ceil(-np.log(tol) / decay) + 1)))
    y = np.linspace(0.0, H, n_points)
    h = y[1] - y[0]
    n = n_points - 2
    dt = T / steps_per_period
    lap = sp.diags([np.ones(n - 1), -2.0 * np.ones(n), np.ones(n - 1)], [-1, 0, 1]) / h**2
    I = sp.identity(n)
    lhs = spla.splu(sp.csc_matrix(I - 0.5 * dt * nu * lap))
    rhs_op = sp.csr_matrix(I + 0.5 * dt * nu * lap)
    w = lhs.solve(dt * np.ones(n))
    flux_w = h * w.sum()

    targets = []
    if t_eval is not None:
        steps = np.rint((np.mod(np.atleast_1d(t_eval), T)) / dt).astype(int) % steps_per_period
        targets = list(steps)
    samples = {}
    u = np.zeros(n)
    total = periods * steps_per_period
    last_start = total - steps_per_period
    for step in range(1, total + 1):
        v = lhs.solve(rhs_op @ u)
        q = spec.Q0 * np.sin(spec.omega * step * dt)
        u = v + (q - h * v.sum()) / flux_w * w
        if step >= last_start and (step % steps_per_period) in targets:
            samples.setdefault(step % steps_per_period, u.copy())
    pad = lambda a: np.concatenate([[0.0], a, [0.0]])
    if t_eval is None:
        return y, pad(u)
    return y, np.array([pad(samples[s]) for s in targets]).squeeze()


def compute_flow_rate(Phi, U, i):
    """Flux of ``U`` through flow section ``i`` (1-based row of ``Phi``)."""
    if not 1 <= i <= Phi.shape[0]:
        raise IndexError(f"flow section {i} does not exist (m = {Phi.shape[0]})")
    U = np.asarray(U, dtype=np.float64)
    if U.shape != (Phi.shape[1],):
        raise ShapeError(f"velocity has shape {U.shape}, expected ({Phi.shape[1]},)")
    return float((Phi.getrow(i - 1) @ U).item())


# degree-4 symmetric rule on the reference triangle (6 points)
_A1, _A2 = 0.445948490915965, 0.091576213509771
_W1, _W2 = 0.223381589678011, 0.109951743655322
_QUAD_BARY = np.array([
    [_A1, _A1, 1 - 2 * _A1], [_A1, 1 - 2 * _A1, _A1], [1 - 2 * _A1, _A1, _A1],
    [_A2, _A2, 1 - 2 * _A2], [_A2, 1 - 2 * _A2, _A2], [1 - 2 * _A2, _A2, _A2],
])
_QUAD_W = np.array([_W1] * 3 + [_W2] * 3)


def l2_error(mesh, field, exact):
    """``|| u_h - u ||_L2`` with a degree-4 rule on every triangle.

    ``field`` holds nodal values, either ``(n_nodes,)`` for a scalar or
    ``(2 n_nodes,)`` for a component-blocked vector; ``exact(x, y)``
    returns a matching scalar or a ``(ux, uy)`` pair.
    """
    n = mesh.n_nodes
    field = np.asarray(field, dtype=np.float64)
    if field.shape == (n,):
        comps = field[None, :]
    elif field.shape == (2 * n,):
        comps = field.reshape(2, n)
    else:
        raise ShapeError(f"field of shape {field.shape} does not match a mesh with {n} nodes")
    tri = mesh.triangles
    pts = mesh.points[tri]                                        # (T, 3, 2)
    qp = np.einsum("qa,tad->tqd", _QUAD_BARY, pts)                # (T, Q, 2)
    uh = np.einsum("qa,cta->ctq", _QUAD_BARY, comps[:, tri])      # (C, T, Q)
    ue = exact(qp[..., 0], qp[..., 1])
    if comps.shape[0] == 2:
        ue = np.stack([np.broadcast_to(np.asarray(c, dtype=np.float64), qp.shape[:2]) for c in ue])
    else:
        ue = np.broadcast_to(np.asarray(ue, dtype=np.float64), qp.shape[:2])[None]
    area = mesh.areas()
    err2 = np.einsum("t,q,ctq->", area, _QUAD_W, (uh - ue) ** 2)
    return float(np.sqrt(err2))


def line_profile(mesh, U, x0, component=0, tol=1e-9):
    """Nodal values of one velocity component on the vertical line ``x = x0``.

    Returns ``(y, values)`` sorted by ``y``.
    """
    n = mesh.n_nodes
    scale = max(1.0, float(np.ptp(mesh.points[:, 0])))
    on = np.flatnonzero(np.abs(mesh.points[:, 0] - x0) <= tol * scale)
    if on.size < 2:
        raise DomainError(f"no mesh line at x = {x0}")
    order = np.argsort(mesh.points[on, 1])
    return mesh.points[on[order], 1], np.asarray(U)[component * n + on[order]]


def profile_l2_error(y, values, exact, n_gauss=4):
    """Relative L2 error of a piecewise-linear profile against ``exact(y)``
    along a segment (Gauss quadrature on every sub-interval)."""
    gx, gw = np.polynomial.legendre.leggauss(n_gauss)
    a, b = y[:-1], y[1:]
    half = 0.5 * (b - a)
    s = 0.5 * (gx[None, :] + 1.0)
    yq = a[:, None] + (b - a)[:, None] * s
    uh = values[:-1, None] * (1 - s) + values[1:, None] * s
    ue = exact(yq)
    err = np.sqrt(np.sum(half[:, None] * gw * (uh - ue) ** 2))
    ref = np.sqrt(np.sum(half[:, None] * gw * ue ** 2))
    return float(err / ref)
