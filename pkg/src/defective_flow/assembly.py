"""P1-P1 finite element assembly of the flow-rate augmented Navier-Stokes blocks.

Velocity unknowns are stored component-blocked: dof ``c * n_nodes + node``
for component ``c`` in {0, 1}.  Pressure unknowns are the mesh nodes.  All
element integrals are exact for affine triangles.

The monolithic system of one BDF1 time step reads::

    [ K   B^T  Phi^T ] [U]   [F]
    [-B   S    0     ] [P] = [0]
    [ Phi 0    0     ] [L]   [Q]

with ``K = M/dt + A + C(U_prev) (+ G)``.
"""

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .exceptions import AssemblyError, ConfigError, ShapeError
from .meshgen import PROFILE, WALL
from .sparsecore import as_csr

DEFAULT_STABILIZATION = 0.05


def _geometry(mesh):
    p = mesh.points[mesh.triangles]                      # (T, 3, 2)
    area = mesh.areas()
    if np.any(area <= 1e-14 * np.max(np.abs(area), initial=1.0)):
        k = int(np.argmin(area))
        raise AssemblyError(f"degenerate triangle {k} (area {area[k]:.3e})")
    # grad(phi_i) = (y_j - y_k, x_k - x_j) / (2 area), (i, j, k) cyclic
    nxt = p[:, [1, 2, 0]]
    prv = p[:, [2, 0, 1]]
    grads = np.stack([nxt[..., 1] - prv[..., 1], prv[..., 0] - nxt[..., 0]], axis=-1)
    grads /= (2.0 * area)[:, None, None]
    edges = np.linalg.norm(p - nxt, axis=-1)
    return area, grads, edges.max(axis=1)


def _scatter(rows, cols, vals, shape):
    T, k = rows.shape
    l = cols.shape[1]
    r = np.broadcast_to(rows[:, :, None], (T, k, l)).ravel()
    c = np.broadcast_to(cols[:, None, :], (T, k, l)).ravel()
    return as_csr(sp.coo_matrix((vals.ravel(), (r, c)), shape=shape))


def _vector_block(scalar, n):
    """diag(scalar, scalar) for the two velocity components."""
    return as_csr(sp.block_diag([scalar, scalar], format="csr"))


_MASS_REF = (np.ones((3, 3)) + np.eye(3)) / 12.0


@dataclass(frozen=True, eq=False)
class NSBlocks:
    """Time-independent operators on the full (unconstrained) velocity space.

    ``Phi`` holds one row per Lagrange-multiplier flow section.  ``G`` is an
    optional extra momentum operator added to ``K`` unchanged.
    """

    mesh: object
    M: sp.csr_matrix
    A: sp.csr_matrix
    B: sp.csr_matrix
    S: sp.csr_matrix
    Phi: sp.csr_matrix
    nu: float
    dt: float = None
    G: sp.csr_matrix = None

    @property
    def n_velocity(self):
        return self.M.shape[0]

    @property
    def n_pressure(self):
        return self.B.shape[0]

    @property
    def m(self):
        return self.Phi.shape[0]

    def with_extra_operator(self, G):
        G = as_csr(G)
        if G.shape != self.M.shape:
            raise ShapeError(f"extra momentum operator has shape {G.shape}, expected {self.M.shape}")
        return replace(self, G=G)


def assemble_constant_blocks(mesh, nu, alpha=DEFAULT_STABILIZATION):
    """Velocity mass ``M``, viscous stiffness ``A``, divergence ``B`` and the
    pressure stabilization block ``S``.

    ``S`` is a Brezzi-Pitkaranta pressure-gradient penalty with element
    coefficient ``alpha * h_K**2 / nu``.
    """
    if nu <= 0:
        raise ConfigError(f"viscosity must be positive, got {nu}")
    n = mesh.n_nodes
    area, grads, h = _geometry(mesh)
    tri = mesh.triangles

    mass = _scatter(tri, tri, area[:, None, None] * _MASS_REF, (n, n))
    lap_loc = area[:, None, None] * np.einsum("tad,tbd->tab", grads, grads)
    lap = _scatter(tri, tri, lap_loc, (n, n))
    tau = alpha * h**2 / nu
    S = _scatter(tri, tri, tau[:, None, None] * lap_loc, (n, n))

    # B[l, c*n + a] = -(xi_l, d phi_a / d x_c) = -area/3 * grads[a, c]
    cols = np.concatenate([tri, tri + n], axis=1)
    bvals = -(area / 3.0)[:, None, None] * np.concatenate(
        [grads[:, None, :, 0].repeat(3, axis=1), grads[:, None, :, 1].repeat(3, axis=1)], axis=2)
    B = _scatter(tri, cols, bvals, (n, 2 * n))

    return NSBlocks(
        mesh=mesh,
        M=_vector_block(mass, n),
        A=_vector_block(nu * lap, n),
        B=B,
        S=S,
        Phi=assemble_flux_matrix(mesh),
        nu=float(nu),
    )


def assemble_convection(mesh, Uprev):
    """Linearized convection ``C[k, j] = (w . grad psi_j, psi_k)`` with ``w``
    the P1 velocity given by ``Uprev`` (full velocity vector)."""
    n = mesh.n_nodes
    Uprev = np.asarray(Uprev, dtype=np.float64)
    if Uprev.shape != (2 * n,):
        raise ShapeError(f"Uprev has shape {Uprev.shape}, expected ({2 * n},)")
    area, grads, _ = _geometry(mesh)
    tri = mesh.triangles
    w = np.stack([Uprev[:n][tri], Uprev[n:][tri]], axis=-1)          # (T, 3, 2)
    # int w_c phi_a = sum_d M_loc[a, d] w_{c,d}
    wphi = area[:, None, None] * np.einsum("ad,tdc->tac", _MASS_REF, w)
    loc = np.einsum("tac,tbc->tab", wphi, grads)
    conv = _scatter(tri, tri, loc, (n, n))
    return _vector_block(conv, n)


def flux_row(mesh, section):
    """Row vector ``int_section psi_j . n`` over the full velocity space."""
    n = mesh.n_nodes
    e = mesh.edges[section.edges]
    ell = mesh.edge_lengths(section.edges)
    nrm = mesh.normals[section.edges]
    row = np.zeros(2 * n)
    for c in range(2):
        w = 0.5 * ell * nrm[:, c]
        np.add.at(row, c * n + e[:, 0], w)
        np.add.at(row, c * n + e[:, 1], w)
    return row


def assemble_flux_matrix(mesh, m=None):
    """Coupling matrix ``Phi`` with one row per Lagrange-multiplier section."""
    sections = mesh.flow_sections
    if m is not None and m != len(sections):
        raise ConfigError(f"mesh has {len(sections)} flow sections, {m} requested")
    rows = []
    for s in sections:
        if len(s.edges) == 0:
            raise AssemblyError(f"flow section {s.name!r} is empty")
        rows.append(flux_row(mesh, s))
    if not rows:
        return sp.csr_matrix((0, 2 * mesh.n_nodes))
    return as_csr(sp.csr_matrix(np.vstack(rows)))


@dataclass(frozen=True)
class DirichletData:
    """Prescribed values for a set of velocity dofs (full numbering)."""

    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=np.float64)
        if idx.shape != val.shape:
            raise ShapeError("Dirichlet indices and values differ in length")
        if np.unique(idx).size != idx.size:
            raise ConfigError("Dirichlet indices must be unique")
        order = np.argsort(idx, kind="stable")
        object.__setattr__(self, "indices", idx[order])
        object.__setattr__(self, "values", val[order])

    @classmethod
    def empty(cls):
        return cls(np.zeros(0, np.int64), np.zeros(0))

    def merged(self, other):
        """Union of two data sets; entries of ``other`` win on overlap."""
        keep = ~np.isin(self.indices, other.indices)
        return DirichletData(np.concatenate([self.indices[keep], other.indices]),
                             np.concatenate([self.values[keep], other.values]))

    def full_vector(self, n_velocity):
        g = np.zeros(n_velocity)
        g[self.indices] = self.values
        return g


def wall_dirichlet(mesh):
    """Homogeneous no-slip data on every wall node (both components)."""
    nodes = mesh.nodes_of([WALL])
    n = mesh.n_nodes
    idx = np.concatenate([nodes, nodes + n])
    return DirichletData(idx, np.zeros(idx.size))


def profile_constrained_dofs(mesh):
    """Velocity dofs owned by Dirichlet-profile sections (wall nodes excluded)."""
    n = mesh.n_nodes
    nodes = np.setdiff1d(mesh.nodes_of([PROFILE]), mesh.nodes_of([WALL]))
    return np.concatenate([nodes, nodes + n])


def dirichlet_profile(mesh, section, Q, shape="parabolic"):
    """Normal-velocity profile on a straight section whose discrete flux is ``Q``.

    ``Q`` is the signed outward flux (negative for inflow).  Values are set on
    both velocity components (``u = v n``), so the tangential velocity is zero.
    The profile is rescaled with the discrete flux row, not the continuous
    integral.
    """
    if isinstance(section, (str, int, np.integer)):
        section = mesh.section(section)
    nodes = mesh.section_nodes(section)
    ell = mesh.edge_lengths(section.edges)
    if ell.sum() <= 0:
        raise ConfigError(f"section {section.name!r} has zero length")
    n = mesh.n_nodes
    idx = np.concatenate([nodes, nodes + n])
    if Q == 0:
        return DirichletData(idx, np.zeros(idx.size))

    pts = mesh.points[nodes]
    t = np.array([-section.normal[1], section.normal[0]])
    s = (pts - pts.mean(axis=0)) @ t
    s -= s.min()
    L = s.max()
    if shape == "parabolic":
        v = 6.0 / L**3 * s * (L - s)
    elif shape == "flat":
        v = np.full(nodes.size, 1.0 / L)
    else:
        raise ConfigError(f"unknown profile shape {shape!r}")

    row = flux_row(mesh, section)
    vals = np.concatenate([v * section.normal[0], v * section.normal[1]])
    g = np.zeros(2 * n)
    g[idx] = vals
    vals *= Q / (row @ g)
    return DirichletData(idx, vals)


@dataclass(eq=False)
class BlockSystem:
    """Reduced monolithic system of one time step (Dirichlet dofs eliminated)."""

    K: sp.csr_matrix
    B: sp.csr_matrix
    S: sp.csr_matrix
    Phi: sp.csr_matrix
    F: np.ndarray
    G: np.ndarray
    Q: np.ndarray
    free: np.ndarray
    dirichlet: DirichletData
    n_velocity_full: int
    M: sp.csr_matrix = None
    dt: float = None
    _matrix: sp.csr_matrix = field(default=None, repr=False)

    @property
    def sizes(self):
        return (self.K.shape[0], self.B.shape[0], self.Phi.shape[0])

    @property
    def m(self):
        return self.Phi.shape[0]

    @property
    def n(self):
        return sum(self.sizes)

    def matrix(self):
        """Assembled augmented matrix (cached)."""
        if self._matrix is None:
            nu, npr, m = self.sizes
            self._matrix = as_csr(sp.bmat([
                [self.K, self.B.T, self.Phi.T],
                [-self.B, self.S, None],
                [self.Phi, sp.csr_matrix((m, npr)), sp.csr_matrix((m, m))],
            ], format="csr"))
        return self._matrix

    def rhs(self):
        return np.concatenate([self.F, self.G, self.Q])

    def matvec(self, x):
        return self.matrix() @ x

    def velocity(self, x):
        """Full velocity vector (Dirichlet values restored) from a solution."""
        U = self.dirichlet.full_vector(self.n_velocity_full)
        U[self.free] = x[:self.K.shape[0]]
        return U

    def pressure(self, x):
        nu, npr, _ = self.sizes
        return x[nu:nu + npr]

    def multipliers(self, x):
        nu, npr, _ = self.sizes
        return x[nu + npr:]

    def as_stokes(self):
        """The 2x2 velocity-pressure system (flow-rate rows dropped)."""
        return replace(self, Phi=sp.csr_matrix((0, self.K.shape[0])), Q=np.zeros(0), _matrix=None)


def _load_vector(mesh, M, f):
    n = mesh.n_nodes
    if f is None:
        return np.zeros(2 * n)
    if callable(f):
        vals = np.asarray(f(mesh.points[:, 0], mesh.points[:, 1]), dtype=np.float64)
        fx, fy = np.broadcast_to(vals[0], (n,)), np.broadcast_to(vals[1], (n,))
    else:
        fx, fy = np.broadcast_to(np.asarray(f, dtype=np.float64), (2,))
        fx, fy = np.full(n, fx), np.full(n, fy)
    return M @ np.concatenate([fx, fy])


def build_time_step_system(blocks, Uprev=None, f=None, Q=None, dirichlet=None, steady=False,
                           convection=True):
    """Assemble ``K``, ``F`` and reduce the augmented system by eliminating
    Dirichlet dofs (rows and columns removed, values lifted into the RHS).

    ``steady=True`` drops the mass and convection terms (Stokes operator).
    """
    mesh = blocks.mesh
    nvel = blocks.n_velocity
    Uprev = np.zeros(nvel) if Uprev is None else np.asarray(Uprev, dtype=np.float64)
    if Uprev.shape != (nvel,):
        raise ShapeError(f"Uprev has shape {Uprev.shape}, expected ({nvel},)")
    Q = np.zeros(blocks.m) if Q is None else np.atleast_1d(np.asarray(Q, dtype=np.float64))
    if Q.shape != (blocks.m,):
        raise ShapeError(f"expected {blocks.m} flow rates, got {Q.shape[0]}")
    dirichlet = wall_dirichlet(mesh) if dirichlet is None else dirichlet
    if dirichlet.indices.size and (dirichlet.indices.min() < 0 or dirichlet.indices.max() >= nvel):
        raise ConfigError("Dirichlet index out of range")

    if steady:
        K = blocks.A
        F = _load_vector(mesh, blocks.M, f)
        dt = None
    else:
        dt = blocks.dt
        if dt is None or not dt > 0:
            raise ConfigError(f"time step must be positive, got {dt}")
        K = blocks.M / dt + blocks.A
        if convection:
            K = K + assemble_convection(mesh, Uprev)
        F = _load_vector(mesh, blocks.M, f) + blocks.M @ Uprev / dt
    if blocks.G is not None:
        K = K + blocks.G
    K = as_csr(K)

    fixed = dirichlet.indices
    free = np.setdiff1d(np.arange(nvel), fixed)
    g = dirichlet.full_vector(nvel)
    Kf = K[free]
    K_ff = as_csr(Kf[:, free])
    B_f = as_csr(blocks.B[:, free])
    Phi_f = as_csr(blocks.Phi[:, free])
    F_red = F[free] - Kf @ g
    G_red = blocks.B @ g
    Q_red = Q - blocks.Phi @ g
    M_ff = as_csr(blocks.M[free][:, free])
    return BlockSystem(K_ff, B_f, blocks.S, Phi_f, F_red, G_red, Q_red, free, dirichlet, nvel,
                       M=M_ff, dt=dt)
