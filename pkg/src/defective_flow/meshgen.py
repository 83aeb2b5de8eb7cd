"""Structured 2-D triangulations with tagged boundary segments.

Every rectangle cell is split into four triangles through an added centre
node ("crossed" pattern), which avoids a preferred diagonal direction.
Coordinates are stored in whatever length unit the caller passes (the
experiment drivers use millimetres and rescale to centimetres before
assembly, see :meth:`Mesh.scaled`).
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigError

WALL = "wall"
NEUMANN = "neumann"
LM = "lm"
PROFILE = "profile"

_SNAP_TOL = 1e-9


@dataclass(frozen=True)
class Section:
    """A straight boundary segment on which a flow rate is prescribed.

    ``mode`` is ``"lm"`` (Lagrange multiplier) or ``"profile"`` (Dirichlet
    velocity profile of given flow rate).
    """

    name: str
    mode: str
    edges: np.ndarray
    normal: np.ndarray

    @property
    def is_lm(self):
        return self.mode == LM


@dataclass(frozen=True)
class Port:
    side: str
    span: tuple
    mode: str = LM


@dataclass(frozen=True, eq=False)
class Mesh:
    points: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    edge_kind: np.ndarray
    normals: np.ndarray
    sections: tuple = field(default=())

    @property
    def n_nodes(self):
        return self.points.shape[0]

    @property
    def n_triangles(self):
        return self.triangles.shape[0]

    @property
    def flow_sections(self):
        """Lagrange-multiplier sections, in flow-section order 1..m."""
        return tuple(s for s in self.sections if s.is_lm)

    @property
    def profile_sections(self):
        return tuple(s for s in self.sections if not s.is_lm)

    @property
    def m(self):
        return len(self.flow_sections)

    def section(self, key):
        """Look up a section by name or by 1-based flow-section index."""
        if isinstance(key, (int, np.integer)):
            fs = self.flow_sections
            if not 1 <= key <= len(fs):
                raise IndexError(f"flow section {key} does not exist (m = {len(fs)})")
            return fs[key - 1]
        for s in self.sections:
            if s.name == key:
                return s
        raise IndexError(f"no section named {key!r}")

    def areas(self):
        p = self.points[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def edge_lengths(self, edges=None):
        e = self.edges if edges is None else self.edges[edges]
        return np.linalg.norm(self.points[e[:, 1]] - self.points[e[:, 0]], axis=1)

    def nodes_of(self, kinds):
        """Sorted node ids touched by boundary edges of the given kinds."""
        mask = np.isin(self.edge_kind, list(kinds))
        return np.unique(self.edges[mask])

    def section_nodes(self, section):
        return np.unique(self.edges[section.edges])

    def scaled(self, factor):
        """Copy with coordinates multiplied by ``factor`` (e.g. mm -> cm)."""
        return Mesh(self.points * factor, self.triangles, self.edges, self.edge_kind,
                    self.normals, self.sections)

    def validate(self):
        """Raise ``ConfigError`` if any structural invariant is violated."""
        if np.any(self.areas() <= 0):
            raise ConfigError("mesh has non-positive triangle areas")
        tri_edges = np.sort(self.triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
        keys, counts = np.unique(tri_edges, axis=0, return_counts=True)
        lookup = {tuple(k): c for k, c in zip(keys, counts)}
        for e in np.sort(self.edges, axis=1):
            if lookup.get(tuple(e), 0) != 1:
                raise ConfigError(f"boundary edge {tuple(e)} is not on exactly one triangle")
        if not np.allclose(np.linalg.norm(self.normals, axis=1), 1.0, atol=1e-12, rtol=0):
            raise ConfigError("boundary normals are not unit length")
        seen = set()
        for s in self.sections:
            if len(s.edges) == 0:
                raise ConfigError(f"section {s.name!r} is empty")
            if seen.intersection(s.edges.tolist()):
                raise ConfigError(f"section {s.name!r} overlaps another section")
            seen.update(s.edges.tolist())
        return self


def section_length(mesh, i):
    """Total length of a section, given by name or 1-based flow-section index."""
    s = mesh.section(i)
    return float(mesh.edge_lengths(s.edges).sum())


def _check_dims(length, height, nx, ny):
    if not (length > 0 and height > 0):
        raise ConfigError(f"domain dimensions must be positive, got {length} x {height}")
    if nx < 2 or ny < 2:
        raise ConfigError(f"need nx, ny >= 2, got nx={nx}, ny={ny}")


def _crossed_rectangle(length, height, nx, ny):
    xs = np.linspace(0.0, length, nx + 1)
    ys = np.linspace(0.0, height, ny + 1)
    gx, gy = np.meshgrid(xs, ys)
    grid = np.column_stack([gx.ravel(), gy.ravel()])
    cx, cy = np.meshgrid(0.5 * (xs[:-1] + xs[1:]), 0.5 * (ys[:-1] + ys[1:]))
    centres = np.column_stack([cx.ravel(), cy.ravel()])
    points = np.vstack([grid, centres])

    def g(i, j):
        return j * (nx + 1) + i

    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny))
    ii, jj = ii.ravel(), jj.ravel()
    a, b, c, d = g(ii, jj), g(ii + 1, jj), g(ii + 1, jj + 1), g(ii, jj + 1)
    e = (nx + 1) * (ny + 1) + jj * nx + ii
    tris = np.stack([
        np.column_stack([a, b, e]),
        np.column_stack([b, c, e]),
        np.column_stack([c, d, e]),
        np.column_stack([d, a, e]),
    ], axis=1).reshape(-1, 3)

    # boundary traversed counter-clockwise, so the outward normal is (dy, -dx)
    i = np.arange(nx)
    j = np.arange(ny)
    sides = {
        "bottom": np.column_stack([g(i, 0), g(i + 1, 0)]),
        "right": np.column_stack([g(nx, j), g(nx, j + 1)]),
        "top": np.column_stack([g(i + 1, ny), g(i, ny)]),
        "left": np.column_stack([g(0, j + 1), g(0, j)]),
    }
    return points, tris, sides


def _assemble(points, tris, sides, kinds_by_side, sections_spec):
    edges = np.vstack([sides[s] for s in ("bottom", "right", "top", "left")])
    offsets = {}
    start = 0
    for s in ("bottom", "right", "top", "left"):
        offsets[s] = start
        start += len(sides[s])
    kind = np.empty(len(edges), dtype=object)
    for s in ("bottom", "right", "top", "left"):
        kind[offsets[s]:offsets[s] + len(sides[s])] = kinds_by_side[s]

    d = points[edges[:, 1]] - points[edges[:, 0]]
    normals = np.column_stack([d[:, 1], -d[:, 0]]) / np.linalg.norm(d, axis=1)[:, None]
    normals = np.round(normals, 15) + 0.0

    sections = []
    for name, mode, side, local in sections_spec:
        idx = offsets[side] + np.asarray(local, dtype=np.int64)
        kind[idx] = mode
        sections.append(Section(name, mode, idx, normals[idx[0]].copy()))
    kind = kind.astype(str)
    return Mesh(points, tris.astype(np.int64), edges.astype(np.int64), kind, normals,
                tuple(sections)).validate()


def build_channel_mesh(length, height, nx, ny, inflow_mode=LM):
    """Straight channel: left = inflow section, right = Neumann, top/bottom = wall.

    ``inflow_mode`` selects whether the inflow is a Lagrange-multiplier flow
    section (``"lm"``) or a Dirichlet profile section (``"profile"``).
    """
    return build_manifold_mesh(length, height, nx, ny, ports=(), inflow_mode=inflow_mode)


def _snap(value, step, n, what):
    k = value / step
    if abs(k - round(k)) > _SNAP_TOL * max(1.0, abs(k)) or not 0 <= round(k) <= n:
        raise ConfigError(f"{what} = {value} is not aligned with the mesh lines (spacing {step})")
    return int(round(k))


def build_manifold_mesh(length, height, nx, ny, ports=(), inflow_mode=LM):
    """Rectangle with side ports on the top/bottom walls.

    Each port is a :class:`Port` (or a mapping with ``side``, ``span`` and
    ``mode``).  The inflow section is flow section 1 when it is a Lagrange
    multiplier section; LM ports follow in declaration order.
    """
    _check_dims(length, height, nx, ny)
    if inflow_mode not in (LM, PROFILE):
        raise ConfigError(f"unknown inflow mode {inflow_mode!r}")
    points, tris, sides = _crossed_rectangle(length, height, nx, ny)
    dx = length / nx

    spec = [("inflow", inflow_mode, "left", np.arange(ny))]
    used = {"top": np.zeros(nx, bool), "bottom": np.zeros(nx, bool)}
    for k, port in enumerate(ports, start=1):
        if isinstance(port, dict):
            port = Port(**port)
        if port.side not in used:
            raise ConfigError(f"port side must be 'top' or 'bottom', got {port.side!r}")
        if port.mode not in (LM, PROFILE):
            raise ConfigError(f"unknown port mode {port.mode!r}")
        x0, x1 = port.span
        i0 = _snap(x0, dx, nx, "port span start")
        i1 = _snap(x1, dx, nx, "port span end")
        if i1 <= i0:
            raise ConfigError(f"port {k} has an empty or reversed span {port.span}")
        cells = np.arange(i0, i1)
        if used[port.side][cells].any():
            raise ConfigError(f"port {k} overlaps another port on the {port.side} side")
        used[port.side][cells] = True
        # top edges are stored right-to-left
        local = cells if port.side == "bottom" else (nx - 1 - cells)[::-1]
        spec.append((f"port{k}", port.mode, port.side, np.sort(local)))

    kinds = {"bottom": WALL, "top": WALL, "right": NEUMANN, "left": inflow_mode}
    return _assemble(points, tris, sides, kinds, spec)
