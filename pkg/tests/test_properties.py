"""Property-based tests (hypothesis) for the invariants of each module."""

import numpy as np
import scipy.sparse as sp
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from defective_flow.assembly import dirichlet_profile, flux_row
from defective_flow.harness.config import Waveform
from defective_flow.meshgen import PROFILE, build_channel_mesh
from defective_flow.precond import make_preconditioner
from defective_flow.sparsecore import dense_lu_solve, scaled_triple_product, spmv

SETTINGS = settings(max_examples=40, deadline=None,
                    suppress_health_check=[HealthCheck.function_scoped_fixture])
seeds = st.integers(0, 2**32 - 1)


def random_sparse(seed, rows, cols, density):
    return sp.random(rows, cols, density=density, random_state=seed, format="csr")


@SETTINGS
@given(seed=seeds, rows=st.integers(1, 40), cols=st.integers(1, 40),
       density=st.floats(0.02, 0.6))
def test_triple_product_symmetric(seed, rows, cols, density):
    X = random_sparse(seed, rows, cols, density)
    d = np.random.default_rng(seed).uniform(0.1, 10.0, cols)
    S = scaled_triple_product(X, d, X).toarray()
    scale = max(np.abs(S).max(), 1e-300)
    assert np.abs(S - S.T).max() <= 1e-13 * scale


@SETTINGS
@given(seed=seeds, rows=st.integers(1, 30), inner=st.integers(1, 30), cols=st.integers(1, 30))
def test_triple_product_matches_dense(seed, rows, inner, cols):
    X = random_sparse(seed, rows, inner, 0.3)
    Y = random_sparse(seed + 1, cols, inner, 0.3)
    d = np.random.default_rng(seed).uniform(0.1, 10.0, inner)
    ref = X.toarray() @ np.diag(d) @ Y.toarray().T
    got = scaled_triple_product(X, d, Y).toarray()
    assert np.allclose(got, ref, rtol=1e-13, atol=1e-13 * max(1.0, np.abs(ref).max()))


@SETTINGS
@given(seed=seeds, n=st.integers(1, 200), density=st.floats(0.0, 0.5))
def test_spmv_matches_dense(seed, n, density):
    A = random_sparse(seed, n, n, density)
    x = np.random.default_rng(seed).standard_normal(n)
    ref = A.toarray() @ x
    assert np.linalg.norm(spmv(A, x) - ref) <= 1e-13 * max(1.0, np.linalg.norm(ref))


@SETTINGS
@given(seed=seeds, n=st.integers(1, 32))
def test_dense_lu_residual(seed, n):
    rng = np.random.default_rng(seed)
    Q1, _ = np.linalg.qr(rng.standard_normal((n, n)))
    Q2, _ = np.linalg.qr(rng.standard_normal((n, n)))
    A = Q1 @ np.diag(rng.uniform(1.0, 10.0, n)) @ Q2
    b = rng.standard_normal(n)
    x = dense_lu_solve(A, b)
    assert np.linalg.norm(A @ x - b) <= 1e-11 * np.linalg.norm(b)


@SETTINGS
@given(nx=st.integers(2, 30), ny=st.integers(2, 12), length=st.floats(0.5, 50.0),
       height=st.floats(0.5, 10.0))
def test_channel_mesh_invariants(nx, ny, length, height):
    mesh = build_channel_mesh(length, height, nx, ny)
    assert mesh.n_nodes == (nx + 1) * (ny + 1) + nx * ny
    assert mesh.n_triangles == 4 * nx * ny
    assert np.all(mesh.areas() > 0)
    assert abs(mesh.areas().sum() - length * height) <= 1e-10 * length * height
    tri = mesh.triangles
    edges = np.unique(np.sort(np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]]),
                              axis=1), axis=0)
    assert mesh.n_nodes - len(edges) + mesh.n_triangles == 1
    assert abs(mesh.edge_lengths().sum() - 2 * (length + height)) <= 1e-10 * (length + height)


@SETTINGS
@given(nx=st.integers(2, 20), ny=st.integers(2, 10), Q=st.floats(-50.0, 50.0),
       shape=st.sampled_from(["parabolic", "flat"]))
def test_profile_flux_exact(nx, ny, Q, shape):
    mesh = build_channel_mesh(10.0, 2.0, nx, ny, inflow_mode=PROFILE)
    sec = mesh.section("inflow")
    data = dirichlet_profile(mesh, sec, Q, shape)
    U = data.full_vector(2 * mesh.n_nodes)
    assert abs(float(flux_row(mesh, sec) @ U) - Q) <= 1e-12 * max(1.0, abs(Q))


@settings(max_examples=15, deadline=None,
          suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(seed=seeds, a=st.floats(-10, 10), b=st.floats(-10, 10),
       variant=st.sampled_from(["simple", "aug-as", "aug-as-i"]))
def test_preconditioner_apply_is_linear(manifold_system, seed, a, b, variant):
    system = manifold_system.as_stokes() if variant == "simple" else manifold_system
    pre = make_preconditioner(variant, "direct").fit(system)
    rng = np.random.default_rng(seed)
    r1, r2 = rng.standard_normal((2, system.n))
    lhs = pre.apply(a * r1 + b * r2)
    rhs = a * pre.apply(r1) + b * pre.apply(r2)
    assert np.linalg.norm(lhs - rhs) <= 1e-10 * max(1.0, np.linalg.norm(rhs))


@SETTINGS
@given(Q=st.floats(-100, 100), t_ramp=st.floats(0.01, 5.0), t=st.lists(st.floats(0, 10), min_size=2,
                                                                    max_size=10))
def test_ramp_monotone_and_bounded(Q, t_ramp, t):
    w = Waveform("ramp", Q, t_ramp)
    vals = np.array([w(s) for s in sorted(t)])
    assert np.all(np.abs(vals) <= abs(Q) + 1e-15)
    assert np.all(np.diff(vals) * np.sign(Q) >= -1e-15)
