import dataclasses

import numpy as np
import pytest

from defective_flow.assembly import assemble_constant_blocks, build_time_step_system
from defective_flow.meshgen import Port, build_channel_mesh, build_manifold_mesh

NU = 0.033  # cm^2/s


def channel(nx=10, ny=4, length=10.0, height=2.0, mode="lm"):
    return build_channel_mesh(length, height, nx, ny, mode).scaled(0.1)


def step_system(mesh, dt=0.01, Q=None, convection=True, seed=0, nu=NU):
    """One time-step system with a random-ish previous velocity."""
    blocks = dataclasses.replace(assemble_constant_blocks(mesh, nu), dt=dt)
    rng = np.random.default_rng(seed)
    Uprev = rng.standard_normal(blocks.n_velocity)
    Q = -np.linspace(0.1, 0.2, blocks.m) if Q is None else Q
    return build_time_step_system(blocks, Uprev, Q=Q, convection=convection)


@pytest.fixture(scope="session")
def small_channel():
    return channel()


@pytest.fixture(scope="session")
def channel_system(small_channel):
    return step_system(small_channel)


@pytest.fixture(scope="session")
def manifold_mesh():
    ports = (Port("top", (2, 4)), Port("bottom", (5, 7)), Port("top", (7, 8), "profile"))
    return build_manifold_mesh(10, 2, 20, 4, ports).scaled(0.1)


@pytest.fixture(scope="session")
def manifold_system(manifold_mesh):
    from defective_flow.harness.timeloop import section_dirichlet
    from defective_flow.harness.config import Waveform

    blocks = dataclasses.replace(assemble_constant_blocks(manifold_mesh, NU), dt=0.01)
    waves = {"inflow": Waveform("constant", -0.3), "port1": Waveform("constant", 0.1),
             "port2": Waveform("constant", 0.05), "port3": Waveform("constant", 0.05)}
    dirichlet = section_dirichlet(manifold_mesh, waves, 0.0, "parabolic")
    rng = np.random.default_rng(3)
    return build_time_step_system(blocks, 0.1 * rng.standard_normal(blocks.n_velocity),
                                  Q=[-0.3, 0.1, 0.05], dirichlet=dirichlet)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
