"""BDF1 time stepping with semi-implicit convection and a monolithic solve per step."""

import dataclasses
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from ..assembly import assemble_constant_blocks, build_time_step_system, dirichlet_profile, wall_dirichlet
from ..exceptions import ConfigError, DefectiveFlowError
from ..solver import MonolithicSolver

log = logging.getLogger(__name__)


@dataclass
class StepRecord:
    step: int
    time: float
    variant: str
    iterations: int
    true_residual: float
    flow_residual_max: float
    wall_seconds: float
    converged: bool
    flow_residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    rhs_norm: float = 0.0


@dataclass
class Snapshot:
    step: int
    time: float
    velocity: np.ndarray
    pressure: np.ndarray


@dataclass
class RunRecord:
    """Everything a run produced: one ``StepRecord`` per step plus snapshots."""

    mesh: object
    variant: str
    steps: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    velocity: np.ndarray = None
    pressure: np.ndarray = None
    multipliers: np.ndarray = None

    @property
    def iterations(self):
        return np.array([s.iterations for s in self.steps], dtype=np.int64)

    @property
    def all_converged(self):
        return all(s.converged for s in self.steps)


def section_dirichlet(mesh, waveforms, t, shape):
    """Wall data merged with every Dirichlet-profile section at time ``t``."""
    data = wall_dirichlet(mesh)
    for sec in mesh.profile_sections:
        # wall nodes keep their no-slip value at the section ends
        data = dirichlet_profile(mesh, sec, waveforms[sec.name](t), shape).merged(data)
    return data


def _check_waveforms(mesh, waveforms):
    needed = [s.name for s in mesh.flow_sections] + [s.name for s in mesh.profile_sections]
    missing = [n for n in needed if n not in waveforms]
    if missing:
        raise ConfigError(f"no flow-rate waveform for sections {missing}")


def run_timeloop(config, precond=None, inner=None, inner_schur=None, mesh=None,
                 fail_fast=None, snapshot_stride=None, on_step=None, on_solve=None):
    """Integrate from rest to ``config.end_time``.

    ``precond``/``inner``/``inner_schur``/``fail_fast`` override the config.
    ``snapshot_stride=k`` keeps every k-th step (0 keeps only the last).
    ``on_solve(record, system, x)`` sees each step's assembled system and solution.
    With no multiplier sections, ``aug-as`` reduces to plain SIMPLE and is run
    as such.
    """
    variant = precond or config.precond
    inner = inner or config.inner
    inner_schur = inner_schur if inner_schur is not None else config.inner_schur
    fail_fast = config.fail_fast if fail_fast is None else fail_fast
    stride = config.vtk_stride if snapshot_stride is None else snapshot_stride
    mesh = mesh if mesh is not None else config.build_mesh()
    _check_waveforms(mesh, config.waveforms)

    blocks = assemble_constant_blocks(mesh, config.nu, config.alpha)
    blocks = dataclasses.replace(blocks, dt=config.dt)
    m = blocks.m
    lm_waves = [config.waveforms[s.name] for s in mesh.flow_sections]
    name = "simple" if (variant == "aug-as" and m == 0) else variant
    solver = MonolithicSolver(name, inner, inner_schur, config.rel_tol, config.abs_tol,
                              config.restart, config.max_iters, config.flexible)

    record = RunRecord(mesh=mesh, variant=variant)
    U = np.zeros(blocks.n_velocity)
    P = np.zeros(blocks.n_pressure)
    lam = np.zeros(m)
    n_steps = 1 if config.steady else config.n_steps
    for step in range(1, n_steps + 1):
        # a steady solve takes the waveforms at the end time
        t = config.end_time if config.steady else step * config.dt
        Q = np.array([w(t) for w in lm_waves])
        dirichlet = section_dirichlet(mesh, config.waveforms, t, config.profile_shape)
        system = build_time_step_system(blocks, U, Q=Q, dirichlet=dirichlet,
                                        steady=config.steady, convection=config.convection)
        if name == "simple":
            system = system.as_stokes()
        t0 = time.perf_counter()
        x = solver.fit(system).solve()
        wall = time.perf_counter() - t0
        stats = solver.stats_
        U = system.velocity(x)
        P = system.pressure(x).copy()
        lam = system.multipliers(x).copy() if name != "simple" else np.zeros(0)
        flow_res = np.abs(blocks.Phi @ U - Q)
        rec = StepRecord(step, t, variant, stats.iterations, stats.relative_residual,
                         float(flow_res.max()) if flow_res.size else 0.0, wall, stats.converged,
                         flow_res, stats.rhs_norm)
        record.steps.append(rec)
        if on_solve is not None:
            on_solve(rec, system, x)
        if stride and step % stride == 0:
            record.snapshots.append(Snapshot(step, t, U.copy(), P.copy()))
        if on_step is not None:
            on_step(rec)
        if not stats.converged:
            log.warning("step %d (t=%.4g) did not converge: relative residual %.3e after %d "
                        "iterations", step, t, stats.relative_residual, stats.iterations)
            if fail_fast:
                raise DefectiveFlowError(f"GMRES did not converge at step {step} (t = {t:.6g})")
    if not record.snapshots or record.snapshots[-1].step != n_steps:
        t_last = config.end_time if config.steady else n_steps * config.dt
        record.snapshots.append(Snapshot(n_steps, t_last, U.copy(), P.copy()))
    record.velocity, record.pressure, record.multipliers = U, P, lam
    return record
