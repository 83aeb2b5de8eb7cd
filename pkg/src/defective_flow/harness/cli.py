"""``defective-flow`` command line entry point."""

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

from ..exceptions import DefectiveFlowError
from ..precond import PRECONDITIONERS
from .config import ExperimentConfig
from .experiments import run_m_scaling, run_verification_suite, run_womersley_comparison
from .io import export_csv, export_snapshots, export_table
from .timeloop import run_timeloop

THREADS_ENV = "DEFECTIVE_FLOW_THREADS"
log = logging.getLogger("defective_flow")


def _parser():
    p = argparse.ArgumentParser(prog="defective-flow",
                                description="Flow-rate constrained Navier-Stokes solver harness.")
    p.add_argument("-v", "--verbose", action="store_true", help="log every time step")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the experiment described by a config file")
    run.add_argument("config")
    run.add_argument("--out", help="output directory (overrides the config)")
    run.add_argument("--precond", choices=PRECONDITIONERS)
    run.add_argument("--inner", help="inner solver: direct, ilu0, jacobi:k or chebyshev:k")
    run.add_argument("--fail-fast", action="store_true",
                     help="stop at the first time step GMRES fails to converge")
    ver = sub.add_parser("verify", help="run the preconditioner verification suite")
    ver.add_argument("config")
    return p


def _apply_overrides(cfg, args):
    changes = {}
    if getattr(args, "out", None):
        changes["out_dir"] = args.out
    if getattr(args, "inner", None):
        # an explicit --inner applies to every inner solve
        changes.update(inner=args.inner, inner_schur=args.inner)
    if getattr(args, "fail_fast", False):
        changes["fail_fast"] = True
    return dataclasses.replace(cfg, **changes) if changes else cfg


def _finish(report, out_dir):
    print(report.summary())
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    payload = {"experiment": report.name, "passed": report.passed, "failed": report.failed,
               "checks": [dataclasses.asdict(c) for c in report.checks]}
    (out / f"{report.name}_report.json").write_text(json.dumps(payload, indent=2))
    if not report.passed:
        print(f"FAILED checks: {', '.join(report.failed)}", file=sys.stderr)
    return 0 if report.passed else 1


def cmd_run(cfg, args):
    precond = args.precond
    out = Path(cfg.out_dir)
    if cfg.kind == "verify":
        return _finish(run_verification_suite(cfg), out)
    if cfg.kind == "m_scaling":
        report = run_m_scaling(cfg, precond=precond, on_run=lambda r: log.info(
            "m=%d %s: mean %.1f, max %d iterations", r["m"], r["variant"],
            r["mean_iterations"], r["max_iterations"]))
        export_table(report.data["rows"], out / f"{cfg.name}.csv")
        for (m, v), rec in report.data["records"].items():
            export_csv(rec, out / f"{cfg.name}_m{m}_{v}.csv")
        return _finish(report, out)
    if cfg.kind == "womersley":
        report = run_womersley_comparison(cfg, precond=precond)
        for label, run in report.data["runs"].items():
            export_csv(run["record"], out / f"{cfg.name}_{label}.csv")
            export_snapshots(run["record"], out, f"{cfg.name}_{label}")
        return _finish(report, out)

    record = run_timeloop(cfg, precond=precond)
    export_csv(record, out / f"{cfg.name}.csv")
    export_snapshots(record, out, cfg.name)
    bad = [s.step for s in record.steps if not s.converged]
    if bad:
        print(f"{len(bad)} of {len(record.steps)} steps did not converge (first: {bad[0]})",
              file=sys.stderr)
        return 1
    print(f"{len(record.steps)} steps, mean {record.iterations.mean():.1f} GMRES iterations")
    return 0


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    threads = os.environ.get(THREADS_ENV)
    limiter = None
    if threads:
        from threadpoolctl import threadpool_limits
        limiter = threadpool_limits(int(threads))
    try:
        cfg = _apply_overrides(ExperimentConfig.from_file(args.config), args)
        if args.command == "verify":
            return _finish(run_verification_suite(cfg), cfg.out_dir)
        return cmd_run(cfg, args)
    except DefectiveFlowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    finally:
        if limiter is not None:
            limiter.unregister()


if __name__ == "__main__":
    sys.exit(main())
