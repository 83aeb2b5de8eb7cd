"""CSV and legacy-VTK writers."""

import csv
from pathlib import Path

import numpy as np

from ..exceptions import DefectiveFlowError, ShapeError

CSV_HEADER = ("step", "time", "variant", "iterations", "true_residual", "flow_residual_max",
              "wall_seconds")
M_SCALING_HEADER = ("m", "variant", "mean_iterations", "max_iterations", "wall_seconds")


class OutputError(DefectiveFlowError, OSError):
    pass


def _open(path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return path.open("w", newline="")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from exc


def export_csv(record, path):
    """Per-step statistics of a run; ``record=None`` writes the header only."""
    steps = [] if record is None else record.steps
    with _open(path) as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for s in steps:
            w.writerow([s.step, repr(float(s.time)), s.variant, s.iterations,
                        f"{s.true_residual:.6e}", f"{s.flow_residual_max:.6e}",
                        f"{s.wall_seconds:.6f}"])
    return Path(path)


def export_table(rows, path, header=M_SCALING_HEADER):
    with _open(path) as fh:
        w = csv.DictWriter(fh, fieldnames=header, extrasaction="ignore")
        w.writeheader()
        for row in rows:
            w.writerow(row)
    return Path(path)


def export_vtk(mesh, fields, path, title="defective-flow"):
    """Legacy ASCII VTK 2.0 unstructured grid of triangles.

    ``fields`` maps names to nodal arrays: ``(n_nodes,)`` arrays become
    scalars and ``(2 n_nodes,)`` component-blocked arrays become vectors.
    """
    n = mesh.n_nodes
    tri = mesh.triangles
    with _open(path) as fh:
        fh.write(f"# vtk DataFile Version 2.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {n} double\n")
        for x, y in mesh.points:
            fh.write(f"{x:.17g} {y:.17g} 0\n")
        fh.write(f"CELLS {len(tri)} {4 * len(tri)}\n")
        for a, b, c in tri:
            fh.write(f"3 {a} {b} {c}\n")
        fh.write(f"CELL_TYPES {len(tri)}\n")
        fh.write("5\n" * len(tri))
        if fields:
            fh.write(f"POINT_DATA {n}\n")
        for name, values in fields.items():
            values = np.asarray(values, dtype=np.float64)
            if values.shape == (2 * n,):
                fh.write(f"VECTORS {name} double\n")
                for ux, uy in values.reshape(2, n).T:
                    fh.write(f"{ux:.17g} {uy:.17g} 0\n")
            elif values.shape == (n,):
                fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                fh.write("".join(f"{v:.17g}\n" for v in values))
            else:
                raise ShapeError(f"field {name!r} has shape {values.shape}; "
                                 f"expected ({n},) or ({2 * n},)")
    return Path(path)


def export_snapshots(record, out_dir, stem):
    """One VTK file per stored snapshot."""
    paths = []
    for snap in record.snapshots:
        p = Path(out_dir) / f"{stem}_{snap.step:05d}.vtk"
        paths.append(export_vtk(record.mesh, {"velocity": snap.velocity,
                                              "pressure": snap.pressure}, p))
    return paths
