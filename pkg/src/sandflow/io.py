"""File exports: legacy ASCII VTK unstructured grids, CSV error reports and
radial profiles. All floats are written with 17 significant digits so that
identical runs produce bit-identical files.
"""

import os

import numpy as np

from .fem import CellField, CellVectorField, EdgeFluxField, NodalField, rt0_centroid_values


def _fmt(x):
    return f"{x:.17g}"


def export_vtk(mesh, fields, path, title="sandflow"):
    """Write a legacy ASCII VTK unstructured grid.

    ``fields`` maps names to NodalField (point scalars), CellField (cell
    scalars), CellVectorField or EdgeFluxField (cell vectors; flux fields are
    sampled at element centers, z set to 0).
    """
    point_scalars = {}
    cell_scalars = {}
    cell_vectors = {}
    for name, f in fields.items():
        if isinstance(f, NodalField):
            point_scalars[name] = f.values
        elif isinstance(f, CellField):
            cell_scalars[name] = f.values
        elif isinstance(f, CellVectorField):
            cell_vectors[name] = f.values
        elif isinstance(f, EdgeFluxField):
            cell_vectors[name] = rt0_centroid_values(f)
        else:
            raise TypeError(f"field {name!r} has unsupported type {type(f).__name__}")

    with open(path, "w") as out:
        out.write("# vtk DataFile Version 3.0\n")
        out.write(f"{title}\n")
        out.write("ASCII\n")
        out.write("DATASET UNSTRUCTURED_GRID\n")
        out.write(f"POINTS {mesh.n_vertices} double\n")
        for x, y in mesh.vertices:
            out.write(f"{_fmt(x)} {_fmt(y)} 0\n")
        nt = mesh.n_triangles
        out.write(f"CELLS {nt} {4 * nt}\n")
        for a, b, c in mesh.triangles:
            out.write(f"3 {a} {b} {c}\n")
        out.write(f"CELL_TYPES {nt}\n")
        out.write("5\n" * nt)
        if point_scalars:
            out.write(f"POINT_DATA {mesh.n_vertices}\n")
            for name, values in point_scalars.items():
                out.write(f"SCALARS {name} double\nLOOKUP_TABLE default\n")
                out.write("\n".join(_fmt(v) for v in values) + "\n")
        if cell_scalars or cell_vectors:
            out.write(f"CELL_DATA {nt}\n")
            for name, values in cell_scalars.items():
                out.write(f"SCALARS {name} double\nLOOKUP_TABLE default\n")
                out.write("\n".join(_fmt(v) for v in values) + "\n")
            for name, vec in cell_vectors.items():
                out.write(f"VECTORS {name} double\n")
                for vx, vy in vec:
                    out.write(f"{_fmt(vx)} {_fmt(vy)} 0\n")


def export_csv(table, path):
    """Write a CSV table given as a list of (column name, values) pairs;
    empty tables produce a header-only file."""
    with open(path, "w") as out:
        out.write(",".join(name for name, _ in table) + "\n")
        if not table:
            return
        n = len(table[0][1])
        for i in range(n):
            out.write(
                ",".join(
                    _fmt(col[i]) if col[i] is not None else "" for _, col in table
                )
                + "\n"
            )


def report_table(report):
    """Tabulate an error report (one row per snapshot)."""
    rows = report.rows
    return [
        ("t", [r.t for r in rows]),
        ("surface_rel_l1_err", [r.surface_err for r in rows]),
        ("flux_rel_l1_err", [r.flux_err for r in rows]),
        ("iterations", [float(r.iterations) for r in rows]),
        ("wall_time_s", [report.wall_time_s for _ in rows]),
    ]


def surface_profile_table(w, surface_fn):
    """Radial surface profile at the field's natural sample points
    (vertices for nodal fields, centroids for cell fields), sorted by R."""
    mesh = w.mesh
    pts = mesh.vertices if isinstance(w, NodalField) else mesh.centroids
    r = np.hypot(pts[:, 0], pts[:, 1])
    order = np.argsort(r, kind="stable")
    exact = np.asarray(surface_fn(pts[:, 0], pts[:, 1]), dtype=float)
    return [
        ("R", r[order]),
        ("w_exact", exact[order]),
        ("w_numeric", w.values[order]),
    ]


def flux_profile_table(q, flux_fn):
    """Radial flux-magnitude profile at element centers, sorted by R."""
    mesh = q.mesh
    vals = rt0_centroid_values(q) if isinstance(q, EdgeFluxField) else q.values
    pts = mesh.centroids
    r = np.hypot(pts[:, 0], pts[:, 1])
    order = np.argsort(r, kind="stable")
    qx, qy = flux_fn(pts[:, 0], pts[:, 1])
    exact = np.hypot(np.asarray(qx, dtype=float), np.asarray(qy, dtype=float))
    return [
        ("R", r[order]),
        ("q_exact", exact[order]),
        ("q_numeric", np.linalg.norm(vals, axis=1)[order]),
    ]


def write_outputs(result, out_dir):
    """Write the outputs requested by a scenario config."""
    from .scenarios import _reference_functions

    os.makedirs(out_dir, exist_ok=True)
    cfg = result.config
    sid = cfg.scenario_id
    if "csv" in cfg.outputs:
        export_csv(report_table(result.report), os.path.join(out_dir, f"{sid}_report.csv"))
    for t in cfg.snapshot_times:
        tn, w, q = result.trajectory.at_time(t)
        tag = f"{tn:g}".replace(".", "p")
        if "csv" in cfg.outputs and cfg.analytic:
            try:
                surface_fn, flux_fn = _reference_functions(cfg, tn)
                export_csv(
                    surface_profile_table(w, surface_fn),
                    os.path.join(out_dir, f"{sid}_t{tag}_surface.csv"),
                )
                export_csv(
                    flux_profile_table(q, flux_fn),
                    os.path.join(out_dir, f"{sid}_t{tag}_flux.csv"),
                )
            except Exception:
                pass  # out-of-regime snapshots simply get no profile
        if "vtk" in cfg.outputs:
            fields = {"surface": w, "flux": q}
            if isinstance(q, EdgeFluxField):
                fields["flux_magnitude"] = CellField(
                    np.linalg.norm(rt0_centroid_values(q), axis=1), result.mesh
                )
            else:
                fields["flux_magnitude"] = CellField(
                    np.linalg.norm(q.values, axis=1), result.mesh
                )
            fields["support"] = result.support.w0_nodal
            export_vtk(
                result.mesh, fields, os.path.join(out_dir, f"{sid}_t{tag}.vtk"),
                title=f"{sid} t={tn:g}",
            )
