#!/usr/bin/env python3
"""Benchmark the compiled kernels against the NumPy fallback.

The two hot per-iteration kernels are the fused local-system build of the
flux solver and the elementwise update of the splitting solver. Run after
installing with the extension built:

    python3 benchmarks/bench_kernels.py [--h 0.02] [--repeats 20]
"""

import argparse
import time

import numpy as np

from sandflow import _kernels_py
from sandflow.mesh import build_edge_topology, generate_disk_mesh

try:
    from sandflow import _kernels

    BACKENDS = [("compiled", _kernels), ("numpy", _kernels_py)]
except ImportError:
    print("compiled extension not available; benchmarking the fallback only")
    BACKENDS = [("numpy", _kernels_py)]


def timeit(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--h", type=float, default=0.02)
    ap.add_argument("--repeats", type=int, default=20)
    args = ap.parse_args()

    mesh = generate_disk_mesh(1.0, args.h)
    topo = build_edge_topology(mesh)
    geom = topo.rt0_geometry
    rng = np.random.default_rng(7)
    coeffs = rng.standard_normal(topo.n_edges) * 0.2
    mcell = rng.uniform(0.4, 1.0, mesh.n_triangles)
    g = rng.uniform(0.0, 0.5, mesh.n_triangles)
    w = rng.standard_normal(mesh.n_vertices)
    qprev = rng.standard_normal((mesh.n_triangles, 2))
    mh = rng.uniform(0.1, 1.0, mesh.n_triangles)

    print(f"mesh: {mesh.n_triangles} triangles, {topo.n_edges} edges (h = {args.h})")
    rows = []
    for label, mod in BACKENDS:
        t_local = timeit(
            lambda: mod.qb_local_system(
                coeffs, topo.tri_edges, geom.psi, mesh.areas, geom.dvec,
                mcell, g, 5e-4, 1e-9, 1.0 + 1e-7,
            ),
            args.repeats,
        )
        t_vals = timeit(
            lambda: mod.rt0_vertex_values(coeffs, topo.tri_edges, geom.psi),
            args.repeats,
        )
        t_alg2 = timeit(
            lambda: mod.alg2_cell_update(
                w, mesh.triangles, mesh.grad_geom, qprev, mh, 1.0
            ),
            args.repeats,
        )
        rows.append((label, t_local, t_vals, t_alg2))
        print(
            f"{label:>9}: qb_local_system {1e3 * t_local:7.2f} ms   "
            f"rt0_vertex_values {1e3 * t_vals:6.2f} ms   "
            f"alg2_cell_update {1e3 * t_alg2:6.2f} ms"
        )
    if len(rows) == 2:
        c, p = rows[0], rows[1]
        print(
            f"  speedup: qb_local_system x{p[1] / c[1]:.1f}, "
            f"rt0_vertex_values x{p[2] / c[2]:.1f}, "
            f"alg2_cell_update x{p[3] / c[3]:.1f}"
        )


if __name__ == "__main__":
    main()
