"""Command line interface.

Subcommands: ``run`` (full scenario with outputs), ``compare`` (errors
only), ``mesh-info``, ``analytic`` (reference profiles as CSV), ``list``
(built-in scenarios). Exit codes: 0 ok, 2 config error, 3 non-convergence,
4 I/O error.
"""

import argparse
import sys

import numpy as np

from . import analytic
from .errors import ConfigError, ConvergenceError
from .mesh import build_edge_topology, mesh_quality
from .scenarios import BUILTIN_SCENARIOS, build_mesh, load_scenario, run_scenario


def _print_report(report):
    print(f"scenario {report.scenario_id}: wall time {report.wall_time_s:.2f} s")
    for row in report.rows:
        parts = [f"t = {row.t:g}"]
        if row.surface_err is not None:
            parts.append(f"surface rel-L1 error {100 * row.surface_err:.3f}%")
        if row.flux_err is not None:
            parts.append(f"flux rel-L1 error {100 * row.flux_err:.3f}%")
        parts.append(f"{row.iterations} iterations")
        print("  " + ", ".join(parts))


def _run_one(name, out):
    cfg = load_scenario(name)
    return run_scenario(cfg, out_dir=out).report


def _cmd_run(args):
    if args.sweep and len(args.config) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = [pool.submit(_run_one, n, args.out) for n in args.config]
            for fut in futures:
                _print_report(fut.result())
        return 0
    for name in args.config:
        _print_report(_run_one(name, args.out))
    return 0


def _cmd_compare(args):
    cfg = load_scenario(args.config)
    result = run_scenario(cfg, out_dir=None)
    _print_report(result.report)
    return 0


def _cmd_mesh_info(args):
    cfg = load_scenario(args.config)
    mesh = build_mesh(cfg)
    topo = build_edge_topology(mesh)
    q = mesh_quality(mesh)
    print(f"vertices:  {mesh.n_vertices}")
    print(f"triangles: {mesh.n_triangles}")
    print(f"edges:     {topo.n_edges} ({int(topo.boundary_edge_flags.sum())} boundary)")
    print(f"area:      {mesh.total_area():.6f}")
    print(f"h_max:     {q['h_max']:.6f}")
    print(f"h_min:     {q['h_min']:.6f}")
    print(f"regularity: {q['regularity']:.3f}")
    return 0


def _cmd_analytic(args):
    rs = np.linspace(0.0, args.rmax, args.samples)
    if args.which == "ex1":
        w = analytic.ex1_surface(args.t, rs)
        q = analytic.ex1_flux(args.t, rs)
    else:
        w = analytic.ex3_surface(args.t, rs)
        q = analytic.ex3_flux(args.t, rs)
    lines = ["R,w,q"]
    lines += [f"{r:.17g},{wi:.17g},{qi:.17g}" for r, wi, qi in zip(rs, w, q)]
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_list(args):
    for name in sorted(BUILTIN_SCENARIOS):
        print(name)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sandflow",
        description="Finite-element simulation of growing sandpiles",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run scenarios and write outputs")
    p_run.add_argument("config", nargs="+", help="config file or built-in name")
    p_run.add_argument("--out", default="out", help="output directory")
    p_run.add_argument(
        "--sweep", action="store_true",
        help="run multiple configs on a process pool",
    )
    p_run.add_argument("--jobs", type=int, default=None, help="pool size for --sweep")
    p_run.set_defaults(func=_cmd_run)

    p_cmp = sub.add_parser("compare", help="run a scenario, print errors only")
    p_cmp.add_argument("config")
    p_cmp.set_defaults(func=_cmd_compare)

    p_mesh = sub.add_parser("mesh-info", help="mesh statistics for a scenario")
    p_mesh.add_argument("config")
    p_mesh.set_defaults(func=_cmd_mesh_info)

    p_an = sub.add_parser("analytic", help="reference solution profiles as CSV")
    p_an.add_argument("which", choices=("ex1", "ex3"))
    p_an.add_argument("--t", type=float, required=True)
    p_an.add_argument("--samples", type=int, default=200)
    p_an.add_argument("--rmax", type=float, default=1.0)
    p_an.add_argument("--out", default="")
    p_an.set_defaults(func=_cmd_analytic)

    p_list = sub.add_parser("list", help="list built-in scenarios")
    p_list.set_defaults(func=_cmd_list)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except ConvergenceError as err:
        step = f" at step {err.step}" if err.step is not None else ""
        print(f"non-convergence{step}: {err}", file=sys.stderr)
        return 3
    except OSError as err:
        print(f"I/O error: {err}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
