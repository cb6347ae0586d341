"""Scenario configuration, the built-in experiment registry, and the
end-to-end run driver with error reporting.

Configs are flat ``key = value`` text with dotted sections; the built-in
scenarios reproduce the reference experiments (flat disk, cone on a square,
cone on a disk, inverted pyramid) in both solver variants where applicable.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import analytic
from .errors import ConfigError
from .linalg import SolveOptions
from .material import ModelParams, SourceSpec, SupportSpec, build_support, source_field_cells, source_field_nodes
from .mesh import build_edge_topology, generate_disk_mesh, generate_square_mesh, load_mesh
from .solver_a import StoppingParamsA, run_qa
from .solver_b import StoppingParamsB, run_qb


@dataclass
class DomainSpec:
    kind: str = "disk"
    radius: float = 1.0
    xmin: float = -1.0
    xmax: float = 1.0
    ymin: float = -1.0
    ymax: float = 1.0


@dataclass
class ScenarioConfig:
    scenario_id: str
    domain: DomainSpec
    support: SupportSpec
    source: SourceSpec
    params: ModelParams
    solver_kind: str
    mesh_h: float = 0.0
    mesh_file: str = ""
    rho: float = 1.0
    stopping_a: StoppingParamsA = field(default_factory=StoppingParamsA)
    stopping_b: StoppingParamsB = field(default_factory=StoppingParamsB)
    solve_method: str = ""
    analytic: str = ""
    outputs: tuple = ()
    snapshot_times: tuple = ()


@dataclass
class SnapshotErrors:
    t: float
    surface_err: float | None
    flux_err: float | None
    iterations: int


@dataclass
class ErrorReport:
    scenario_id: str
    rows: list
    wall_time_s: float = 0.0


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    mesh: object
    topo: object
    support: object
    trajectory: object
    report: ErrorReport


def _parse_float(key, raw):
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"key {key!r}: expected a number, got {raw!r}") from None


def _parse_floats(key, raw):
    try:
        return tuple(float(p) for p in raw.split())
    except ValueError:
        raise ConfigError(f"key {key!r}: expected numbers, got {raw!r}") from None


def _parse_pairs(text):
    pairs = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = body.split("=", 1)
        pairs.append((key.strip(), raw.strip()))
    return dict(pairs)


_KNOWN_KEYS = {
    "scenario.id",
    "domain.kind", "domain.radius", "domain.xmin", "domain.xmax",
    "domain.ymin", "domain.ymax",
    "mesh.h", "mesh.file",
    "support.kind", "support.center", "support.height", "support.margin",
    "support.expr",
    "source.kind", "source.center", "source.radius", "source.rate",
    "params.k0", "params.eps", "params.r", "params.delta", "params.T",
    "params.tau",
    "solver.kind", "solver.rho", "solver.tol_w", "solver.tol_phi",
    "solver.tol_q", "solver.max_iters", "solver.method", "solver.strict",
    "analytic", "outputs", "snapshot_times",
}


def parse_scenario_text(text, scenario_id="scenario"):
    """Parse a config from its text form, filling defaults and validating
    every invariant. Unknown or missing keys raise :class:`ConfigError`
    naming the key."""
    kv = _parse_pairs(text)
    unknown = set(kv) - _KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown key {sorted(unknown)[0]!r}")

    def need(key):
        if key not in kv:
            raise ConfigError(f"missing required key {key!r}")
        return kv[key]

    def get_float(key, default=None):
        if key not in kv:
            if default is None:
                raise ConfigError(f"missing required key {key!r}")
            return default
        return _parse_float(key, kv[key])

    domain_kind = need("domain.kind")
    if domain_kind == "disk":
        domain = DomainSpec("disk", radius=get_float("domain.radius", 1.0))
    elif domain_kind == "square":
        domain = DomainSpec(
            "square",
            xmin=get_float("domain.xmin", -1.0),
            xmax=get_float("domain.xmax", 1.0),
            ymin=get_float("domain.ymin", -1.0),
            ymax=get_float("domain.ymax", 1.0),
        )
    else:
        raise ConfigError(f"key 'domain.kind': unknown domain {domain_kind!r}")

    mesh_h = get_float("mesh.h", 0.0) if "mesh.h" in kv else 0.0
    mesh_file = kv.get("mesh.file", "")
    if not mesh_file and mesh_h <= 0.0:
        raise ConfigError("one of 'mesh.h' or 'mesh.file' is required")

    support_kind = kv.get("support.kind", "flat")
    if support_kind == "flat":
        support = SupportSpec.flat()
    elif support_kind == "cone":
        center = _parse_floats("support.center", kv.get("support.center", "0 0"))
        if len(center) != 2:
            raise ConfigError("key 'support.center': expected two numbers")
        support = SupportSpec.cone(center, get_float("support.height"))
    elif support_kind == "inverted-pyramid":
        support = SupportSpec.inverted_pyramid(get_float("support.margin", 0.1))
    elif support_kind == "expression":
        if "support.expr" not in kv:
            raise ConfigError("missing required key 'support.expr'")
        support = SupportSpec.expression(kv["support.expr"])
    else:
        raise ConfigError(f"key 'support.kind': unknown support {support_kind!r}")

    source_kind = kv.get("source.kind", "constant")
    try:
        if source_kind == "uniform-disk":
            center = _parse_floats("source.center", kv.get("source.center", "0 0"))
            if len(center) != 2:
                raise ConfigError("key 'source.center': expected two numbers")
            source = SourceSpec.uniform_disk(
                center, get_float("source.radius"), get_float("source.rate")
            )
        elif source_kind == "constant":
            source = SourceSpec.constant(get_float("source.rate"))
        else:
            raise ConfigError(f"key 'source.kind': unknown source {source_kind!r}")
        params = ModelParams(
            k0=get_float("params.k0", 0.4),
            eps=get_float("params.eps", 0.01),
            r=get_float("params.r", 1.0 + 1e-7),
            delta=get_float("params.delta", 1e-9),
            T=get_float("params.T"),
            tau=get_float("params.tau"),
        )
    except ValueError as err:
        raise ConfigError(str(err)) from None

    solver_kind = need("solver.kind").upper()
    if solver_kind not in ("A", "B"):
        raise ConfigError(f"key 'solver.kind': expected A or B, got {solver_kind!r}")
    rho_default = 1.0 if support.kind == "flat" else 0.05
    rho = get_float("solver.rho", rho_default)
    if rho <= 0.0:
        raise ConfigError("key 'solver.rho': must be positive")

    strict_raw = kv.get("solver.strict", "false").lower()
    if strict_raw not in ("true", "false"):
        raise ConfigError("key 'solver.strict': expected true or false")
    max_iters = kv.get("solver.max_iters")
    try:
        stopping_a = StoppingParamsA(
            tol_w=get_float("solver.tol_w", 1e-6),
            tol_phi=get_float("solver.tol_phi", 5e-4),
            max_iters=int(max_iters) if max_iters else 5000,
            strict_invariants=strict_raw == "true",
        )
        stopping_b = StoppingParamsB(
            tol=get_float("solver.tol_q", 3e-4),
            max_iters=int(max_iters) if max_iters else 500,
        )
    except ValueError as err:
        raise ConfigError(str(err)) from None

    method = kv.get("solver.method", "")
    if method:
        try:
            SolveOptions(method=method)
        except ValueError as err:
            raise ConfigError(f"key 'solver.method': {err}") from None

    analytic_kind = kv.get("analytic", "none")
    if analytic_kind not in ("ex1", "ex3", "none"):
        raise ConfigError(f"key 'analytic': unknown reference {analytic_kind!r}")

    outputs_raw = kv.get("outputs", "none")
    if outputs_raw == "none":
        outputs = ()
    else:
        outputs = tuple(p.strip() for p in outputs_raw.split(",") if p.strip())
        bad = set(outputs) - {"csv", "vtk"}
        if bad:
            raise ConfigError(f"key 'outputs': unknown output {sorted(bad)[0]!r}")

    if "snapshot_times" in kv:
        snaps = _parse_floats("snapshot_times", kv["snapshot_times"])
    else:
        snaps = (params.T,)
    for t in snaps:
        k = round(t / params.tau)
        if abs(t - k * params.tau) > 1e-12 * max(1.0, abs(t)) or k < 1:
            raise ConfigError(
                f"key 'snapshot_times': {t!r} is not a positive multiple of tau"
            )

    return ScenarioConfig(
        scenario_id=kv.get("scenario.id", scenario_id),
        domain=domain,
        support=support,
        source=source,
        params=params,
        solver_kind=solver_kind,
        mesh_h=mesh_h,
        mesh_file=mesh_file,
        rho=rho,
        stopping_a=stopping_a,
        stopping_b=stopping_b,
        solve_method=method,
        analytic="" if analytic_kind == "none" else analytic_kind,
        outputs=outputs,
        snapshot_times=snaps,
    )


def parse_scenario(path):
    """Parse a config file; the scenario id defaults to the file stem."""
    import pathlib

    p = pathlib.Path(path)
    try:
        text = p.read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config {path!r}: {err}") from None
    return parse_scenario_text(text, scenario_id=p.stem)


def canonical_text(cfg):
    """Emit a config as canonical text; parsing it reproduces the config."""
    lines = [f"scenario.id = {cfg.scenario_id}"]
    d = cfg.domain
    lines.append(f"domain.kind = {d.kind}")
    if d.kind == "disk":
        lines.append(f"domain.radius = {d.radius:.17g}")
    else:
        for k in ("xmin", "xmax", "ymin", "ymax"):
            lines.append(f"domain.{k} = {getattr(d, k):.17g}")
    if cfg.mesh_file:
        lines.append(f"mesh.file = {cfg.mesh_file}")
    else:
        lines.append(f"mesh.h = {cfg.mesh_h:.17g}")
    s = cfg.support
    lines.append(f"support.kind = {s.kind}")
    if s.kind == "cone":
        lines.append(f"support.center = {s.center[0]:.17g} {s.center[1]:.17g}")
        lines.append(f"support.height = {s.height:.17g}")
    elif s.kind == "inverted-pyramid":
        lines.append(f"support.margin = {s.margin:.17g}")
    elif s.kind == "expression":
        lines.append(f"support.expr = {s.expr}")
    src = cfg.source
    lines.append(f"source.kind = {src.kind}")
    if src.kind == "uniform-disk":
        lines.append(f"source.center = {src.center[0]:.17g} {src.center[1]:.17g}")
        lines.append(f"source.radius = {src.radius:.17g}")
    lines.append(f"source.rate = {src.rate:.17g}")
    p = cfg.params
    for k in ("k0", "eps", "r", "delta", "T", "tau"):
        lines.append(f"params.{k} = {getattr(p, k):.17g}")
    lines.append(f"solver.kind = {cfg.solver_kind}")
    lines.append(f"solver.rho = {cfg.rho:.17g}")
    lines.append(f"solver.tol_w = {cfg.stopping_a.tol_w:.17g}")
    lines.append(f"solver.tol_phi = {cfg.stopping_a.tol_phi:.17g}")
    lines.append(f"solver.tol_q = {cfg.stopping_b.tol:.17g}")
    if (cfg.stopping_a.max_iters, cfg.stopping_b.max_iters) != (5000, 500):
        lines.append(f"solver.max_iters = {cfg.stopping_b.max_iters}")
    lines.append(f"solver.strict = {'true' if cfg.stopping_a.strict_invariants else 'false'}")
    if cfg.solve_method:
        lines.append(f"solver.method = {cfg.solve_method}")
    lines.append(f"analytic = {cfg.analytic or 'none'}")
    lines.append(f"outputs = {','.join(cfg.outputs) if cfg.outputs else 'none'}")
    lines.append(
        "snapshot_times = " + " ".join(f"{t:.17g}" for t in cfg.snapshot_times)
    )
    return "\n".join(lines) + "\n"


def build_mesh(cfg):
    if cfg.mesh_file:
        return load_mesh(cfg.mesh_file)
    d = cfg.domain
    if d.kind == "disk":
        return generate_disk_mesh(d.radius, cfg.mesh_h)
    return generate_square_mesh(d.xmin, d.xmax, d.ymin, d.ymax, cfg.mesh_h)


def _reference_functions(cfg, t):
    """Surface and flux reference callables for a snapshot, or Nones."""
    k0 = cfg.params.k0
    src = cfg.source
    if cfg.analytic == "ex1":
        surf = analytic.ex1_surface
        flux = analytic.ex1_flux
        kw = dict(k0=k0, R0=src.radius, rate=src.rate)
        surface_fn = lambda x, y: surf(t, np.hypot(x, y), **kw)  # noqa: E731
        flux_fn = analytic.radial_vector_field(lambda R: flux(t, R, **kw))
        return surface_fn, flux_fn
    if cfg.analytic == "ex3":
        cone = cfg.support.height
        kw = dict(k0=k0, cone_radius=cone, rate=src.rate)
        surface_fn = lambda x, y: analytic.ex3_surface(t, np.hypot(x, y), **kw)  # noqa: E731
        flux_fn = analytic.radial_vector_field(
            lambda R: analytic.ex3_flux(t, R, R0=src.radius, **kw)
        )
        return surface_fn, flux_fn
    return None, None


def run_scenario(cfg, out_dir=None):
    """Build everything from a config, run the selected solver, compute the
    error report, and write any requested outputs."""
    mesh = build_mesh(cfg)
    support = build_support(cfg.support, mesh, cfg.params.k0)
    topo = build_edge_topology(mesh) if cfg.solver_kind == "B" else None
    solve_options = SolveOptions(method=cfg.solve_method) if cfg.solve_method else None

    start = time.perf_counter()
    if cfg.solver_kind == "A":
        f_nodal = source_field_nodes(cfg.source, mesh)
        traj = run_qa(
            mesh, support, f_nodal, cfg.params, cfg.rho,
            stopping=cfg.stopping_a, solve_options=solve_options,
        )
    else:
        f_cells = source_field_cells(cfg.source, mesh)
        traj = run_qb(
            mesh, topo, support, f_cells, cfg.params,
            stopping=cfg.stopping_b, solve_options=solve_options,
        )
    wall = time.perf_counter() - start

    rows = []
    iters = np.cumsum(traj.iteration_counts())
    for t in cfg.snapshot_times:
        tn, w, q = traj.at_time(t)
        step = round(tn / cfg.params.tau)
        surface_err = flux_err = None
        try:
            surface_fn, flux_fn = _reference_functions(cfg, tn)
            if surface_fn is not None:
                surface_err = analytic.rel_l1_error_surface(w, surface_fn, mesh)
                flux_err = analytic.rel_l1_error_flux(q, flux_fn, mesh)
        except analytic.OutOfRegimeError:
            pass
        rows.append(SnapshotErrors(tn, surface_err, flux_err, int(iters[step - 1])))
    report = ErrorReport(cfg.scenario_id, rows, wall_time_s=wall)

    result = ScenarioResult(cfg, mesh, topo, support, traj, report)
    if out_dir is not None and cfg.outputs:
        from . import io

        io.write_outputs(result, out_dir)
    return result


_EX1_COMMON = """
domain.kind = disk
domain.radius = 1
support.kind = flat
source.kind = uniform-disk
source.center = 0 0
source.radius = 0.2
source.rate = 1
params.k0 = 0.4
params.eps = 0.01
params.T = 0.1
analytic = ex1
"""

_EX2_COMMON = """
domain.kind = square
domain.xmin = -1
domain.xmax = 1
domain.ymin = -1
domain.ymax = 1
mesh.h = 0.02
support.kind = cone
support.center = 0.3 0
support.height = 0.5
source.kind = uniform-disk
source.center = 0 0
source.radius = 0.7
source.rate = 1
params.k0 = 0.4
params.eps = 0.01
params.T = 0.1
params.tau = 0.005
"""

_EX3_COMMON = """
domain.kind = disk
domain.radius = 1
support.kind = cone
support.center = 0 0
support.height = 0.4
source.kind = uniform-disk
source.center = 0 0
source.radius = 0.2
source.rate = 1
params.k0 = 0.4
params.eps = 0.005
params.T = 0.1
params.tau = 0.0005
analytic = ex3
"""

_EX4 = """
domain.kind = square
domain.xmin = -1
domain.xmax = 1
domain.ymin = -1
domain.ymax = 1
mesh.h = 0.02
support.kind = inverted-pyramid
support.margin = 0.1
source.kind = constant
source.rate = 0.25
params.k0 = 0.4
params.eps = 0.02
params.T = 0.075
params.tau = 0.0025
solver.kind = B
solver.max_iters = 4000
# the developed pit-drainage flux makes the Jacobi-CG conditioning poor;
# the factorization is cheaper per iteration here
solver.method = direct-cholesky
"""

BUILTIN_SCENARIOS = {
    "ex1-qa-h01": _EX1_COMMON + "mesh.h = 0.01\nparams.tau = 0.01\nsolver.kind = A\nsolver.rho = 1\n",
    "ex1-qa-h02": _EX1_COMMON + "mesh.h = 0.02\nparams.tau = 0.01\nsolver.kind = A\nsolver.rho = 1\n",
    "ex1-qa-h04": _EX1_COMMON + "mesh.h = 0.04\nparams.tau = 0.01\nsolver.kind = A\nsolver.rho = 1\n",
    # the published increment threshold 3e-4 stops inside transient plateaus
    # of the flux iteration on these meshes and inflates the flux error from
    # ~6.5% to ~11%; 1e-5 converges each step properly at ~3x the iterations
    "ex1-qb-h02": _EX1_COMMON
    + "mesh.h = 0.02\nparams.tau = 0.005\nsolver.kind = B\nsolver.tol_q = 1e-5\n"
    + "solver.max_iters = 2000\n",
    "ex1-qb-h04": _EX1_COMMON
    + "mesh.h = 0.04\nparams.tau = 0.005\nsolver.kind = B\nsolver.tol_q = 1e-5\n"
    + "solver.max_iters = 2000\n",
    "ex2-qa": _EX2_COMMON + "solver.kind = A\nsolver.rho = 0.05\n",
    "ex2-qb": _EX2_COMMON + "solver.kind = B\nsolver.max_iters = 2000\n",
    "ex3-qb-h02": _EX3_COMMON + "mesh.h = 0.02\nsolver.kind = B\nsolver.max_iters = 1000\n",
    "ex3-qb-h04": _EX3_COMMON + "mesh.h = 0.04\nsolver.kind = B\nsolver.max_iters = 1000\n",
    "ex4-pyramid": _EX4,
}


def builtin_scenario(name):
    """Parse a named built-in scenario config."""
    if name not in BUILTIN_SCENARIOS:
        raise ConfigError(f"unknown built-in scenario {name!r}")
    return parse_scenario_text(BUILTIN_SCENARIOS[name], scenario_id=name)


def load_scenario(name_or_path):
    """Resolve a CLI argument: built-in name first, then file path."""
    if name_or_path in BUILTIN_SCENARIOS:
        return builtin_scenario(name_or_path)
    return parse_scenario(name_or_path)
