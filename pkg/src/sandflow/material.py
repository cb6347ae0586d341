"""Support surfaces, the regularized slope-bound operator, and sources.

The slope bound interpolates between the material's critical slope ``k0``
(where the support is buried under at least ``eps`` of sand) and the local
support slope ``k1 = max(k0, |grad w0|)`` (where the support is bare),
linearly over a height band of width ``eps``.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import FieldMismatchError
from .fem import CellField, NodalField, lumped_mass_diag, p0_project, p1_gradient, p1_interpolate


@dataclass
class ModelParams:
    """Physical and regularization parameters of a run."""

    k0: float = 0.4
    eps: float = 0.01
    r: float = 1.0 + 1e-7
    delta: float = 1e-9
    T: float = 0.1
    tau: float = 0.01

    def __post_init__(self):
        if self.k0 <= 0.0:
            raise ValueError("k0 must be positive")
        if self.eps <= 0.0:
            raise ValueError("eps must be positive")
        if not 1.0 < self.r < 2.0:
            raise ValueError("r must lie in (1, 2)")
        if self.delta <= 0.0:
            raise ValueError("delta must be positive")
        if self.tau <= 0.0:
            raise ValueError("tau must be positive")
        if self.T < self.tau:
            raise ValueError("final time must be at least one step")


@dataclass
class SupportSpec:
    """Description of the rigid support surface.

    Kinds: ``flat`` (w0 = 0), ``cone`` (w0 = max(height - |x - center|, 0)),
    ``inverted-pyramid`` (a pit whose faces have unit slope, surrounded by a
    horizontal margin of the given width), or ``expression`` (a NumPy
    expression in ``x`` and ``y``).
    """

    kind: str = "flat"
    center: tuple = (0.0, 0.0)
    height: float = 0.0
    margin: float = 0.1
    expr: str = ""

    @staticmethod
    def flat():
        return SupportSpec("flat")

    @staticmethod
    def cone(center, height):
        return SupportSpec("cone", center=tuple(center), height=float(height))

    @staticmethod
    def inverted_pyramid(margin):
        return SupportSpec("inverted-pyramid", margin=float(margin))

    @staticmethod
    def expression(expr):
        return SupportSpec("expression", expr=expr)


@dataclass
class SourceSpec:
    """Time-constant source: uniform density over a disk (given by its total
    rate) or a constant density over the whole domain."""

    kind: str = "uniform-disk"
    center: tuple = (0.0, 0.0)
    radius: float = 0.2
    rate: float = 1.0

    def __post_init__(self):
        if self.rate < 0.0:
            raise ValueError("source rate must be nonnegative")
        if self.kind not in ("uniform-disk", "constant"):
            raise ValueError(f"unknown source kind {self.kind!r}")
        if self.kind == "uniform-disk" and self.radius <= 0.0:
            raise ValueError("source disk radius must be positive")

    @staticmethod
    def uniform_disk(center, radius, rate):
        return SourceSpec("uniform-disk", tuple(center), float(radius), float(rate))

    @staticmethod
    def constant(rate):
        return SourceSpec("constant", rate=float(rate))


@dataclass
class SupportData:
    """Discrete support surface: nodal interpolant, cell means, and the
    cell slope bound ``max(k0, |grad w0_h|)``."""

    w0_nodal: NodalField
    w0h_cell: CellField
    k1h_cell: CellField


def support_function(spec, mesh=None):
    """Pointwise evaluator of the support surface described by ``spec``."""
    if spec.kind == "flat":
        return lambda x, y: np.zeros_like(np.asarray(x, dtype=float))
    if spec.kind == "cone":
        cx, cy = spec.center
        h = spec.height
        return lambda x, y: np.maximum(h - np.hypot(x - cx, y - cy), 0.0)
    if spec.kind == "inverted-pyramid":
        if mesh is None:
            raise ValueError("pyramid support needs the mesh bounding box")
        ax = np.abs(mesh.vertices[:, 0]).max() - spec.margin
        ay = np.abs(mesh.vertices[:, 1]).max() - spec.margin
        return lambda x, y: np.minimum(
            np.maximum(np.abs(x) - ax, np.abs(y) - ay), 0.0
        )
    if spec.kind == "expression":
        ns = {n: getattr(np, n) for n in (
            "abs", "minimum", "maximum", "hypot", "sqrt", "exp", "sin", "cos", "where",
        )}
        ns["pi"] = math.pi
        code = compile(spec.expr, "<support>", "eval")
        return lambda x, y: np.broadcast_to(
            np.asarray(eval(code, {"__builtins__": {}}, {**ns, "x": x, "y": y}),
                       dtype=float), np.shape(x)).copy()
    raise ValueError(f"unknown support kind {spec.kind!r}")


def build_support(spec, mesh, k0):
    """Discretize a support surface onto a mesh.

    The support must vanish on the domain boundary (open boundary
    condition); a violation beyond 1e-12 is an error. The built-in shapes
    keep the boundary support slope below ``k0`` by construction; for
    expression supports that no-influx condition is the caller's
    responsibility, so a warning is emitted.
    """
    if spec.kind == "expression":
        warnings.warn(
            "expression supports are only checked for w0 = 0 on the "
            "boundary; keep the boundary support slope below k0 to prevent "
            "uncontrolled inflow",
            stacklevel=2,
        )
    f = support_function(spec, mesh)
    w0 = p1_interpolate(f, mesh)
    bnd = mesh.boundary_vertex_flags
    if np.abs(w0.values[bnd]).max(initial=0.0) > 1e-12:
        bad = int(np.flatnonzero(bnd & (np.abs(w0.values) > 1e-12))[0])
        raise ValueError(
            f"support is nonzero at boundary vertex {bad} "
            f"(w0 = {w0.values[bad]:g}); the open boundary condition needs w0 = 0"
        )
    w0.values[bnd] = 0.0
    w0h = p0_project(w0, mesh)
    slopes = np.linalg.norm(p1_gradient(w0).values, axis=1)
    k1h = CellField(np.maximum(k0, slopes), mesh)
    return SupportData(w0, w0h, k1h)


def m_eps_point(eta, w0eps, k1, k0, eps):
    """Regularized slope bound at a point (vectorizes over NumPy arrays).

    Equals ``k0`` when the surface sits at least ``eps`` above the support,
    ``k1`` when at or below it, with a linear ramp in between.
    """
    band = np.minimum(np.maximum(w0eps + eps - eta, 0.0), eps)
    return k0 + (np.asarray(k1) - k0) / eps * band


def m_eps_h(etah, support, params):
    """Cellwise slope bound for a piecewise-constant surface."""
    if etah.mesh is not support.w0h_cell.mesh:
        raise FieldMismatchError("surface and support live on different meshes")
    vals = m_eps_point(
        etah.values,
        support.w0h_cell.values,
        support.k1h_cell.values,
        params.k0,
        params.eps,
    )
    return CellField(vals, etah.mesh)


def source_field_cells(spec, mesh):
    """Piecewise-constant source density.

    For a disk source, cells are selected by the centroid-in-disk test and
    the values rescaled so the mesh integral equals the total rate exactly.
    """
    if spec.kind == "constant":
        return CellField(np.full(mesh.n_triangles, spec.rate), mesh)
    cx, cy = spec.center
    inside = (
        np.hypot(mesh.centroids[:, 0] - cx, mesh.centroids[:, 1] - cy)
        <= spec.radius
    )
    covered = mesh.areas[inside].sum()
    if covered <= 0.0:
        raise ValueError("source disk does not cover any cell centroid")
    vals = np.where(inside, spec.rate / covered, 0.0)
    return CellField(vals, mesh)


def source_field_nodes(spec, mesh):
    """Nodal source density, rescaled like :func:`source_field_cells` but
    with the vertex-quadrature integral."""
    if spec.kind == "constant":
        return NodalField(np.full(mesh.n_vertices, spec.rate), mesh)
    cx, cy = spec.center
    inside = (
        np.hypot(mesh.vertices[:, 0] - cx, mesh.vertices[:, 1] - cy)
        <= spec.radius
    )
    covered = lumped_mass_diag(mesh)[inside].sum()
    if covered <= 0.0:
        raise ValueError("source disk does not cover any vertex")
    vals = np.where(inside, spec.rate / covered, 0.0)
    return NodalField(vals, mesh)
