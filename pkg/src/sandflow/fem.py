"""Finite element spaces and operators on triangulations.

Three scalar/vector spaces are used throughout: continuous piecewise linears
(nodal values), piecewise constants (cell values) and the lowest-order
divergence-conforming flux element (one normal-flux density per edge). This
module holds the field containers, the interpolation/projection operators
between the spaces, vertex-lumped quadrature, and the system assembly for
both time-stepping solvers.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import kernels
from .errors import EvaluationError, FieldMismatchError, NumericalError
from .mesh import EdgeTopology, TriMesh


@dataclass
class NodalField:
    """Continuous piecewise-linear field given by per-vertex values."""

    values: np.ndarray
    mesh: TriMesh

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.mesh.n_vertices,):
            raise FieldMismatchError("nodal value count != vertex count")

    def copy(self):
        return NodalField(self.values.copy(), self.mesh)


@dataclass
class CellField:
    """Piecewise-constant scalar field, one value per triangle."""

    values: np.ndarray
    mesh: TriMesh

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.mesh.n_triangles,):
            raise FieldMismatchError("cell value count != triangle count")

    def copy(self):
        return CellField(self.values.copy(), self.mesh)


@dataclass
class CellVectorField:
    """Piecewise-constant 2-vector field, one vector per triangle."""

    values: np.ndarray
    mesh: TriMesh

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.mesh.n_triangles, 2):
            raise FieldMismatchError("cell vector count != triangle count")

    def copy(self):
        return CellVectorField(self.values.copy(), self.mesh)


@dataclass
class EdgeFluxField:
    """Lowest-order Raviart-Thomas field: normal flux density per edge.

    The represented field is ``a + b x`` per triangle with continuous normal
    component across interior edges; a coefficient is the (constant) normal
    flux density in the direction of the global edge normal.
    """

    coefficients: np.ndarray
    topo: EdgeTopology

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=np.float64)
        if self.coefficients.shape != (self.topo.n_edges,):
            raise FieldMismatchError("coefficient count != edge count")

    @property
    def mesh(self):
        return self.topo.mesh

    def copy(self):
        return EdgeFluxField(self.coefficients.copy(), self.topo)


class RT0Geometry:
    """Precomputed per-triangle data for the edge flux element.

    ``psi[t, l, j]`` is the signed local basis vector of local edge ``l``
    (the edge opposite vertex ``l``) evaluated at local vertex ``j``;
    ``psi_centroid[t, l]`` the same at the centroid; ``dvec[t, l]`` equals
    ``sign * |e|`` so that the elementwise divergence of basis ``l`` is
    ``dvec[t, l] / area[t]``.
    """

    def __init__(self, topo):
        mesh = topo.mesh
        p = mesh.vertices[mesh.triangles]  # (T, 3, 2)
        lengths = topo.edge_lengths[topo.tri_edges]  # (T, 3)
        scale = topo.tri_signs * lengths / (2.0 * mesh.areas[:, None])  # (T, 3)
        # x_j - p_opposite(l), for all (l, j) pairs
        diff = p[:, None, :, :] - p[:, :, None, :]  # (T, l, j, 2)
        self.psi = np.ascontiguousarray(diff * scale[:, :, None, None])
        cdiff = mesh.centroids[:, None, :] - p  # (T, l, 2)
        self.psi_centroid = np.ascontiguousarray(cdiff * scale[:, :, None])
        self.dvec = np.ascontiguousarray(topo.tri_signs * lengths)
        self.rows = np.broadcast_to(
            topo.tri_edges[:, :, None], (mesh.n_triangles, 3, 3)
        ).ravel()
        self.cols = np.broadcast_to(
            topo.tri_edges[:, None, :], (mesh.n_triangles, 3, 3)
        ).ravel()


class SparseSPD:
    """Symmetric positive definite sparse matrix (CSR) with its dimension."""

    def __init__(self, matrix):
        matrix = sp.csr_matrix(matrix)
        scale = np.abs(matrix.data).max(initial=0.0)
        asym = abs(matrix - matrix.T)
        if asym.nnz and asym.data.max() > 1e-12 * max(scale, 1e-300):
            raise NumericalError("matrix is not symmetric to 1e-12 relative")
        self.matrix = matrix
        self.dim = matrix.shape[0]

    def matvec(self, x):
        return self.matrix @ x

    def diagonal(self):
        return self.matrix.diagonal()


def p1_interpolate(f, mesh):
    """Vertex interpolation of a pointwise-evaluable scalar function."""
    x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
    try:
        values = np.asarray(f(x, y), dtype=np.float64)
        if values.shape != x.shape:
            raise TypeError
    except (TypeError, ValueError):
        values = np.array([f(xi, yi) for xi, yi in mesh.vertices], dtype=np.float64)
    if not np.isfinite(values).all():
        bad = int(np.argmax(~np.isfinite(values)))
        raise EvaluationError(
            f"non-finite value at vertex {bad} {tuple(mesh.vertices[bad])}"
        )
    return NodalField(values, mesh)


def p0_project(source, mesh):
    """Elementwise mean: exact for nodal fields, edge-midpoint quadrature
    (exact for quadratics) for general functions."""
    if isinstance(source, NodalField):
        if source.mesh is not mesh:
            raise FieldMismatchError("field lives on a different mesh")
        return CellField(source.values[mesh.triangles].mean(axis=1), mesh)
    p = mesh.vertices[mesh.triangles]
    mids = 0.5 * (p + np.roll(p, -1, axis=1))  # (T, 3, 2)
    try:
        vals = np.asarray(source(mids[:, :, 0], mids[:, :, 1]), dtype=np.float64)
        if vals.shape != mids.shape[:2]:
            raise TypeError
    except (TypeError, ValueError):
        vals = np.array(
            [[source(mx, my) for mx, my in tri_mids] for tri_mids in mids]
        )
    return CellField(vals.mean(axis=1), mesh)


def p1_gradient(w):
    """Constant gradient per triangle of a piecewise-linear field."""
    mesh = w.mesh
    g = np.einsum("tjk,tj->tk", mesh.grad_geom, w.values[mesh.triangles])
    return CellVectorField(g, mesh)


def rt0_interpolate(v, topo):
    """Edge-flux interpolation preserving mean normal fluxes.

    The coefficient on each edge is the average of ``v . nu`` along the edge
    (two-point Gauss rule, exact for component polynomials of degree <= 2,
    which keeps the elementwise divergence projection property exact for
    quadratics).
    """
    verts = topo.mesh.vertices
    a = verts[topo.edges[:, 0]]
    b = verts[topo.edges[:, 1]]
    tang = b - a
    lengths = topo.edge_lengths
    normal = np.column_stack([tang[:, 1], -tang[:, 0]]) / lengths[:, None]
    mid = 0.5 * (a + b)
    off = tang * (0.5 / np.sqrt(3.0))
    coeffs = np.zeros(topo.n_edges)
    for pt in (mid - off, mid + off):
        try:
            vx, vy = v(pt[:, 0], pt[:, 1])
            vx = np.broadcast_to(np.asarray(vx, dtype=np.float64), (len(pt),))
            vy = np.broadcast_to(np.asarray(vy, dtype=np.float64), (len(pt),))
        except (TypeError, ValueError):
            vals = np.array([v(px, py) for px, py in pt], dtype=np.float64)
            vx, vy = vals[:, 0], vals[:, 1]
        coeffs += 0.5 * (vx * normal[:, 0] + vy * normal[:, 1])
    return EdgeFluxField(coeffs, topo)


def rt0_evaluate(q, triangle, x):
    """Evaluate a flux field inside one triangle."""
    topo = q.topo
    mesh = topo.mesh
    if not 0 <= triangle < mesh.n_triangles:
        raise IndexError(f"triangle index {triangle} out of range")
    p = mesh.vertices[mesh.triangles[triangle]]
    lengths = topo.edge_lengths[topo.tri_edges[triangle]]
    scale = topo.tri_signs[triangle] * lengths / (2.0 * mesh.areas[triangle])
    c = q.coefficients[topo.tri_edges[triangle]]
    x = np.asarray(x, dtype=np.float64)
    return np.einsum("l,l,lk->k", c, scale, x[None, :] - p)


def rt0_cell_vertex_values(q):
    """Values of a flux field at the three vertices of every triangle,
    taken from the owning triangle's local representation. Shape (T, 3, 2)."""
    geom = q.topo.rt0_geometry
    return kernels.rt0_vertex_values(q.coefficients, q.topo.tri_edges, geom.psi)


def rt0_centroid_values(q):
    """Values of a flux field at element centroids. Shape (T, 2)."""
    geom = q.topo.rt0_geometry
    c = q.coefficients[q.topo.tri_edges]  # (T, 3)
    return np.einsum("tl,tlk->tk", c, geom.psi_centroid)


def rt0_divergence(q):
    """Elementwise (constant) divergence via the divergence theorem; exact."""
    topo = q.topo
    geom = topo.rt0_geometry
    c = q.coefficients[topo.tri_edges]
    return CellField((c * geom.dvec).sum(axis=1) / topo.mesh.areas, topo.mesh)


def lumped_mass_diag(mesh):
    """Diagonal of the vertex-quadrature mass matrix: patch area / 3."""
    return mesh.patch_areas / 3.0


def lumped_inner(a, b):
    """Vertex-quadrature inner product of two nodal fields."""
    if a.mesh is not b.mesh:
        raise FieldMismatchError("fields live on different meshes")
    return float(np.sum(lumped_mass_diag(a.mesh) * a.values * b.values))


def nodal_l1_norm(w):
    """Vertex-quadrature L1 norm of a nodal field."""
    return float(np.sum(lumped_mass_diag(w.mesh) * np.abs(w.values)))


def cell_vector_l1_norm(v):
    """Integral of the Euclidean norm of a cell vector field."""
    return float(np.sum(v.mesh.areas * np.linalg.norm(v.values, axis=1)))


def rt0_lumped_form(weights, q1, q2):
    """Weighted vertex-quadrature pairing of two flux fields.

    ``weights`` is (T, 3), one positive factor per triangle vertex; the flux
    fields are evaluated at the vertices from the owning triangle's local
    representation (element-loop semantics).
    """
    weights = np.asarray(weights, dtype=np.float64)
    if q1.topo is not q2.topo:
        raise FieldMismatchError("flux fields live on different topologies")
    if weights.shape != (q1.mesh.n_triangles, 3):
        raise FieldMismatchError("weights must be (triangles, 3)")
    if (weights <= 0.0).any():
        raise ValueError("weights must be positive")
    v1 = rt0_cell_vertex_values(q1)
    v2 = rt0_cell_vertex_values(q2)
    dots = (v1 * v2).sum(axis=2)  # (T, 3)
    return float(np.sum(q1.mesh.areas / 3.0 * (weights * dots).sum(axis=1)))


def p1_stiffness_matrix(mesh):
    """Full stiffness matrix of piecewise linears (all vertices)."""
    g = mesh.grad_geom
    local = np.einsum("t,tik,tjk->tij", mesh.areas, g, g)
    rows = np.broadcast_to(mesh.triangles[:, :, None], local.shape).ravel()
    cols = np.broadcast_to(mesh.triangles[:, None, :], local.shape).ravel()
    n = mesh.n_vertices
    return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))


def p1_consistent_mass_matrix(mesh):
    """Exact P1 x P1 mass matrix (all vertices)."""
    base = (np.ones((3, 3)) + np.eye(3)) / 12.0
    local = mesh.areas[:, None, None] * base
    rows = np.broadcast_to(mesh.triangles[:, :, None], local.shape).ravel()
    cols = np.broadcast_to(mesh.triangles[:, None, :], local.shape).ravel()
    n = mesh.n_vertices
    return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))


def grad_pairing_matrix(mesh):
    """Sparse map from a flattened cell vector field to the interior-node
    vector of pairings ``(v, grad eta_i)``."""
    n_int = len(mesh.interior_vertices)
    inv = -np.ones(mesh.n_vertices, dtype=np.int64)
    inv[mesh.interior_vertices] = np.arange(n_int)
    tri_rows = inv[mesh.triangles]  # (T, 3), -1 for boundary vertices
    keep = tri_rows >= 0
    t_idx, j_idx = np.nonzero(keep)
    rows = tri_rows[t_idx, j_idx]
    vals = mesh.areas[t_idx, None] * mesh.grad_geom[t_idx, j_idx]  # (nnz, 2)
    cols = np.column_stack([2 * t_idx, 2 * t_idx + 1])
    return sp.csr_matrix(
        (vals.ravel(), (np.repeat(rows, 2), cols.ravel())),
        shape=(n_int, 2 * mesh.n_triangles),
    )


def assemble_qa_matrix(mesh, tau, rho):
    """System matrix of the surface solver's linear substep.

    Bilinear form ``(1/tau)(., .)^h + rho (grad ., grad .)`` restricted to
    interior vertices; the lumped mass contribution is diagonal.
    """
    if tau <= 0.0 or rho <= 0.0:
        raise ValueError("tau and rho must be positive")
    idx = mesh.interior_vertices
    if len(idx) == 0:
        raise ValueError("mesh has no interior vertices")
    K = p1_stiffness_matrix(mesh)[idx][:, idx]
    D = sp.diags(lumped_mass_diag(mesh)[idx] / tau)
    return SparseSPD((D + rho * K).tocsr())


def assemble_qb_matrix(topo, weights, tau):
    """System matrix of the flux solver's linearized iteration.

    Weighted vertex-quadrature Gram matrix of the flux element plus
    ``tau`` times the divergence Gram matrix; couples only edges that share
    a triangle.
    """
    weights = np.asarray(weights, dtype=np.float64)
    mesh = topo.mesh
    if weights.shape != (mesh.n_triangles, 3):
        raise FieldMismatchError("weights must be (triangles, 3)")
    if (weights <= 0.0).any():
        raise ValueError("weights must be positive")
    if tau < 0.0:
        raise ValueError("tau must be nonnegative")
    geom = topo.rt0_geometry
    local = np.einsum("t,tj,tljk,tmjk->tlm", mesh.areas / 3.0, weights, geom.psi, geom.psi)
    local += np.einsum("t,tl,tm->tlm", tau / mesh.areas, geom.dvec, geom.dvec)
    n = topo.n_edges
    return SparseSPD(
        sp.csr_matrix((local.ravel(), (geom.rows, geom.cols)), shape=(n, n))
    )
