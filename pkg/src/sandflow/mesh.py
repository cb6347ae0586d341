"""Conforming triangulations of polygonal domains and their edge topology.

Meshes are plain data: vertex coordinates, counterclockwise triangles and
derived geometry. Generators cover the two domain shapes used by the
benchmark scenarios (axis-aligned rectangles, disks built from concentric
rings); arbitrary conforming meshes can be read from a small text format.
"""

import math

import numpy as np

from .errors import GeometryError, MeshFormatError, MeshValidationError


class TriMesh:
    """Conforming triangulation with counterclockwise elements.

    Parameters
    ----------
    vertices : (V, 2) float array
        Vertex coordinates.
    triangles : (T, 3) int array
        Vertex indices per triangle, counterclockwise.

    Construction validates orientation, positive areas and edge conformity,
    and derives per-triangle geometry (areas, centroids, P1 shape-function
    gradients) plus boundary flags. Instances are immutable by convention.
    """

    def __init__(self, vertices, triangles):
        self.vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        self.triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise MeshValidationError("vertices must be an (V, 2) array")
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise MeshValidationError("triangles must be a (T, 3) array")
        if self.triangles.size and (
            self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices)
        ):
            raise MeshValidationError("triangle refers to a non-existent vertex")
        if not np.isfinite(self.vertices).all():
            raise MeshValidationError("non-finite vertex coordinate")

        p = self.vertices[self.triangles]  # (T, 3, 2)
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        signed = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
        if (signed <= 0.0).any():
            bad = int(np.argmax(signed <= 0.0))
            raise MeshValidationError(
                f"triangle {bad} is not counterclockwise (signed area {signed[bad]:g})"
            )
        self.areas = signed
        self.centroids = p.mean(axis=1)

        edges = _directed_edges(self.triangles)
        und = np.sort(edges, axis=1)
        uniq, counts = np.unique(und, axis=0, return_counts=True)
        if counts.max(initial=1) > 2:
            e = uniq[int(np.argmax(counts))]
            raise MeshValidationError(
                f"edge ({e[0]}, {e[1]}) is shared by more than two triangles"
            )
        uniq_dir = np.unique(edges, axis=0)
        if len(uniq_dir) != len(edges):
            raise MeshValidationError(
                "two triangles traverse an edge in the same direction "
                "(inconsistent orientation or non-conforming mesh)"
            )
        boundary_edges = uniq[counts == 1]
        self.boundary_vertex_flags = np.zeros(len(self.vertices), dtype=bool)
        self.boundary_vertex_flags[boundary_edges.ravel()] = True

        lengths = np.linalg.norm(
            self.vertices[uniq[:, 1]] - self.vertices[uniq[:, 0]], axis=1
        )
        self.h_max = float(lengths.max()) if len(lengths) else 0.0

        # area < tol * h_max^2 marks a degenerate element
        tiny = 1e-14 * self.h_max**2
        if (self.areas < tiny).any():
            bad = int(np.argmax(self.areas < tiny))
            raise GeometryError(f"triangle {bad} is degenerate (area {self.areas[bad]:g})")

        # constant gradients of the three P1 shape functions on each triangle;
        # grad_geom[t, j] is the gradient of the hat function of local vertex j
        g = np.empty((len(self.triangles), 3, 2))
        for j in range(3):
            a = p[:, (j + 1) % 3]
            b = p[:, (j + 2) % 3]
            g[:, j, 0] = a[:, 1] - b[:, 1]
            g[:, j, 1] = b[:, 0] - a[:, 0]
        self.grad_geom = g / (2.0 * self.areas)[:, None, None]

        self.interior_vertices = np.flatnonzero(~self.boundary_vertex_flags)
        self._patch_areas = None

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def patch_areas(self):
        """Per-vertex sum of areas of incident triangles."""
        if self._patch_areas is None:
            pa = np.zeros(self.n_vertices)
            np.add.at(pa, self.triangles.ravel(), np.repeat(self.areas, 3))
            self._patch_areas = pa
        return self._patch_areas

    def total_area(self):
        return float(self.areas.sum())


class EdgeTopology:
    """Global edge numbering with orientation signs for flux elements.

    Edges are stored lower-vertex-first; ``tri_edges[t, l]`` is the global
    index of the edge opposite local vertex ``l`` of triangle ``t`` and
    ``tri_signs[t, l]`` is +1 when the global edge normal coincides with the
    outward normal of the triangle on that edge.
    """

    def __init__(self, mesh):
        self.mesh = mesh
        tris = mesh.triangles
        # local edge l is opposite local vertex l: (v_{l+1}, v_{l+2})
        e0 = tris[:, [1, 2]]
        e1 = tris[:, [2, 0]]
        e2 = tris[:, [0, 1]]
        directed = np.stack([e0, e1, e2], axis=1)  # (T, 3, 2)
        und = np.sort(directed.reshape(-1, 2), axis=1)
        self.edges, inverse, counts = np.unique(
            und, axis=0, return_inverse=True, return_counts=True
        )
        self.tri_edges = np.ascontiguousarray(
            inverse.reshape(-1, 3), dtype=np.int64
        )
        # +1 when the ccw traversal (a -> b) already runs low -> high
        signs = np.where(
            directed[:, :, 0] < directed[:, :, 1], 1.0, -1.0
        )
        self.tri_signs = np.ascontiguousarray(signs, dtype=np.float64)
        self.boundary_edge_flags = counts == 1
        verts = mesh.vertices
        self.edge_lengths = np.linalg.norm(
            verts[self.edges[:, 1]] - verts[self.edges[:, 0]], axis=1
        )

        if counts.max(initial=1) > 2:
            raise MeshValidationError("edge shared by more than two triangles")
        # interior edges must be seen with opposite signs by their two triangles
        acc = np.zeros(len(self.edges))
        np.add.at(acc, self.tri_edges.ravel(), self.tri_signs.ravel())
        interior = ~self.boundary_edge_flags
        if not np.allclose(acc[interior], 0.0):
            bad = int(np.flatnonzero(interior & (acc != 0.0))[0])
            raise MeshValidationError(f"interior edge {bad} has inconsistent signs")

        self._rt0 = None

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def rt0_geometry(self):
        """Cached per-triangle flux-element geometry (see ``fem``)."""
        if self._rt0 is None:
            from .fem import RT0Geometry

            self._rt0 = RT0Geometry(self)
        return self._rt0


def build_edge_topology(mesh):
    """Build the oriented edge topology of a valid mesh."""
    return EdgeTopology(mesh)


def _directed_edges(tris):
    return np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])


def _orient_ccw(vertices, triangles):
    p = vertices[triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    signed = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    flip = signed < 0.0
    triangles = triangles.copy()
    triangles[flip] = triangles[flip][:, [0, 2, 1]]
    return triangles


def generate_square_mesh(xmin, xmax, ymin, ymax, h):
    """Uniform grid of an axis-aligned rectangle, each cell split into two
    triangles along the same diagonal."""
    if not (xmax > xmin and ymax > ymin):
        raise ValueError("empty rectangle")
    if not 0.0 < h < min(xmax - xmin, ymax - ymin):
        raise ValueError(f"target edge length h={h} must lie in (0, min side)")
    nx = math.ceil((xmax - xmin) / h)
    ny = math.ceil((ymax - ymin) / h)
    xs = np.linspace(xmin, xmax, nx + 1)
    ys = np.linspace(ymin, ymax, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return i * (ny + 1) + j

    tris = []
    for i in range(nx):
        for j in range(ny):
            v00 = vid(i, j)
            v10 = vid(i + 1, j)
            v01 = vid(i, j + 1)
            v11 = vid(i + 1, j + 1)
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    return TriMesh(vertices, np.array(tris, dtype=np.int64))


def generate_disk_mesh(radius, h):
    """Triangulate a disk from concentric rings of vertices.

    Boundary vertices lie exactly on the circle; the mesh covers the inscribed
    polygon. Ring ``k`` sits at radius ``k * radius / K`` and carries enough
    vertices to keep its chords below ``h``.
    """
    if radius <= 0.0:
        raise ValueError("radius must be positive")
    if not 0.0 < h < radius:
        raise ValueError(f"target edge length h={h} must lie in (0, radius)")
    K = math.ceil(radius / h)
    rings = [np.zeros((1, 2))]
    counts = [1]
    for k in range(1, K + 1):
        rk = k * radius / K
        nk = math.ceil(2.0 * math.pi * k * radius / (K * h))
        theta = 2.0 * math.pi * np.arange(nk) / nk
        rings.append(np.column_stack([rk * np.cos(theta), rk * np.sin(theta)]))
        counts.append(nk)
    offsets = np.concatenate([[0], np.cumsum(counts)])
    vertices = np.concatenate(rings)

    tris = []
    # central fan
    n1 = counts[1]
    for i in range(n1):
        tris.append((0, offsets[1] + i, offsets[1] + (i + 1) % n1))
    # annulus strips between consecutive rings, merged by angle
    for k in range(2, K + 1):
        na, nb = counts[k - 1], counts[k]
        oa, ob = offsets[k - 1], offsets[k]
        i = j = 0
        while i < na or j < nb:
            adv_inner = j >= nb or (i < na and (i + 1) * nb <= (j + 1) * na)
            if adv_inner:
                tris.append(
                    (oa + i % na, oa + (i + 1) % na, ob + j % nb)
                )
                i += 1
            else:
                tris.append(
                    (ob + j % nb, oa + i % na, ob + (j + 1) % nb)
                )
                j += 1
    tris = _orient_ccw(vertices, np.array(tris, dtype=np.int64))
    return TriMesh(vertices, tris)


def mesh_quality(mesh):
    """Element size and shape statistics.

    Returns a dict with ``h_max``/``h_min`` (longest edge per triangle,
    extremal over the mesh) and ``regularity`` (max diameter / inradius).
    """
    p = mesh.vertices[mesh.triangles]
    l0 = np.linalg.norm(p[:, 2] - p[:, 1], axis=1)
    l1 = np.linalg.norm(p[:, 0] - p[:, 2], axis=1)
    l2 = np.linalg.norm(p[:, 1] - p[:, 0], axis=1)
    diam = np.maximum(np.maximum(l0, l1), l2)
    # inradius = area / semiperimeter
    inr = mesh.areas / (0.5 * (l0 + l1 + l2))
    return {
        "h_max": float(diam.max()),
        "h_min": float(diam.min()),
        "regularity": float((diam / inr).max()),
    }


def write_mesh(mesh, path):
    """Write the plain text format: `V T`, V coordinate lines, T index lines."""
    with open(path, "w") as f:
        f.write(f"{mesh.n_vertices} {mesh.n_triangles}\n")
        for x, y in mesh.vertices:
            f.write(f"{x:.17g} {y:.17g}\n")
        for a, b, c in mesh.triangles:
            f.write(f"{a} {b} {c}\n")


def load_mesh(path):
    """Read the plain text format written by :func:`write_mesh`.

    Triangles are re-oriented counterclockwise when needed; all structural
    invariants are validated.
    """
    with open(path) as f:
        lines = f.readlines()
    if not lines:
        raise MeshFormatError("empty file", line=1)
    header = lines[0].split()
    if len(header) != 2:
        raise MeshFormatError("expected header 'V T'", line=1)
    try:
        nv, nt = int(header[0]), int(header[1])
    except ValueError:
        raise MeshFormatError("expected integer header 'V T'", line=1) from None
    if len(lines) < 1 + nv + nt:
        raise MeshFormatError(
            f"expected {1 + nv + nt} lines, found {len(lines)}", line=len(lines)
        )
    vertices = np.empty((nv, 2))
    for i in range(nv):
        parts = lines[1 + i].split()
        try:
            vertices[i] = [float(parts[0]), float(parts[1])]
        except (IndexError, ValueError):
            raise MeshFormatError("expected 'x y'", line=2 + i) from None
    triangles = np.empty((nt, 3), dtype=np.int64)
    for i in range(nt):
        parts = lines[1 + nv + i].split()
        try:
            triangles[i] = [int(parts[0]), int(parts[1]), int(parts[2])]
        except (IndexError, ValueError):
            raise MeshFormatError("expected 'i j k'", line=2 + nv + i) from None
    if triangles.size and (triangles.min() < 0 or triangles.max() >= nv):
        raise MeshValidationError("triangle refers to a non-existent vertex")
    triangles = _orient_ccw(vertices, triangles)
    return TriMesh(vertices, triangles)
