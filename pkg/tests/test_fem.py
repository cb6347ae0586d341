import numpy as np
import pytest

from sandflow.errors import NumericalError
from sandflow.fem import (
    EdgeFluxField,
    NodalField,
    assemble_qa_matrix,
    assemble_qb_matrix,
    lumped_inner,
    lumped_mass_diag,
    p0_project,
    p1_consistent_mass_matrix,
    p1_gradient,
    p1_interpolate,
    rt0_cell_vertex_values,
    rt0_divergence,
    rt0_evaluate,
    rt0_interpolate,
    rt0_lumped_form,
)
from sandflow.linalg import SPDFactor
from sandflow.mesh import build_edge_topology, generate_disk_mesh

from conftest import single_triangle_mesh, two_triangle_mesh


class TestP1Interpolate:
    def test_constant(self, disk_coarse):
        w = p1_interpolate(lambda x, y: np.ones_like(x), disk_coarse)
        assert (w.values == 1.0).all()

    def test_reproduces_linears_inside_elements(self, unit_square_fine):
        mesh = unit_square_fine
        w = p1_interpolate(lambda x, y: 2.0 * x - 3.0 * y + 0.5, mesh)
        # evaluate the P1 field at interior barycentric points of each triangle
        lam = np.array([0.2, 0.3, 0.5])
        pts = np.einsum("j,tjk->tk", lam, mesh.vertices[mesh.triangles])
        vals = np.einsum("j,tj->t", lam, w.values[mesh.triangles])
        exact = 2.0 * pts[:, 0] - 3.0 * pts[:, 1] + 0.5
        assert np.abs(vals - exact).max() < 1e-13

    def test_cone_apex_value(self, disk_coarse):
        w = p1_interpolate(
            lambda x, y: np.maximum(0.4 - np.hypot(x, y), 0.0), disk_coarse
        )
        center = np.flatnonzero(
            (disk_coarse.vertices[:, 0] == 0.0) & (disk_coarse.vertices[:, 1] == 0.0)
        )
        assert len(center) == 1
        assert w.values[center[0]] == pytest.approx(0.4)

    def test_nonfinite_rejected(self, square_2x2):
        from sandflow.errors import EvaluationError

        with pytest.raises(EvaluationError):
            p1_interpolate(lambda x, y: np.where(x == 0.0, np.nan, 1.0), square_2x2)


class TestP0Project:
    def test_constant_nodal(self, disk_coarse):
        w = NodalField(np.full(disk_coarse.n_vertices, 3.25), disk_coarse)
        c = p0_project(w, disk_coarse)
        assert np.abs(c.values - 3.25).max() < 1e-14

    def test_vertex_mean_on_one_triangle(self):
        mesh = single_triangle_mesh()
        w = NodalField(np.array([0.0, 1.0, 2.0]), mesh)
        c = p0_project(w, mesh)
        assert c.values[0] == pytest.approx(1.0)

    def test_exact_cell_integral_of_nodal(self, unit_square_fine, rng):
        mesh = unit_square_fine
        w = NodalField(rng.standard_normal(mesh.n_vertices), mesh)
        c = p0_project(w, mesh)
        # exact integral of a linear over a triangle = area * vertex mean
        exact = w.values[mesh.triangles].mean(axis=1)
        assert np.abs(c.values - exact).max() < 1e-14

    def test_quadratic_function_exact(self):
        mesh = two_triangle_mesh()
        c = p0_project(lambda x, y: x * x + x * y, mesh)
        # cell means computed exactly: triangle (0,0),(1,0),(1,1) and (0,0),(1,1),(0,1)
        # int(x^2 + x y) via monomial means over each triangle
        t0 = 1.0 / 2.0 + 1.0 / 4.0  # mean of x^2 is 1/2, of xy is 1/4 on t0
        t1 = 1.0 / 6.0 + 1.0 / 4.0
        assert c.values[0] == pytest.approx(t0, rel=1e-12)
        assert c.values[1] == pytest.approx(t1, rel=1e-12)

    def test_sup_stability(self, disk_coarse, rng):
        w = NodalField(rng.standard_normal(disk_coarse.n_vertices), disk_coarse)
        c = p0_project(w, disk_coarse)
        assert np.abs(c.values).max() <= np.abs(w.values).max() + 1e-14


class TestP1Gradient:
    def test_linear_field(self, disk_coarse):
        w = p1_interpolate(lambda x, y: x + 2.0 * y, disk_coarse)
        g = p1_gradient(w)
        assert np.abs(g.values - np.array([1.0, 2.0])).max() < 1e-12

    def test_constant_field(self, disk_coarse):
        w = NodalField(np.full(disk_coarse.n_vertices, 7.0), disk_coarse)
        g = p1_gradient(w)
        assert np.abs(g.values).max() < 1e-12

    def test_cone_gradient_magnitude(self):
        mesh = generate_disk_mesh(1.0, 0.05)
        w = p1_interpolate(lambda x, y: np.maximum(0.4 - np.hypot(x, y), 0.0), mesh)
        g = p1_gradient(w)
        r = np.hypot(mesh.centroids[:, 0], mesh.centroids[:, 1])
        inside = r < 0.3  # strictly inside the cone, away from apex and rim
        inside &= r > 0.1
        mags = np.linalg.norm(g.values[inside], axis=1)
        assert mags.min() > 0.9
        assert mags.max() < 1.1


class TestRT0:
    def test_constant_field_reproduced(self, disk_coarse_topo):
        q = rt0_interpolate(lambda x, y: (np.ones_like(x), np.zeros_like(y)), disk_coarse_topo)
        vals = rt0_cell_vertex_values(q)
        assert np.abs(vals - np.array([1.0, 0.0])).max() < 1e-12

    def test_identity_field_reproduced(self, disk_coarse_topo):
        q = rt0_interpolate(lambda x, y: (x, y), disk_coarse_topo)
        mesh = disk_coarse_topo.mesh
        vals = rt0_cell_vertex_values(q)
        pts = mesh.vertices[mesh.triangles]
        assert np.abs(vals - pts).max() < 1e-12
        div = rt0_divergence(q)
        assert np.abs(div.values - 2.0).max() < 1e-12

    def test_divergence_of_constant(self, disk_coarse_topo):
        q = rt0_interpolate(lambda x, y: (np.ones_like(x), -np.ones_like(y)), disk_coarse_topo)
        assert np.abs(rt0_divergence(q).values).max() < 1e-12

    def test_single_basis_divergence(self):
        mesh = single_triangle_mesh()
        topo = build_edge_topology(mesh)
        for e in range(3):
            coeffs = np.zeros(3)
            coeffs[e] = 1.0
            q = EdgeFluxField(coeffs, topo)
            div = rt0_divergence(q).values[0]
            expected = topo.edge_lengths[e] / mesh.areas[0]
            assert abs(abs(div) - expected) < 1e-12

    def test_divergence_projection_quadratic(self):
        # integral of div(v - I v) over each element vanishes for quadratics
        mesh = two_triangle_mesh()
        topo = build_edge_topology(mesh)
        q = rt0_interpolate(lambda x, y: (y * y, np.zeros_like(x)), topo)
        div_i = rt0_divergence(q).values * mesh.areas
        # div v = 0 for v = (y^2, 0); element integrals of div I^h v must vanish
        assert np.abs(div_i).max() < 1e-12

    def test_divergence_projection_general_quadratic(self, disk_coarse_topo):
        mesh = disk_coarse_topo.mesh
        v = lambda x, y: (x * x + y, x * y)  # noqa: E731
        q = rt0_interpolate(v, disk_coarse_topo)
        # div v = 2x + x = 3x; element integral = 3 * area * centroid_x
        exact = 3.0 * mesh.areas * mesh.centroids[:, 0]
        approx = rt0_divergence(q).values * mesh.areas
        assert np.abs(approx - exact).max() < 1e-12

    def test_basis_vanishes_at_opposite_vertex(self):
        mesh = single_triangle_mesh()
        topo = build_edge_topology(mesh)
        # find the hypotenuse edge (1,2); its opposite vertex is (0,0)
        hyp = int(np.flatnonzero((topo.edges == [1, 2]).all(axis=1))[0])
        coeffs = np.zeros(3)
        coeffs[hyp] = 1.0
        q = EdgeFluxField(coeffs, topo)
        assert np.abs(rt0_evaluate(q, 0, [0.0, 0.0])).max() < 1e-14

    def test_unit_normal_component_on_edge(self):
        mesh = single_triangle_mesh()
        topo = build_edge_topology(mesh)
        hyp = int(np.flatnonzero((topo.edges == [1, 2]).all(axis=1))[0])
        coeffs = np.zeros(3)
        coeffs[hyp] = 1.0
        q = EdgeFluxField(coeffs, topo)
        val = rt0_evaluate(q, 0, [0.5, 0.5])  # hypotenuse midpoint
        tang = mesh.vertices[2] - mesh.vertices[1]
        nu = np.array([tang[1], -tang[0]]) / np.linalg.norm(tang)
        assert float(val @ nu) == pytest.approx(1.0, abs=1e-12)

    def test_evaluate_bad_triangle_index(self, disk_coarse_topo):
        q = EdgeFluxField(np.zeros(disk_coarse_topo.n_edges), disk_coarse_topo)
        with pytest.raises(IndexError):
            rt0_evaluate(q, disk_coarse_topo.mesh.n_triangles, [0.0, 0.0])

    def test_zero_coefficients(self, disk_coarse_topo):
        q = EdgeFluxField(np.zeros(disk_coarse_topo.n_edges), disk_coarse_topo)
        assert np.abs(rt0_evaluate(q, 0, disk_coarse_topo.mesh.centroids[0])).max() == 0.0


class TestLumpedQuadrature:
    def test_constant_gives_area(self, disk_coarse):
        one = NodalField(np.ones(disk_coarse.n_vertices), disk_coarse)
        assert lumped_inner(one, one) == pytest.approx(disk_coarse.total_area(), rel=1e-12)

    def test_hat_function_patch_area(self, square_2x2):
        mesh = square_2x2
        interior = mesh.interior_vertices
        assert len(interior) == 1
        w = np.zeros(mesh.n_vertices)
        w[interior[0]] = 1.0
        f = NodalField(w, mesh)
        patch = mesh.patch_areas[interior[0]]
        assert lumped_inner(f, f) == pytest.approx(patch / 3.0, rel=1e-12)

    def test_norm_equivalence_p1(self, disk_coarse, rng):
        # |eta|^2 <= |eta|_h^2 <= 4 |eta|^2 in two dimensions
        mesh = disk_coarse
        mass = p1_consistent_mass_matrix(mesh)
        for _ in range(1000):
            v = rng.standard_normal(mesh.n_vertices)
            l2 = float(v @ (mass @ v))
            lh = float(np.sum(lumped_mass_diag(mesh) * v * v))
            assert l2 <= lh * (1.0 + 1e-12)
            assert lh <= 4.0 * l2 * (1.0 + 1e-12)

    def test_rt0_vertex_rule_norm_equivalence(self, disk_coarse_topo, rng):
        # exact element integral of |v|^2 sits between 1/4 and 1 times the
        # vertex rule, for flux-element fields (r = 2 case)
        topo = disk_coarse_topo
        mesh = topo.mesh
        for _ in range(1000):
            q = EdgeFluxField(rng.standard_normal(topo.n_edges), topo)
            vals = rt0_cell_vertex_values(q)  # (T, 3, 2)
            vertex_rule = (mesh.areas / 3.0) * (vals * vals).sum(axis=2).sum(axis=1)
            # exact integral of the quadratic |v|^2 via edge midpoints
            mids = 0.5 * (vals + np.roll(vals, -1, axis=1))
            exact = (mesh.areas / 3.0) * (mids * mids).sum(axis=2).sum(axis=1)
            keep = vertex_rule > 1e-14
            ratio = exact[keep] / vertex_rule[keep]
            assert (ratio <= 1.0 + 1e-12).all()
            assert (ratio >= 0.25 - 1e-12).all()


class TestRT0LumpedForm:
    def test_constant_field_weighted_area(self, disk_coarse_topo):
        topo = disk_coarse_topo
        mesh = topo.mesh
        q = rt0_interpolate(
            lambda x, y: (np.full_like(x, 0.3), np.full_like(y, -0.4)), topo
        )
        w = np.ones((mesh.n_triangles, 3))
        val = rt0_lumped_form(w, q, q)
        assert val == pytest.approx(0.25 * mesh.total_area(), rel=1e-12)

    def test_symmetry(self, disk_coarse_topo, rng):
        topo = disk_coarse_topo
        w = rng.uniform(0.5, 2.0, (topo.mesh.n_triangles, 3))
        q1 = EdgeFluxField(rng.standard_normal(topo.n_edges), topo)
        q2 = EdgeFluxField(rng.standard_normal(topo.n_edges), topo)
        assert rt0_lumped_form(w, q1, q2) == pytest.approx(
            rt0_lumped_form(w, q2, q1), rel=1e-12
        )

    def test_nonpositive_weight_rejected(self, disk_coarse_topo):
        topo = disk_coarse_topo
        q = EdgeFluxField(np.zeros(topo.n_edges), topo)
        w = np.ones((topo.mesh.n_triangles, 3))
        w[0, 0] = 0.0
        with pytest.raises(ValueError):
            rt0_lumped_form(w, q, q)


class TestAssembly:
    def test_qa_lumped_mass_diagonal(self, square_2x2):
        mesh = square_2x2
        tau = 0.25
        A = assemble_qa_matrix(mesh, tau, 1e-14)  # negligible stiffness part
        i = mesh.interior_vertices[0]
        expected = mesh.patch_areas[i] / 3.0 / tau
        assert A.matrix.diagonal()[0] == pytest.approx(expected, rel=1e-9)

    def test_qa_spd_on_grid(self, square_2x2):
        A = assemble_qa_matrix(square_2x2, 0.01, 1.0)
        asym = abs(A.matrix - A.matrix.T)
        assert asym.nnz == 0 or asym.data.max() <= 1e-12 * abs(A.matrix.data).max()
        SPDFactor(A)  # raises if not positive definite

    def test_qa_identity_solve_small_rho(self, disk_coarse):
        mesh = disk_coarse
        tau = 1.0
        A = assemble_qa_matrix(mesh, tau, 1e-12)
        diag = lumped_mass_diag(mesh)[mesh.interior_vertices]
        x = SPDFactor(A).solve(diag / tau)
        assert np.abs(x - 1.0).max() < 1e-6

    def test_qa_hand_assembled_1x1(self, square_2x2):
        # single interior vertex: (1/tau) * patch/3 + rho * sum of gradient
        # self-products over its star
        mesh = square_2x2
        tau, rho = 1.0, 1.0
        A = assemble_qa_matrix(mesh, tau, rho)
        i = mesh.interior_vertices[0]
        mass = mesh.patch_areas[i] / 3.0 / tau
        stiff = 0.0
        for t in range(mesh.n_triangles):
            for j in range(3):
                if mesh.triangles[t, j] == i:
                    g = mesh.grad_geom[t, j]
                    stiff += mesh.areas[t] * float(g @ g)
        assert A.matrix.toarray()[0, 0] == pytest.approx(mass + rho * stiff, rel=1e-12)

    def test_qb_single_triangle_dense_spd(self):
        mesh = single_triangle_mesh()
        topo = build_edge_topology(mesh)
        w = np.full((1, 3), 2.0)
        A = assemble_qb_matrix(topo, w, tau=0.1)
        dense = A.matrix.toarray()
        assert dense.shape == (3, 3)
        assert np.linalg.eigvalsh(dense).min() > 0.0

    def test_qb_constant_field_quadratic_form(self, disk_coarse_topo):
        topo = disk_coarse_topo
        mesh = topo.mesh
        q = rt0_interpolate(
            lambda x, y: (np.full_like(x, 0.8), np.full_like(y, 0.6)), topo
        )
        A = assemble_qb_matrix(topo, np.ones((mesh.n_triangles, 3)), tau=0.0)
        val = float(q.coefficients @ (A.matrix @ q.coefficients))
        assert val == pytest.approx(mesh.total_area() * 1.0, rel=1e-12)

    def test_qb_matches_lumped_form_plus_divdiv(self, disk_coarse_topo, rng):
        topo = disk_coarse_topo
        mesh = topo.mesh
        w = rng.uniform(0.5, 3.0, (mesh.n_triangles, 3))
        tau = 0.37
        q1 = EdgeFluxField(rng.standard_normal(topo.n_edges), topo)
        q2 = EdgeFluxField(rng.standard_normal(topo.n_edges), topo)
        A = assemble_qb_matrix(topo, w, tau)
        lhs = float(q1.coefficients @ (A.matrix @ q2.coefficients))
        divs = rt0_divergence(q1).values * rt0_divergence(q2).values
        rhs = rt0_lumped_form(w, q1, q2) + tau * float(np.sum(mesh.areas * divs))
        assert lhs == pytest.approx(rhs, rel=1e-11)

    def test_qb_factorizable_on_disk(self, disk_coarse_topo):
        topo = disk_coarse_topo
        A = assemble_qb_matrix(topo, np.full((topo.mesh.n_triangles, 3), 0.7), tau=0.003)
        SPDFactor(A)  # raises if not positive definite

    def test_qb_symmetric_on_disk(self, disk_coarse_topo):
        topo = disk_coarse_topo
        A = assemble_qb_matrix(topo, np.ones((topo.mesh.n_triangles, 3)), tau=0.01)
        asym = abs(A.matrix - A.matrix.T)
        assert asym.nnz == 0 or asym.data.max() <= 1e-12 * abs(A.matrix.data).max()

    def test_asymmetric_matrix_rejected(self):
        import scipy.sparse as sp

        from sandflow.fem import SparseSPD

        bad = sp.csr_matrix(np.array([[1.0, 0.5], [0.2, 1.0]]))
        with pytest.raises(NumericalError):
            SparseSPD(bad)
