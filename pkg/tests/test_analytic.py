import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.optimize import brentq

from sandflow import analytic
from sandflow.analytic import (
    OutOfRegimeError,
    ex1_flux,
    ex1_surface,
    ex1_tstar,
    ex3_flux,
    ex3_radii,
    ex3_surface,
    radial_vector_field,
    rel_l1_error_flux,
    rel_l1_error_surface,
)
from sandflow.fem import NodalField, p0_project, p1_interpolate, rt0_interpolate
from sandflow.mesh import build_edge_topology, generate_disk_mesh

K0, R0, RATE = 0.4, 0.2, 1.0


def flux_quadrature_oracle(t, R, growth_rate, inner, outer):
    """Independent radial-balance quadrature: growth is uniform on
    [inner, outer], the source uniform on the disk of radius R0."""
    fdens = RATE / (math.pi * R0 * R0)

    def integrand(s):
        f = fdens if s <= R0 else 0.0
        dw = growth_rate if inner <= s <= outer else 0.0
        return (f - dw) * s

    val, _ = quad(integrand, 0.0, R, points=[R0, inner, outer], limit=200)
    return val / R


class TestEx1:
    def test_tstar_value(self):
        assert ex1_tstar(0.4, 0.2) == pytest.approx(0.017412473896648493, rel=1e-12)

    def test_tstar_zero_source_radius(self):
        assert ex1_tstar(0.4, 0.0) == 0.0

    def test_tstar_cubic_scaling(self):
        assert ex1_tstar(0.4, 0.4) == pytest.approx(8.0 * ex1_tstar(0.4, 0.2), rel=1e-12)

    def test_surface_peak_at_t01(self):
        assert ex1_surface(0.1, 0.0) == pytest.approx(0.24814019635976003, rel=1e-12)

    def test_surface_zero_outside_base(self):
        assert ex1_surface(0.1, 0.6204) == 0.0
        assert ex1_surface(0.1, 0.9) == 0.0

    def test_surface_at_tstar(self):
        t = ex1_tstar(K0, R0)
        assert ex1_surface(t, 0.0) == pytest.approx(K0 * R0 * math.sqrt(3.0), rel=1e-9)

    def test_surface_before_tstar_rejected(self):
        with pytest.raises(OutOfRegimeError):
            ex1_surface(0.01, 0.0)

    def test_cone_volume_equals_time(self):
        rc = analytic.ex1_base_radius(0.1, K0, RATE)
        vol, _ = quad(lambda R: K0 * max(rc - R, 0.0) * 2.0 * math.pi * R, 0.0, rc)
        assert vol == pytest.approx(0.1, rel=1e-10)

    def test_flux_spot_value(self):
        # frozen from the radial-balance quadrature oracle
        assert ex1_flux(0.1, 0.4) == pytest.approx(0.23246056015656505, rel=1e-10)

    def test_flux_matches_quadrature_oracle(self):
        t = 0.1
        rc = analytic.ex1_base_radius(t, K0, RATE)
        growth = RATE / (math.pi * rc * rc)
        for R in np.linspace(0.03, 0.99, 25):
            expected = flux_quadrature_oracle(t, R, growth, 0.0, rc)
            assert ex1_flux(t, R) == pytest.approx(expected, abs=1e-12)

    def test_flux_vanishes_at_base_and_origin(self):
        rc = analytic.ex1_base_radius(0.1, K0, RATE)
        assert ex1_flux(0.1, rc) == pytest.approx(0.0, abs=1e-12)
        assert ex1_flux(0.1, 0.0) == 0.0
        assert ex1_flux(0.1, 1e-9) == pytest.approx(0.0, abs=1e-8)

    def test_flux_continuous(self):
        rs = np.linspace(1e-3, 0.99, 2000)
        q = ex1_flux(0.1, rs)
        assert np.abs(np.diff(q)).max() < 5e-3

    def test_flux_nonnegative(self):
        q = ex1_flux(0.1, np.linspace(0.0, 1.0, 500))
        assert (q >= -1e-15).all()


class TestEx3:
    def test_radii_at_t01(self):
        # frozen from an independent brentq root-find on the volume equation
        r1, r2 = ex3_radii(0.1)
        assert r1 == pytest.approx(0.1795709365115155, abs=1e-10)
        assert r2 == pytest.approx(0.7306435952327268, abs=1e-10)

    def test_radii_degenerate_at_zero_time(self):
        r1, r2 = ex3_radii(1e-12)
        assert r1 == pytest.approx(0.4, abs=1e-4)
        assert r2 == pytest.approx(0.4, abs=1e-4)

    def test_radii_satisfy_both_equations(self):
        for t in (0.02, 0.05, 0.1, 0.2):
            r1, r2 = ex3_radii(t)
            assert r2 == pytest.approx(r1 + (0.4 - r1) / K0, rel=1e-12)
            vol = (math.pi / 3.0) * ((r2**3 - r1**3) * K0 - (0.4**3 - r1**3))
            assert vol == pytest.approx(t, abs=1e-10)

    def test_radii_match_brentq_oracle(self):
        def resid(r1, t):
            r2 = r1 + (0.4 - r1) / K0
            return (math.pi / 3.0) * ((r2**3 - r1**3) * K0 - (0.4**3 - r1**3)) - t

        for t in (0.03, 0.07, 0.15):
            expected = brentq(lambda x: resid(x, t), 0.0, 0.4, xtol=1e-14)
            assert ex3_radii(t)[0] == pytest.approx(expected, abs=1e-11)

    def test_out_of_regime(self):
        with pytest.raises(OutOfRegimeError):
            ex3_radii(0.0)
        with pytest.raises(OutOfRegimeError):
            ex3_radii(1.0)  # pile would be past the domain boundary

    def test_surface_continuity_at_inner_radius(self):
        for t in (0.05, 0.1):
            r1, r2 = ex3_radii(t)
            assert 0.4 - r1 == pytest.approx(K0 * (r2 - r1), rel=1e-10)
            assert ex3_surface(t, r1 - 1e-9) == pytest.approx(
                ex3_surface(t, r1 + 1e-9), abs=1e-7
            )

    def test_surface_regions(self):
        t = 0.1
        r1, r2 = ex3_radii(t)
        assert ex3_surface(t, 0.05) == pytest.approx(0.35, rel=1e-12)
        assert ex3_surface(t, 0.5 * (r1 + r2)) == pytest.approx(
            K0 * (r2 - 0.5 * (r1 + r2)), rel=1e-12
        )
        assert ex3_surface(t, 0.9) == 0.0

    def test_flux_spot_values(self):
        # frozen from the radial-balance quadrature oracle
        assert ex3_flux(0.1, 0.4) == pytest.approx(0.2965468756260596, abs=1e-7)
        assert ex3_flux(0.1, 0.6) == pytest.approx(0.091931876121651, abs=1e-7)

    def test_flux_matches_quadrature_oracle(self):
        t = 0.06
        r1, r2 = ex3_radii(t)
        dt = 1e-6
        r2p = (ex3_radii(t + dt)[1] - ex3_radii(t - dt)[1]) / (2.0 * dt)
        growth = K0 * r2p
        for R in np.linspace(0.05, 0.95, 19):
            expected = flux_quadrature_oracle(t, R, growth, r1, r2)
            assert ex3_flux(t, R) == pytest.approx(expected, abs=1e-9)

    def test_flux_vanishes_at_outer_base(self):
        # residual bounded by the root-find tolerance propagated through the
        # central difference: ~1e-13 / 1e-6 on the growth rate
        for t in (0.05, 0.1):
            r2 = ex3_radii(t)[1]
            assert abs(ex3_flux(t, r2)) < 1e-7

    def test_flux_on_bare_cone_is_pure_transport(self):
        # between the source edge and the pile, all inflow just flows down
        t = 0.05
        r1, _ = ex3_radii(t)
        assert r1 > R0
        for R in np.linspace(R0 + 0.005, r1 - 0.005, 7):
            assert ex3_flux(t, R) == pytest.approx(
                RATE / (2.0 * math.pi * R), rel=1e-9
            )

    def test_flux_at_origin(self):
        assert ex3_flux(0.1, 0.0) == 0.0


class TestRadialSolution:
    def test_ex1_bundle_invariants(self):
        sol = analytic.ex1_solution(0.1)
        rs = np.linspace(0.0, 1.0, 300)
        assert (sol.surface(rs) >= 0.0).all()
        assert sol.flux(0.0) == 0.0
        beyond = rs[rs >= sol.pile_base_radius]
        assert np.abs(sol.flux(beyond)).max() == 0.0

    def test_ex3_bundle_invariants(self):
        sol = analytic.ex3_solution(0.1)
        rs = np.linspace(0.0, 1.0, 300)
        assert (sol.surface(rs) >= 0.0).all()
        assert sol.flux(0.0) == 0.0
        assert sol.pile_base_radius == pytest.approx(0.7306435952327268, abs=1e-9)

    def test_vector_lift_is_radial(self):
        sol = analytic.ex1_solution(0.1)
        fn = sol.flux_vector()
        qx, qy = fn(np.array([0.3, 0.0]), np.array([0.0, 0.25]))
        assert qy[0] == 0.0 and qx[1] == 0.0
        assert qx[0] == pytest.approx(float(sol.flux(0.3)))


class TestErrorMetrics:
    def test_sampled_exact_small_error(self):
        mesh = generate_disk_mesh(1.0, 0.05)
        exact = lambda x, y: analytic.ex1_surface(0.1, np.hypot(x, y))  # noqa: E731
        w = p1_interpolate(exact, mesh)
        assert rel_l1_error_surface(w, exact, mesh) == 0.0

    def test_one_percent_scaling(self, disk_coarse):
        exact = lambda x, y: 1.0 + x * x + y * y  # noqa: E731
        w = p1_interpolate(exact, disk_coarse)
        w101 = NodalField(1.01 * w.values, disk_coarse)
        assert rel_l1_error_surface(w101, exact, disk_coarse) == pytest.approx(
            0.01, rel=1e-12
        )

    def test_zero_reference_rejected(self, disk_coarse):
        w = NodalField(np.zeros(disk_coarse.n_vertices), disk_coarse)
        with pytest.raises(ValueError):
            rel_l1_error_surface(w, lambda x, y: np.zeros_like(x), disk_coarse)

    def test_cell_field_metric(self, disk_coarse):
        exact = lambda x, y: 2.0 - x  # noqa: E731
        c = p0_project(exact, disk_coarse)
        assert rel_l1_error_surface(c, exact, disk_coarse) < 1e-12

    def test_flux_metric_zero_numeric_is_one(self, disk_coarse_topo):
        import numpy as np

        topo = disk_coarse_topo
        mesh = topo.mesh
        from sandflow.fem import EdgeFluxField

        q = EdgeFluxField(np.zeros(topo.n_edges), topo)
        fn = radial_vector_field(lambda R: np.ones_like(R))
        assert rel_l1_error_flux(q, fn, mesh) == pytest.approx(1.0, rel=1e-12)

    def test_flux_metric_interpolant_small(self):
        mesh = generate_disk_mesh(1.0, 0.02)
        topo = build_edge_topology(mesh)
        fn = radial_vector_field(lambda R: np.minimum(R, 1.0 - R))
        q = rt0_interpolate(fn, topo)
        assert rel_l1_error_flux(q, fn, mesh) < 0.05
