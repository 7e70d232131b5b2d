"""Tests for the axisymmetric 3D metrics and their meridian reduction."""

import math

import numpy as np
import pytest

from horizonlab import geodesics, metric
from horizonlab.axisym import (
    AXIS_CLAMP,
    AxisymMetric3D,
    CharacteristicCheck,
    embed_axisymmetric,
    kerr_cylindrical,
    kerr_ergosurfaces,
    kerr_r,
    restrict,
    verify_characteristic,
)
from horizonlab.errors import ParameterError


@pytest.fixture(scope="module")
def m3():
    return kerr_cylindrical(1.0, 0.5)


@pytest.fixture(scope="module")
def m2(m3):
    return restrict(m3)


@pytest.fixture(scope="module")
def surfaces(m3):
    return kerr_ergosurfaces(1.0, 0.5, n_samples=256)


def _null_state(m, x, xi, family):
    hi, lo = geodesics.solve_xi0(m, x, xi)
    return geodesics.GeodesicState(
        x0=0.0, x=np.asarray(x, float), xi=np.asarray(xi, float),
        family=family, xi0=hi if family == "plus" else lo)


class TestEllipsoidalRadius:
    def test_special_slices(self):
        # z = 0 outside the disk, the axis, and the spherical limit
        assert kerr_r(2.0, 0.0, 0.7) == pytest.approx(math.sqrt(4.0 - 0.49), rel=1e-15)
        assert kerr_r(0.0, 1.3, 0.7) == pytest.approx(1.3, rel=1e-15)
        assert kerr_r(1.2, -0.9, 0.0) == pytest.approx(1.5, rel=1e-15)

    def test_implicit_equation_residual(self):
        rng = np.random.default_rng(2024)
        a = 0.7
        rr = rng.uniform(0.05, 5.0, 4000)
        zz = rng.uniform(-5.0, 5.0, 4000)
        keep = ~((np.abs(zz) < 1e-3) & (np.abs(rr) <= a))
        r = kerr_r(rr[keep], zz[keep], a)
        res = rr[keep] ** 2 / (r * r + a * a) + zz[keep] ** 2 / (r * r) - 1.0
        assert np.max(np.abs(res)) < 1e-12

    def test_cancellation_free_branch_near_disk(self):
        # inside the focal disk radius with tiny z the naive closed form
        # cancels catastrophically; the split branch stays exact:
        # r ~ a |z| / sqrt(a^2 - rho^2) = 1.25 z for rho=0.3, a=0.5
        for z0 in (1e-8, 1e-12):
            r = kerr_r(0.3, z0, 0.5)
            assert r == pytest.approx(1.25 * z0, rel=1e-9)
            res = 0.3 ** 2 / (r * r + 0.25) + z0 ** 2 / (r * r) - 1.0
            assert abs(res) < 1e-12

    def test_degenerate_points_rejected(self):
        for bad in [(0.0, 0.0, 0.0), (0.3, 0.0, 0.5), (0.0, 0.0, 0.5)]:
            with pytest.raises(ParameterError, match="focal disk"):
                kerr_r(*bad)

    def test_vectorized_shape(self):
        out = kerr_r(np.ones((3, 4)), np.ones((3, 4)), 0.5)
        assert out.shape == (3, 4)
        assert isinstance(kerr_r(1.0, 1.0, 0.5), float)


class TestAxisymStructure:
    def test_time_component_positive(self, m3):
        rng = np.random.default_rng(5)
        for _ in range(100):
            p = (rng.uniform(0.2, 4.0), rng.uniform(0.0, 6.28), rng.uniform(-3.0, 3.0))
            assert m3.matrix(p)[0, 0] > 1.0

    def test_angle_independence_is_structural(self, m3):
        # the AD gradient with respect to phi vanishes identically, not
        # merely to rounding
        rng = np.random.default_rng(6)
        for _ in range(50):
            p = (rng.uniform(0.2, 4.0), rng.uniform(0.0, 6.28), rng.uniform(-3.0, 3.0))
            _, dg = m3.matrix_and_gradient(p)
            assert np.max(np.abs(dg[:, :, 1])) == 0.0

    def test_reduction_is_the_angular_minor(self, m3, m2):
        # det of the reduced spatial block == the phi-complement minor of
        # the 3D spatial block, exactly (same arithmetic path)
        rng = np.random.default_rng(7)
        for _ in range(50):
            p = np.array([rng.uniform(0.2, 4.0), rng.uniform(0.0, 6.28),
                          rng.uniform(-3.0, 3.0)])
            M = m3.matrix(p)[1:, 1:]
            minor = M[0, 0] * M[2, 2] - M[0, 2] ** 2
            g2 = m2.matrix((p[0], p[2]))
            det2 = g2[1, 1] * g2[2, 2] - g2[1, 2] ** 2
            assert abs(minor - det2) < 1e-14

    def test_restriction_matches_direct_2d_build(self, m3, m2):
        direct = metric.kerr_restricted(1.0, 0.5)
        rng = np.random.default_rng(8)
        for _ in range(50):
            p = (rng.uniform(0.2, 4.0), rng.uniform(-3.0, 3.0))
            assert np.max(np.abs(m2.matrix(p) - direct.matrix(p))) < 1e-14
        assert m2.n == 2
        assert m2.coord_names == ("rho", "z")

    def test_reduced_components_at_probe_point(self, m2):
        # hand algebra at (rho, z) = (2, 0), m=1, a=0.5:
        # r^2 = rho^2 - a^2 = 3.75, K = 2/r, l_rho = r/rho, l_z = 0
        g = m2.matrix((2.0, 0.0))
        r = math.sqrt(3.75)
        assert g[0, 0] == pytest.approx(1.0 + 2.0 / r, abs=1e-14)
        assert g[0, 0] == pytest.approx(2.0327955589886444, abs=1e-12)
        assert g[0, 1] == pytest.approx(-1.0, abs=1e-14)  # -2m/rho exactly
        assert g[1, 1] == pytest.approx((2.0 / r) * (r / 2.0) ** 2 - 1.0, abs=1e-12)
        assert g[1, 1] == pytest.approx(-0.031754163448145856, abs=1e-12)
        assert g[0, 2] == pytest.approx(0.0, abs=1e-15)
        assert g[1, 2] == pytest.approx(0.0, abs=1e-15)
        assert g[2, 2] == pytest.approx(-1.0, abs=1e-15)

    def test_spherical_limit_on_axis(self):
        # at a = 0 the source is spherically symmetric: the meridian metric
        # on the axis slice equals the planar static form at radius |z|
        # (radial direction z, transverse direction rho)
        m2s = restrict(kerr_cylindrical(1.0, 0.0))
        schw = metric.schwarzschild_equatorial(1.0)
        for zval in (2.5, 3.0, 4.0, -3.5):
            g_ax = m2s.matrix((1e-9, zval))
            g_s = schw.matrix((abs(zval), 0.0))
            assert abs(g_ax[0, 0] - g_s[0, 0]) < 1e-14
            assert abs(g_ax[2, 2] - g_s[1, 1]) < 1e-14
            assert abs(g_ax[0, 2] - math.copysign(1.0, zval) * g_s[0, 1]) < 1e-14
            assert abs(g_ax[1, 1] - g_s[2, 2]) < 1e-14

    def test_mass_must_be_positive(self):
        with pytest.raises(ParameterError, match="m > 0"):
            kerr_cylindrical(0.0, 0.5)

    def test_restrict_rejects_planar_input(self):
        with pytest.raises(ParameterError, match="AxisymMetric3D"):
            restrict(metric.acoustic_vortex(-1.0, 1.0))


class TestEmbedding:
    def test_round_trip_returns_original_components(self):
        sw = metric.acoustic_vortex(-1.0, 1.0)
        back = restrict(embed_axisymmetric(sw))
        rng = np.random.default_rng(9)
        for _ in range(50):
            p = (rng.uniform(0.3, 3.0), rng.uniform(0.3, 3.0))
            assert np.array_equal(back.matrix(p), sw.matrix(p))

    def test_lift_has_inert_angle(self):
        sw3 = embed_axisymmetric(metric.acoustic_vortex(-1.0, 1.0))
        assert isinstance(sw3, AxisymMetric3D)
        g = sw3.matrix((1.7, 0.4, 0.9))
        assert g[2, 2] == pytest.approx(-1.0 / 1.7 ** 2, rel=1e-15)
        assert g[0, 2] == g[1, 2] == g[2, 3] == 0.0

    def test_embed_rejects_3d_input(self, m3):
        with pytest.raises(ParameterError, match="2D"):
            embed_axisymmetric(m3)


class TestSurfaceTracing:
    def test_level_radii(self, surfaces):
        assert surfaces.r_plus == pytest.approx(1.0 + math.sqrt(0.75), rel=1e-15)
        assert surfaces.r_minus == pytest.approx(1.0 - math.sqrt(0.75), rel=1e-14)
        assert surfaces.outer.r_level == surfaces.r_plus
        assert surfaces.inner.r_level == surfaces.r_minus

    def test_ellipse_deviation(self, surfaces):
        # first-order normal distance from the sampled points to the
        # matching confocal ellipse; bisection on the metric determinant
        # lands on the analytic curve to rounding
        assert surfaces.outer.ellipse_deviation < 1e-12
        assert surfaces.inner.ellipse_deviation < 1e-12

    def test_ray_scales_match_closed_form(self, surfaces):
        # along the ray at angle t the curve sits at distance
        # s = [cos^2 t/(r^2+a^2) + sin^2 t/r^2]^{-1/2}
        a = 0.5
        for curve in (surfaces.outer, surfaces.inner):
            t = curve.angles[:-1]
            s_exact = 1.0 / np.sqrt(
                np.cos(t) ** 2 / (curve.r_level ** 2 + a * a)
                + np.sin(t) ** 2 / curve.r_level ** 2)
            s_traced = np.hypot(curve.positions[:-1, 0], curve.positions[:-1, 1])
            assert np.max(np.abs(s_traced - s_exact)) < 1e-10

    def test_curves_closed_and_off_axis(self, surfaces):
        for curve in (surfaces.outer, surfaces.inner):
            assert np.array_equal(curve.positions[0], curve.positions[-1])
            assert curve.angles[-1] - curve.angles[0] == pytest.approx(2.0 * math.pi)
            assert np.min(np.abs(curve.positions[:, 0])) >= AXIS_CLAMP

    def test_nesting(self, surfaces):
        r_out = np.hypot(*surfaces.outer.positions.T)
        r_in = np.hypot(*surfaces.inner.positions.T)
        assert r_in.max() < r_out.min()

    def test_determinant_factorization(self, m2, surfaces):
        # det(spatial block) * (r^2 + a^2) == (r - r_plus)(r - r_minus)
        # pointwise, and in particular the sign pattern: positive inside
        # the inner curve and outside the outer one, negative between
        rng = np.random.default_rng(10)
        rr = rng.uniform(0.05, 4.0, 600)
        zz = rng.uniform(-3.0, 3.0, 600)
        rad = kerr_r(rr, zz, 0.5)
        fac = (rad - surfaces.r_plus) * (rad - surfaces.r_minus)
        for rho0, z0, r0, f in zip(rr, zz, rad, fac):
            g = m2.matrix((rho0, z0))
            det = g[1, 1] * g[2, 2] - g[1, 2] ** 2
            assert det * (r0 * r0 + 0.25) == pytest.approx(f, rel=1e-10, abs=1e-12)
        ref = m2.matrix((3.0, 0.0))
        assert ref[1, 1] * ref[2, 2] - ref[1, 2] ** 2 > 0.0

    def test_collapse_of_inner_surface_as_spin_vanishes(self):
        outer_gap = []
        inner_size = []
        for a in (0.5, 0.1, 0.01):
            s = kerr_ergosurfaces(1.0, a, n_samples=64)
            pos_o = s.outer.positions[:-1]
            pos_i = s.inner.positions[:-1]
            outer_gap.append(2.0 - np.max(np.hypot(pos_o[:, 0], pos_o[:, 1])))
            inner_size.append(np.max(np.hypot(pos_i[:, 0], pos_i[:, 1])))
        assert outer_gap[0] < 0.07
        assert outer_gap[1] < 2.6e-3
        assert outer_gap[2] < 2.6e-5
        assert outer_gap[0] > outer_gap[1] > outer_gap[2] > 0.0
        assert inner_size[0] < 0.52
        assert inner_size[1] < 0.072
        assert inner_size[2] < 1.1e-3

    def test_extremal_spin_surfaces_coincide(self):
        # at |a| = m the determinant only touches zero, so the crossing
        # search degenerates; the tangency is found as a minimum instead
        s = kerr_ergosurfaces(1.0, 1.0, n_samples=64)
        assert s.r_plus == s.r_minus == 1.0
        assert np.max(np.abs(s.outer.positions - s.inner.positions)) < 1e-12
        assert s.outer.ellipse_deviation < 1e-6

    def test_parameter_rejection(self):
        with pytest.raises(ParameterError, match="single boundary"):
            kerr_ergosurfaces(1.0, 0.0)
        with pytest.raises(ParameterError, match="no real surface"):
            kerr_ergosurfaces(1.0, 1.5)
        with pytest.raises(ParameterError, match="m > 0"):
            kerr_ergosurfaces(-1.0, 0.5)
        with pytest.raises(ParameterError, match="at least 8"):
            kerr_ergosurfaces(1.0, 0.5, n_samples=4)


class TestCharacteristicVerification:
    def test_outer_surface(self, m2, surfaces):
        chk = verify_characteristic(m2, surfaces.outer.positions[:-1])
        assert isinstance(chk, CharacteristicCheck)
        assert chk.classification == "CharacteristicEverywhere"
        assert chk.orientation == "black_hole"
        assert chk.max_normalized_form < 1e-12
        assert chk.max_delta_residual < 1e-12
        assert chk.orients.min() == pytest.approx(-0.4974, abs=1e-3)
        assert chk.orients.max() == pytest.approx(-0.4641, abs=1e-3)

    def test_inner_surface(self, m2, surfaces):
        # the raw orientation sign on the inner boundary is positive:
        # crossing it outward (determinant gradient direction) the flow
        # points the opposite way to the outer boundary, so the label
        # reads white_hole even though both curves bound one ergo-shell
        chk = verify_characteristic(m2, surfaces.inner.positions[:-1])
        assert chk.classification == "CharacteristicEverywhere"
        assert chk.orientation == "white_hole"
        assert chk.max_normalized_form < 1e-12
        assert (chk.orients > 6.0).all()
        assert chk.orients.max() < 100.0

    def test_embedded_vortex_stays_non_characteristic(self):
        # on the sonic circle of the planar vortex the normalized form is
        # exactly |A^2/Q - 1| = 1/2 and the orientation value is exactly -1
        sw = metric.acoustic_vortex(-1.0, 1.0)
        th = 2.0 * math.pi * (np.arange(64) + 0.5) / 64
        circle = math.sqrt(2.0) * np.column_stack([np.cos(th), np.sin(th)])
        chk = verify_characteristic(sw, circle)
        assert chk.classification == "NonCharacteristicEverywhere"
        assert chk.orientation == "black_hole"
        assert np.max(np.abs(np.abs(chk.normalized_forms) - 0.5)) < 1e-12
        assert np.max(np.abs(chk.orients + 1.0)) < 1e-12

    def test_axis_points_are_clamped(self):
        sw = metric.acoustic_vortex(-1.0, 1.0)
        chk = verify_characteristic(sw, [(0.0, 1.2)])
        assert np.isfinite(chk.normalized_forms).all()
        # value matches the clamped off-axis evaluation
        ref = verify_characteristic(sw, [(AXIS_CLAMP, 1.2)])
        assert chk.normalized_forms[0] == ref.normalized_forms[0]

    def test_sample_shape_guard(self, m2):
        with pytest.raises(ParameterError, match=r"\(k, 2\)"):
            verify_characteristic(m2, np.zeros((4, 3)))


class TestAngularMomentum:
    def test_conserved_exactly_along_flow(self, m3):
        # d xi_phi/dt = -dH/dphi vanishes identically (structural zero in
        # the AD gradient), so the integrator never touches xi_phi at all;
        # Hamiltonian drift stays at integration tolerance in the smooth
        # exterior shell
        rng = np.random.default_rng(99)

        def trap(x):
            try:
                r = kerr_r(x[0], x[2], 0.5)
            except ParameterError:
                return True
            return not (2.05 < r < 25.0 and x[0] > 0.2)

        n_run = 0
        for _ in range(12):
            x0 = np.array([rng.uniform(2.5, 4.5), rng.uniform(0.0, 6.28),
                           rng.uniform(-2.0, 2.0)])
            if kerr_r(x0[0], x0[2], 0.5) < 2.3:
                continue
            xi = rng.normal(size=3)
            xi /= np.linalg.norm(xi)
            for family in ("plus", "minus"):
                st = _null_state(m3, x0, xi, family)
                sol = geodesics.flow(m3, st, t_max=4.0, rtol=1e-10,
                                     atol=1e-13, trapped=trap)
                _, _, xiarr, _ = sol.arrays()
                assert np.max(np.abs(xiarr[:, 1] - xiarr[0, 1])) == 0.0
                assert sol.max_H_drift < 1e-8
                n_run += 1
        assert n_run >= 16

    def test_meridian_velocity_matches_reduction(self, m3, m2):
        rng = np.random.default_rng(99)
        n_pt = 0
        while n_pt < 60:
            x2 = np.array([rng.uniform(0.3, 4.0), rng.uniform(-3.0, 3.0)])
            xi2 = rng.normal(size=2)
            fam = rng.choice(["plus", "minus"])
            x3 = np.array([x2[0], rng.uniform(0.0, 6.28), x2[1]])
            try:
                st2 = _null_state(m2, x2, xi2, fam)
                st3 = _null_state(m3, x3, np.array([xi2[0], 0.0, xi2[1]]), fam)
            except Exception:
                continue  # spacelike spatial part between the surfaces
            assert st3.xi0 == st2.xi0
            v2 = geodesics.velocity(m2, st2)
            v3 = geodesics.velocity(m3, st3)
            assert abs(v3[0] - v2[0]) < 1e-12
            assert abs(v3[2] - v2[1]) < 1e-12
            n_pt += 1

    def test_zero_angular_momentum_flow_reduces(self, m3, m2):
        # a 3D trajectory launched with xi_phi = 0 projects exactly onto
        # the 2D flow of the reduced metric
        rng = np.random.default_rng(99)
        n_cmp = 0
        for k in range(8):
            x0 = np.array([rng.uniform(2.6, 3.6), rng.uniform(0.0, 6.28),
                           rng.uniform(-0.8, 0.8)])
            if kerr_r(x0[0], x0[2], 0.5) < 2.4:
                continue
            xi2 = rng.normal(size=2)
            xi2 /= np.linalg.norm(xi2)
            fam = ("plus", "minus")[k % 2]
            st3 = _null_state(m3, x0, np.array([xi2[0], 0.0, xi2[1]]), fam)
            st2 = _null_state(m2, np.array([x0[0], x0[2]]), xi2, fam)
            s3 = geodesics.flow(m3, st3, t_max=0.6, rtol=1e-12, atol=1e-14)
            s2 = geodesics.flow(m2, st2, t_max=0.6, rtol=1e-12, atol=1e-14)
            _, x3b, q3b, _ = s3.arrays()
            _, x2b, q2b, _ = s2.arrays()
            assert np.max(np.abs(q3b[:, 1])) == 0.0
            assert abs(x3b[-1, 0] - x2b[-1, 0]) < 1e-10
            assert abs(x3b[-1, 2] - x2b[-1, 1]) < 1e-10
            assert abs(q3b[-1, 0] - q2b[-1, 0]) < 1e-10
            assert abs(q3b[-1, 2] - q2b[-1, 1]) < 1e-10
            n_cmp += 1
        assert n_cmp >= 6
