import math

import numpy as np
import pytest

from horizonlab.errors import MetricConfigError, MetricDomainError, ParameterError
from horizonlab.metric import (
    acoustic_vortex,
    gordon,
    gordon_radial,
    kerr_restricted,
    parse_metric_config,
    schwarzschild_equatorial,
)

from _oracles import five_point_gradient

RNG = np.random.default_rng(7)


# -- acoustic -----------------------------------------------------------------


def test_acoustic_components_at_unit_point():
    m = acoustic_vortex(-1.0, 0.0)
    g = m.matrix((1.0, 0.0))
    assert g[0, 0] == 1.0
    assert g[0, 1] == pytest.approx(-1.0)
    assert g[0, 2] == pytest.approx(0.0)
    m2 = acoustic_vortex(-1.0, 1.0)
    g2 = m2.matrix((1.0, 0.0))
    assert g2[0, 2] == pytest.approx(1.0)


def test_acoustic_spatial_det_values():
    m = acoustic_vortex(-1.0, 1.0)
    assert m.spatial_det((1.0, 0.0)) == pytest.approx(-1.0)
    r = math.sqrt(2.0)
    assert m.spatial_det((r, 0.0)) == pytest.approx(0.0, abs=1e-14)
    th = 1.1
    assert m.spatial_det((r * math.cos(th), r * math.sin(th))) == pytest.approx(0.0, abs=1e-14)


def test_acoustic_gradient_entry_matches_hand_value():
    # d g^{01} / d x1 at (1, 0) for A=-1, B=0 equals +1
    m = acoustic_vortex(-1.0, 0.0)
    _, dg = m.matrix_and_gradient((1.0, 0.0))
    assert dg[0, 1, 0] == pytest.approx(1.0)


def test_acoustic_g00_identity_against_full_inversion():
    # g_00 (covariant) = Delta / det[g^{jk}]; acoustic det[g^{jk}] = 1 exactly
    m = acoustic_vortex(-1.0, 1.0)
    for _ in range(20):
        x = RNG.uniform(-2.5, 2.5, 2)
        if np.hypot(*x) < 0.3:
            continue
        g = m.matrix(x)
        cov = np.linalg.inv(g)
        det_full = np.linalg.det(g)
        reconstructed = m.spatial_det(x) / det_full
        assert reconstructed == pytest.approx(cov[0, 0], rel=1e-10, abs=1e-10)


def test_acoustic_origin_is_domain_error():
    m = acoustic_vortex(-1.0, 1.0)
    with pytest.raises(MetricDomainError):
        m.matrix((0.0, 0.0))


def test_acoustic_requires_nonzero_flow():
    with pytest.raises(ParameterError):
        acoustic_vortex(0.0, 0.0)


# -- schwarzschild ------------------------------------------------------------


def test_schwarzschild_det_vanishes_at_twice_mass():
    m = schwarzschild_equatorial(1.0)
    assert m.spatial_det((2.0, 0.0)) == pytest.approx(0.0, abs=1e-14)
    assert m.spatial_det((1.0, 0.0)) == pytest.approx(-1.0)
    assert m.spatial_det((4.0, 0.0)) == pytest.approx(0.5)


def test_schwarzschild_g00_positive_inside_and_outside():
    m = schwarzschild_equatorial(1.0)
    for R in (0.5, 1.0, 2.0, 10.0):
        g = m.matrix((R, 0.0))
        assert g[0, 0] == pytest.approx(1.0 + 2.0 / R)


def test_schwarzschild_rejects_nonpositive_mass():
    with pytest.raises(ParameterError):
        schwarzschild_equatorial(0.0)


# -- gordon -------------------------------------------------------------------


def test_gordon_radial_det_root_at_alpha_n_over_c():
    m = gordon_radial(1.0, 1.5, 1.0)
    r = 1.5
    assert m.spatial_det((r, 0.0)) == pytest.approx(0.0, abs=1e-13)
    assert m.spatial_det((2.0, 0.0)) > 0.0
    assert m.spatial_det((1.2, 0.0)) < 0.0


def test_gordon_superluminal_region_is_domain_error():
    m = gordon_radial(1.0, 1.5, 1.0)
    with pytest.raises(MetricDomainError):
        m.matrix((0.5, 0.0))


def test_gordon_matches_direct_inversion_of_covariant_form():
    m = gordon_radial(1.0, 1.5, 1.0)
    for _ in range(10):
        r = RNG.uniform(1.05, 3.0)
        th = RNG.uniform(0, 2 * math.pi)
        x = (r * math.cos(th), r * math.sin(th))
        w = -1.0 * np.asarray(x) / r**2
        gamma = 1.0 / math.sqrt(1.0 - float(w @ w))
        u_cov = gamma * np.array([1.0, -w[0], -w[1]])
        cov = np.diag([1.0, -1.0, -1.0]) + (1.5**-2 - 1.0) * np.outer(u_cov, u_cov)
        assert np.allclose(m.matrix(x) @ cov, np.eye(3), atol=1e-12)


def test_gordon_radial_parameter_validation():
    with pytest.raises(ParameterError):
        gordon_radial(-1.0, 1.5)
    with pytest.raises(ParameterError):
        gordon_radial(1.0, 0.9)
    with pytest.raises(ParameterError):
        gordon_radial(1.0, 1.5, 0.0)


def test_gordon_custom_expressions():
    m = gordon("-x1/8", "-x2/8", "1.5", c=1.0)
    g = m.matrix((1.0, 0.0))
    assert g[0, 0] > 1.0
    assert g[0, 1] < 0.0  # dragged inward


# -- kerr restricted ----------------------------------------------------------


def test_kerr_r_solves_ellipsoidal_relation():
    m, a = 1.0, 0.5
    met = kerr_restricted(m, a)
    for _ in range(20):
        rho = RNG.uniform(0.3, 3.0)
        z = RNG.uniform(-2.0, 2.0)
        if abs(z) < 1e-3 and rho <= abs(a):
            continue
        q = rho * rho + z * z - a * a
        r = math.sqrt(0.5 * (q + math.hypot(q, 2 * a * z)))
        assert rho**2 / (r**2 + a**2) + z**2 / r**2 == pytest.approx(1.0, rel=1e-12)
        # metric evaluates cleanly there
        met.matrix((rho, z))


def test_kerr_det_vanishes_on_both_ellipses():
    m, a = 1.0, 0.5
    met = kerr_restricted(m, a)
    rp = m + math.sqrt(m * m - a * a)
    rm = m - math.sqrt(m * m - a * a)
    for rs in (rp, rm):
        for th in np.linspace(0.1, math.pi - 0.1, 7):
            rho = math.sqrt(rs**2 + a**2) * math.sin(th)
            z = rs * math.cos(th)
            assert met.spatial_det((rho, z)) == pytest.approx(0.0, abs=1e-12)


def test_kerr_det_sign_pattern_along_equator():
    met = kerr_restricted(1.0, 0.5)
    rp = 1.0 + math.sqrt(0.75)
    rm = 1.0 - math.sqrt(0.75)

    def det_at_r(r):
        rho = math.sqrt(r**2 + 0.25)
        return met.spatial_det((rho, 0.0))

    assert det_at_r(rp + 0.3) > 0.0
    assert det_at_r(0.5 * (rp + rm)) < 0.0
    assert det_at_r(0.5 * rm) > 0.0


def test_kerr_reduces_to_schwarzschild_at_zero_spin():
    ks = kerr_restricted(1.0, 0.0)
    sw = schwarzschild_equatorial(1.0)
    for _ in range(10):
        x = RNG.uniform(0.4, 3.0, 2)
        assert np.allclose(ks.matrix(x), sw.matrix(x), atol=1e-13)


def test_kerr_ring_disk_is_domain_error():
    met = kerr_restricted(1.0, 0.5)
    with pytest.raises(MetricDomainError):
        met.matrix((0.2, 0.0))  # inside the r -> 0 disk


# -- exact gradients vs finite differences ------------------------------------


@pytest.mark.parametrize(
    "factory,region",
    [
        (lambda: acoustic_vortex(-1.0, 1.0), (0.4, 3.0)),
        (lambda: gordon_radial(1.0, 1.5, 1.0), (1.1, 3.0)),
        (lambda: schwarzschild_equatorial(1.0), (0.4, 4.0)),
        (lambda: kerr_restricted(1.0, 0.5), (0.6, 3.0)),
    ],
)
def test_gradients_match_five_point_stencil(factory, region):
    met = factory()
    lo, hi = region
    worst = 0.0
    for _ in range(25):
        r = RNG.uniform(lo, hi)
        th = RNG.uniform(0.2, math.pi - 0.2)
        x = np.array([r * math.cos(th), abs(r * math.sin(th))])
        g, dg = met.matrix_and_gradient(x)
        for j in range(3):
            for k in range(j, 3):
                fd = five_point_gradient(lambda p: met.matrix(p)[j, k], x, h=1e-5)
                scale = max(1.0, abs(g[j, k]))
                worst = max(worst, np.max(np.abs(dg[j, k] - fd)) / scale)
    assert worst < 1e-8


def test_batch_matrix_agrees_with_scalar():
    met = acoustic_vortex(-1.0, 1.0)
    xs = RNG.uniform(0.5, 2.0, (40, 2))
    mats, valid = met.matrix_batch((xs[:, 0], xs[:, 1]))
    assert valid.all()
    for i in range(40):
        assert np.allclose(mats[i], met.matrix(xs[i]), atol=1e-14)


def test_batch_marks_invalid_rows():
    met = gordon_radial(1.0, 1.5, 1.0)
    x1 = np.array([2.0, 0.5, 1.2])  # middle point is superluminal
    x2 = np.zeros(3)
    mats, valid = met.matrix_batch((x1, x2))
    assert valid.tolist() == [True, False, True]
    assert np.isnan(mats[1]).all()


def test_batch_gradient_agrees_with_scalar():
    met = kerr_restricted(1.0, 0.5)
    xs = RNG.uniform(0.8, 2.5, (15, 2))
    g, dg, valid = met.matrix_and_gradient_batch((xs[:, 0], xs[:, 1]))
    assert valid.all()
    for i in range(15):
        gs, dgs = met.matrix_and_gradient(xs[i])
        assert np.allclose(g[i], gs, atol=1e-14)
        assert np.allclose(dg[i], dgs, atol=1e-14)


def test_spatial_det_gradient_matches_fd():
    met = acoustic_vortex(-2.0, 1.0)
    for _ in range(10):
        x = RNG.uniform(0.7, 2.2, 2)
        _, grad = met.spatial_det_with_gradient(x)
        fd = five_point_gradient(lambda p: met.spatial_det(p), x, h=1e-5)
        assert np.allclose(grad, fd, rtol=1e-7, atol=1e-8)


# -- TOML configuration -------------------------------------------------------

MINKOWSKI_TOML = """
[metric]
kind = "custom"
n = 2

[components]
g00 = "1"
g01 = "0"
g02 = "0"
g11 = "-1"
g12 = "0"
g22 = "-1"
"""


def test_parse_custom_minkowski():
    met = parse_metric_config(MINKOWSKI_TOML)
    g = met.matrix((0.3, -2.0))
    assert np.allclose(g, np.diag([1.0, -1.0, -1.0]))
    assert met.spatial_det((5.0, 5.0)) == pytest.approx(1.0)


def test_parse_builtin_with_params():
    text = """
[metric]
kind = "acoustic"
[metric.params]
A = -1.0
B = 1.0
"""
    met = parse_metric_config(text)
    assert met.name == "acoustic_vortex"
    assert met.spatial_det((1.0, 0.0)) == pytest.approx(-1.0)


def test_parse_missing_component_reported():
    bad = MINKOWSKI_TOML.replace('g12 = "0"\n', "")
    with pytest.raises(MetricConfigError) as exc:
        parse_metric_config(bad)
    assert "g12" in str(exc.value)


def test_parse_missing_builtin_param():
    text = """
[metric]
kind = "acoustic"
[metric.params]
A = -1.0
"""
    with pytest.raises(MetricConfigError) as exc:
        parse_metric_config(text)
    assert "B" in str(exc.value)


def test_parse_expression_error_carries_position():
    bad = MINKOWSKI_TOML.replace('g01 = "0"', 'g01 = "x1/+2"')
    with pytest.raises(MetricConfigError) as exc:
        parse_metric_config(bad)
    assert exc.value.position == 3


def test_validation_probe_catches_bad_signature():
    text = """
[metric]
kind = "custom"
n = 2

[components]
g00 = "-1"
g01 = "0"
g02 = "0"
g11 = "-1"
g12 = "0"
g22 = "-1"

[validation]
sample_points = [[1.0, 0.0]]
"""
    with pytest.raises(MetricConfigError) as exc:
        parse_metric_config(text)
    assert "g00" in str(exc.value)


def test_unknown_builtin_kind():
    with pytest.raises(MetricConfigError):
        parse_metric_config('[metric]\nkind = "nope"\n')
