"""Axisymmetric stationary metrics in three space dimensions and their
reduction to the meridian half-plane.

In cylindrical coordinates (rho, phi, z) an axisymmetric inverse metric has
phi-independent coefficients, so the momentum conjugate to phi is conserved
along null geodesics.  Freezing that momentum to zero deletes the phi row
and column and leaves a two-dimensional problem in (rho, z) that the planar
machinery (boundary tracing, classification, geodesic flow, limit cycles)
consumes unchanged.

The rotating-source family is built in horizon-regular form around the
ellipsoidal radius r(rho, z) whose level sets are the confocal ellipses
rho^2/(r^2 + a^2) + z^2/r^2 = 1.  Its reduced spatial determinant factors
exactly through (r - r_plus)(r - r_minus) with r_pm = m +- sqrt(m^2 - a^2),
so the reduction has two nested boundary ellipses, and the quadratic form
on their conormals vanishes: each is an ergosphere that is simultaneously
a horizon of the reduced flow.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from . import dual
from .dual import value
from .ergosphere import (
    CASE_CHARACTERISTIC,
    CASE_MIXED,
    CASE_NONCHARACTERISTIC,
    ORIENT_BLACK,
    ORIENT_INDEFINITE,
    ORIENT_WHITE,
)
from .errors import ParameterError, RootToleranceError
from .metric import SpacetimeMetric

AXIS_CLAMP = 1e-6  # cylindrical coordinates degenerate on rho = 0


def _and_flags(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return np.logical_and(a, b)


class AxisymMetric3D(SpacetimeMetric):
    """Stationary axisymmetric inverse metric in cylindrical coordinates.

    The component evaluators are functions of (rho, z) only, so independence
    of the angle is structural, not numerical.  They are split in two:
    ``meridian_core`` produces the components that survive freezing the
    angular momentum — (00, 0rho, 0z, rhorho, rhoz, zz) — and
    ``angular_core`` produces the phi row (0phi, rhophi, phiphi, phiz).
    The reduced two-dimensional metric is built from the meridian part
    alone and therefore never evaluates the 1/rho^2 coordinate singularity
    of the axis.
    """

    def __init__(self, meridian_core, angular_core, name, params=None):
        def core(xs):
            rho, _phi, z = xs
            mer, ok_m = meridian_core((rho, z))
            ang, ok_a = angular_core((rho, z))
            comps = [
                mer[0], mer[1], ang[0], mer[2],
                mer[3], ang[1], mer[4],
                ang[2], ang[3],
                mer[5],
            ]
            return comps, _and_flags(ok_m, ok_a)

        super().__init__(3, core, name, params, coord_names=("rho", "phi", "z"))
        self._meridian_core = meridian_core


def restrict(m3):
    """The meridian reduction: a 2D metric in (rho, z) with the phi row cut.

    The angular momentum is a constant of motion; setting it to zero turns
    the three-dimensional flow into the planar one this package analyzes.
    """
    if not isinstance(m3, AxisymMetric3D):
        raise ParameterError("restrict expects an AxisymMetric3D")
    return SpacetimeMetric(
        2,
        m3._meridian_core,
        f"{m3.name}_restricted",
        m3.params,
        coord_names=("rho", "z"),
    )


def embed_axisymmetric(m2):
    """Lift a planar metric to a trivially axisymmetric 3D one.

    The plane of ``m2`` becomes the meridian half-plane and the angle is an
    inert flat direction (g^{phiphi} = -1/rho^2, no cross terms), so the
    reduction returns the original planar problem unchanged.
    """
    if m2.n != 2:
        raise ParameterError("embed_axisymmetric expects a 2D metric")

    def angular(xs):
        rho, _z = xs
        rho2 = rho * rho
        comps = [0.0, 0.0, -1.0 / rho2, 0.0]
        return comps, value(rho2) > 0.0

    return AxisymMetric3D(
        m2._core, angular, f"{m2.name}_axisymmetric", m2.params
    )


def kerr_cylindrical(m, a):
    """Rotating source in cylindrical coordinates, horizon-regular form.

    Inverse components eta + K k k^T with the flat cylindrical inverse
    eta = diag(1, -1, -1/rho^2, -1), K = 2 m r^3 / (r^4 + a^2 z^2) and
    k = (1, -l_rho, a/(r^2+a^2), -l_z), l_rho = rho r/(r^2+a^2), l_z = z/r,
    where r is the ellipsoidal radius.  The domain excludes the focal disk
    (z = 0, |rho| <= |a|), where r degenerates to 0.
    """
    m = float(m)
    a = float(a)
    if m <= 0.0:
        raise ParameterError("kerr_cylindrical requires m > 0")
    a2 = a * a

    def pieces(rho, z):
        q = rho * rho + z * z - a2
        h = dual.sqrt(q * q + 4.0 * a2 * (z * z))
        r2 = 0.5 * (q + h)
        r = dual.sqrt(r2)
        r2a2 = r2 + a2
        K = 2.0 * m * r * r2 / (r2 * r2 + a2 * (z * z))
        return r, r2a2, K, rho * r / r2a2, z / r

    def meridian(xs):
        rho, z = xs
        r, _, K, l_rho, l_z = pieces(rho, z)
        comps = [
            1.0 + K,
            -K * l_rho,
            -K * l_z,
            K * l_rho * l_rho - 1.0,
            K * l_rho * l_z,
            K * l_z * l_z - 1.0,
        ]
        return comps, value(r) > 1e-12

    def angular(xs):
        rho, z = xs
        r, r2a2, K, l_rho, l_z = pieces(rho, z)
        w = a / r2a2
        rho2 = rho * rho
        comps = [
            K * w,
            -K * l_rho * w,
            K * w * w - 1.0 / rho2,
            -K * l_z * w,
        ]
        ok = np.logical_and(value(r) > 1e-12, value(rho2) > 0.0)
        return comps, ok

    return AxisymMetric3D(
        meridian, angular, "kerr_cylindrical", {"m": m, "a": a}
    )


def kerr_r(rho, z, a):
    """Ellipsoidal radius: the nonnegative root of rho^2/(r^2+a^2) + z^2/r^2 = 1.

    Closed form r^2 = [q + sqrt(q^2 + 4 a^2 z^2)]/2, q = rho^2 + z^2 - a^2,
    evaluated through the cancellation-free branch when q < 0.  The radius
    degenerates to zero on the focal disk (z = 0, |rho| <= |a|; the origin
    when a = 0), which is rejected.
    """
    r_in = np.asarray(rho, dtype=float)
    z_in = np.asarray(z, dtype=float)
    scalar = r_in.ndim == 0 and z_in.ndim == 0
    a = float(a)
    q = r_in * r_in + z_in * z_in - a * a
    h = np.hypot(q, 2.0 * a * z_in)
    denom = np.where(q < 0.0, h - q, 1.0)  # h - q >= 2|q| on the used branch
    r2 = np.where(q >= 0.0, 0.5 * (q + h), 2.0 * (a * z_in) ** 2 / denom)
    if np.any(r2 <= 0.0):
        raise ParameterError(
            "ellipsoidal radius degenerates to 0 (focal disk z = 0, |rho| <= |a|)"
        )
    r = np.sqrt(r2)
    return float(r) if scalar else r


@dataclass
class MeridianCurve:
    """One traced zero-level curve of the meridian spatial determinant."""

    angles: np.ndarray  # ray angles about the origin, closed (last = first + 2*pi)
    positions: np.ndarray  # (k, 2) samples in (rho, z), axis-clamped, closed
    r_level: float  # ellipsoidal radius this curve realizes
    ellipse_deviation: float  # max normal distance to the matching ellipse


@dataclass
class KerrErgosurfaces:
    """The two nested zero curves of the reduced rotating-source problem."""

    outer: MeridianCurve
    inner: MeridianCurve
    r_plus: float
    r_minus: float
    m: float
    a: float


def _spatial_det_scalar(m2, p):
    g = m2.matrix(p)
    M = g[1:, 1:]
    return float(M[0, 0] * M[1, 1] - M[0, 1] ** 2)


def _clamp_axis(points):
    pts = np.array(points, dtype=float)
    small = np.abs(pts[:, 0]) < AXIS_CLAMP
    pts[small, 0] = np.copysign(AXIS_CLAMP, pts[small, 0])
    return pts


def _ellipse_deviation(pts, r_level, a):
    """First-order normal distance |S| / |grad S| to the level ellipse."""
    den1 = r_level * r_level + a * a
    den2 = r_level * r_level
    S = pts[:, 0] ** 2 / den1 + pts[:, 1] ** 2 / den2 - 1.0
    gn = np.hypot(2.0 * pts[:, 0] / den1, 2.0 * pts[:, 1] / den2)
    return float(np.max(np.abs(S) / gn))


def kerr_ergosurfaces(m, a, n_samples=256):
    """Trace both zero curves of the reduced determinant and match ellipses.

    Along each ray from the origin the ellipsoidal radius grows
    monotonically, so the determinant (positive near the focal disk,
    negative between the two surfaces, positive far out) is bracketed once
    per curve and solved by bisection on the metric itself; the analytic
    ellipses enter only as the independent comparison.  At |a| = m the two
    surfaces coincide and the determinant only touches zero, so the tangency
    is located as a minimum instead of a crossing.
    """
    from .metric import kerr_restricted

    m = float(m)
    a = float(a)
    if m <= 0.0:
        raise ParameterError("kerr_ergosurfaces requires m > 0")
    if a == 0.0:
        raise ParameterError(
            "a = 0 degenerates the inner surface to the center; "
            "the static limit has a single boundary"
        )
    if abs(a) > m:
        raise ParameterError(
            f"|a| = {abs(a):g} exceeds m = {m:g}: no real surface radii"
        )
    if n_samples < 8:
        raise ParameterError("n_samples must be at least 8")

    m2 = kerr_restricted(m, a)
    disc = max(m * m - a * a, 0.0)
    r_plus = m + math.sqrt(disc)
    r_minus = m - math.sqrt(disc)
    extremal = r_plus == r_minus

    def s_at_level(r_level, c1, c2):
        # ray scale with ellipsoidal radius r_level along direction (c1, c2)
        return 1.0 / math.sqrt(
            c1 * c1 / (r_level * r_level + a * a) + c2 * c2 / (r_level * r_level)
        )

    angles = 2.0 * math.pi * (np.arange(n_samples) + 0.5) / n_samples
    outer_pts = np.empty((n_samples, 2))
    inner_pts = np.empty((n_samples, 2))
    for i, t in enumerate(angles):
        c1, c2 = math.cos(t), math.sin(t)

        def det_at(s):
            return _spatial_det_scalar(m2, (s * c1, s * c2))

        if extremal:
            bracket = (
                s_at_level(0.5 * m, c1, c2),
                s_at_level(m, c1, c2),
                s_at_level(2.0 * m, c1, c2),
            )
            res = minimize_scalar(det_at, bracket=bracket, method="brent",
                                  options={"xtol": 1e-12})
            if abs(res.fun) > 1e-8:
                raise RootToleranceError(
                    f"tangency search left determinant {res.fun:.3e} at "
                    f"angle {t:.4f}; surfaces do not touch there"
                )
            s_in = s_out = float(res.x)
        else:
            lo = s_at_level(0.5 * r_minus, c1, c2)
            mid = s_at_level(m, c1, c2)
            hi = s_at_level(r_plus + m, c1, c2)
            s_in = brentq(det_at, lo, mid, xtol=1e-14, rtol=8.9e-16)
            s_out = brentq(det_at, mid, hi, xtol=1e-14, rtol=8.9e-16)
        inner_pts[i] = (s_in * c1, s_in * c2)
        outer_pts[i] = (s_out * c1, s_out * c2)

    inner_pts = _clamp_axis(inner_pts)
    outer_pts = _clamp_axis(outer_pts)
    angles_closed = np.append(angles, angles[0] + 2.0 * math.pi)
    outer = MeridianCurve(
        angles=angles_closed,
        positions=np.vstack([outer_pts, outer_pts[:1]]),
        r_level=r_plus,
        ellipse_deviation=_ellipse_deviation(outer_pts, r_plus, a),
    )
    inner = MeridianCurve(
        angles=angles_closed,
        positions=np.vstack([inner_pts, inner_pts[:1]]),
        r_level=r_minus,
        ellipse_deviation=_ellipse_deviation(inner_pts, r_minus, a),
    )
    return KerrErgosurfaces(
        outer=outer, inner=inner, r_plus=r_plus, r_minus=r_minus, m=m, a=a
    )


@dataclass
class CharacteristicCheck:
    """Pointwise characteristic test of a traced zero set.

    ``normalized_forms`` holds the spatial quadratic form on the unit
    determinant-conormal at each sample divided by the spectral norm of the
    spatial block there — the same scale-invariant measure the planar
    classifier uses.  ``orients`` holds sum_j g^{0j} dDelta/dx_j (negative
    throughout on black-hole-oriented boundaries).
    """

    classification: str
    orientation: str
    max_normalized_form: float
    normalized_forms: np.ndarray
    orients: np.ndarray
    char_tol: float
    max_delta_residual: float  # how far the samples sit off the zero set


def verify_characteristic(m2, samples, char_tol=1e-6):
    """Evaluate the characteristic form and orientation on surface samples.

    ``samples`` are points on (or numerically near) the zero set of the
    spatial determinant of ``m2``; their rho coordinates are clamped away
    from the axis.  The samples are characteristic where the quadratic form
    on the determinant conormal vanishes relative to the block's spectral
    norm; the aggregate trichotomy and the black/white orientation follow
    the planar classifier's conventions.
    """
    pts = _clamp_axis(np.atleast_2d(np.asarray(samples, dtype=float)))
    if pts.shape[1] != 2:
        raise ParameterError("samples must be an (k, 2) array of (rho, z) points")
    forms = np.empty(len(pts))
    orients = np.empty(len(pts))
    residual = 0.0
    for i, p in enumerate(pts):
        det, grad = m2.spatial_det_with_gradient(p)
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= 0.0:
            raise RootToleranceError(
                f"determinant gradient vanished at {tuple(p)}; "
                "the zero set is not a smooth curve there"
            )
        nu = grad / gnorm
        g = m2.matrix(p)
        M = g[1:, 1:]
        scale = float(np.linalg.norm(M, 2))
        forms[i] = float(nu @ M @ nu) / max(scale, 1e-300)
        orients[i] = float(g[0, 1:] @ grad)
        residual = max(residual, abs(float(det)))

    flags = np.abs(forms) < char_tol
    if flags.all():
        classification = CASE_CHARACTERISTIC
    elif not flags.any():
        classification = CASE_NONCHARACTERISTIC
    else:
        classification = CASE_MIXED
    if (orients < 0.0).all():
        orientation = ORIENT_BLACK
    elif (orients > 0.0).all():
        orientation = ORIENT_WHITE
    else:
        orientation = ORIENT_INDEFINITE
    return CharacteristicCheck(
        classification=classification,
        orientation=orientation,
        max_normalized_form=float(np.max(np.abs(forms))),
        normalized_forms=forms,
        orients=orients,
        char_tol=char_tol,
        max_delta_residual=residual,
    )
