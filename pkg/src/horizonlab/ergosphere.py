"""Locate and classify the boundary of the ergoregion.

The ergoregion of a stationary metric is the set where the determinant of
the spatial block of the inverse metric is <= 0; its boundary ("ergosphere")
is the zero level set of that determinant, written Delta throughout.  This
module traces the boundary as a closed polyline by radial root finding from
an interior seed, attaches the degenerate-direction (kernel) vector and the
normal quadratic form at every vertex, and classifies the curve:

- ``CharacteristicEverywhere``: the kernel is parallel to the normal at every
  vertex, so the boundary is itself a characteristic surface (and, with
  negative time orientation, already the event horizon).
- ``NonCharacteristicEverywhere``: the kernel is transversal everywhere; the
  horizon, if any, lies strictly inside and must be found dynamically.
- ``Mixed``: both behaviours occur; reported but never processed further.

Orientation: the sign of sum_j g^{0j} dDelta/dx_j over the curve decides
whether the enclosed region traps future-directed rays (``black_hole``) or
past-directed ones (``white_hole``).
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from ._util import thread_map
from .errors import (
    KernelRankError,
    MetricDomainError,
    NonStarShapedError,
    RootToleranceError,
    SeedError,
)

CASE_CHARACTERISTIC = "CharacteristicEverywhere"
CASE_NONCHARACTERISTIC = "NonCharacteristicEverywhere"
CASE_MIXED = "Mixed"

ORIENT_BLACK = "black_hole"
ORIENT_WHITE = "white_hole"
ORIENT_INDEFINITE = "indefinite"


@dataclass
class ErgoVertex:
    """One traced point of the ergosphere with its local geometric data.

    ``char_form`` is the spatial quadratic form evaluated on the unit outward
    normal; it vanishes exactly where the boundary is characteristic.
    ``orient`` is sum_j g^{0j} dDelta/dx_j (negative on black-hole boundaries).
    ``char_scale`` is the spectral norm of the spatial block, the natural
    scale against which char_form is compared.
    """

    theta: float
    position: np.ndarray
    outward_normal: np.ndarray
    delta_grad: np.ndarray
    null_vector: np.ndarray
    char_form: float
    orient: float
    char_scale: float


@dataclass
class ErgosphereCurve:
    """Closed, angularly ordered polyline of ErgoVertex records.

    The final vertex repeats the first (theta shifted by 2*pi) so the stored
    polyline is explicitly closed.  ``classification`` and ``orientation_sign``
    are filled by :func:`classify` (trace_ergosphere does this on return).
    """

    vertices: list
    seed: tuple
    metric_name: str
    classification: str | None = None
    orientation_sign: str | None = None
    char_tol: float | None = None
    char_flags: np.ndarray | None = field(default=None, repr=False)

    def positions(self):
        """Vertex coordinates, shape (len(vertices), n)."""
        return np.array([v.position for v in self.vertices])

    def thetas(self):
        return np.array([v.theta for v in self.vertices])

    def radii(self):
        """Distance of each vertex from the seed point."""
        p = self.positions()
        return np.hypot(p[:, 0] - self.seed[0], p[:, 1] - self.seed[1])

    def __len__(self):
        return len(self.vertices)


def _delta_or_none(m, x):
    """Spatial determinant, or None where the metric cannot be evaluated.

    Evaluation failures are treated as deep ergoregion interior: the built-in
    families only degenerate at interior singularities (vortex core, optical
    hole, ring disk), where the determinant diverges to -inf.
    """
    try:
        return m.spatial_det(x)
    except MetricDomainError:
        return None


def _is_interior(val):
    return val is None or val < 0.0


def _march_ray(m, seed, u, r_max, t0=1e-6, growth=1.15):
    """Walk outward along seed + t*u; return the first sign-change bracket
    (t_neg, d_neg, t_pos, d_pos) and assert no further sign change up to
    r_max at sample resolution."""
    s = np.asarray(seed, dtype=float)
    samples = []
    t = t0
    while t <= r_max:
        samples.append((t, _delta_or_none(m, s + t * u)))
        t *= growth
    if not _is_interior(samples[0][1]):
        raise SeedError(
            "the sample nearest the seed is already outside the ergoregion; "
            "seed appears to sit on or beyond the boundary — re-seed deeper"
        )
    bracket = None
    for (ta, da), (tb, db) in zip(samples, samples[1:]):
        b_in = _is_interior(db)
        if bracket is None:
            if not b_in:
                bracket = (ta, da, tb, db)
        elif b_in:
            raise NonStarShapedError(
                "ray from seed re-enters the ergoregion after leaving it; "
                "the region is not star-shaped about this seed — re-seed "
                "closer to the centre of the component"
            )
    if bracket is None:
        raise NonStarShapedError(
            f"no boundary crossing within search radius {r_max:g}; "
            "increase r_max or re-seed"
        )
    return bracket


def _refine_valid_negative(m, seed, u, t_lo, t_hi, d_hi):
    """Shrink [t_lo, t_hi] until the left end is an evaluable negative value.

    Needed when the interior sample nearest the boundary is an evaluation
    failure (singular hole touching the boundary region)."""
    s = np.asarray(seed, dtype=float)
    for _ in range(200):
        tm = 0.5 * (t_lo + t_hi)
        dm = _delta_or_none(m, s + tm * u)
        if dm is None:
            t_lo = tm
        elif dm < 0.0:
            return tm, dm, t_hi, d_hi
        elif dm == 0.0:
            return tm, dm, t_hi, d_hi
        else:
            t_hi, d_hi = tm, dm
        if t_hi - t_lo < 1e-14 * max(1.0, t_hi):
            break
    raise RootToleranceError(
        "could not bracket the boundary between the singular interior and "
        "the exterior; the metric degenerates too close to the boundary"
    )


def _root_on_ray(m, seed, u, r_max, tol):
    t_neg, d_neg, t_pos, d_pos = _march_ray(m, seed, u, r_max)
    if d_neg is None:
        t_neg, d_neg, t_pos, d_pos = _refine_valid_negative(m, seed, u, t_neg, t_pos, d_pos)
    if d_neg == 0.0:
        t_star = t_neg
    else:
        s = np.asarray(seed, dtype=float)
        t_star = brentq(
            lambda t: m.spatial_det(s + t * u),
            t_neg,
            t_pos,
            xtol=1e-15,
            rtol=8.8817841970012523e-16,
            maxiter=200,
        )
    x_star = np.asarray(seed, dtype=float) + t_star * u
    d_star = m.spatial_det(x_star)
    # secant slope across the bracket sets the scale for both checks
    slope = abs(d_pos - d_neg) / max(t_pos - t_neg, 1e-300)
    if abs(d_star) > max(tol, 1e3 * np.finfo(float).eps * slope * t_star):
        raise RootToleranceError(
            f"boundary root of the determinant converged to |Delta|={abs(d_star):.3e}, "
            f"above tolerance {tol:g}"
        )
    return t_star, x_star, slope


def null_kernel(m, p, rank_tol=1e-8):
    """Unit vector annihilated by the spatial block at a boundary point.

    The spatial block must have rank n-1 there (one degenerate direction).
    The sign is fixed to point into the ergoregion: negative projection on
    the determinant gradient whenever that projection is nonzero.
    """
    g = m.matrix(p)
    M = g[1:, 1:]
    scale = float(np.linalg.norm(M, 2))
    if scale == 0.0:
        raise KernelRankError("spatial block vanishes entirely (rank 0)")
    if m.n == 2:
        c1 = np.array([M[1, 1], -M[0, 1]])
        c2 = np.array([M[0, 1], -M[0, 0]])
        e = c1 if np.linalg.norm(c1) >= np.linalg.norm(c2) else c2
        norm = np.linalg.norm(e)
        if norm <= rank_tol * scale:
            raise KernelRankError(
                "spatial block is degenerate beyond rank n-1 at this point"
            )
        resid = float(np.linalg.norm(M @ (e / norm)))
        if resid > rank_tol * scale:
            raise KernelRankError(
                f"spatial block has full rank at {tuple(np.asarray(p))}: "
                f"|M e| = {resid:.3e} exceeds {rank_tol:g} * |M|"
            )
        e = e / norm
    else:
        w, vecs = np.linalg.eigh(M)
        order = np.argsort(np.abs(w))
        if abs(w[order[0]]) > rank_tol * scale:
            raise KernelRankError("spatial block has full rank at this point")
        if m.n > 1 and abs(w[order[1]]) <= rank_tol * scale:
            raise KernelRankError("spatial block is degenerate beyond rank n-1")
        e = vecs[:, order[0]]
    _, grad = m.spatial_det_with_gradient(p)
    proj = float(e @ grad)
    if abs(proj) > 1e-12 * max(1.0, float(np.linalg.norm(grad))):
        if proj > 0.0:
            e = -e
    return e


def char_form(m, p, nu):
    """Spatial quadratic form sum_jk g^{jk} nu_j nu_k at p."""
    g = m.matrix(p)
    nu = np.asarray(nu, dtype=float)
    return float(nu @ g[1:, 1:] @ nu)


def trace_ergosphere(m, seed, n_rays=256, tol=1e-10, r_max=1e3, char_tol=1e-6,
                     grad_floor=1e-8):
    """Trace the ergoregion boundary by radial root finding from a seed.

    The ergoregion component containing ``seed`` must be star-shaped about
    it: each of the n_rays equally spaced rays must cross the boundary
    exactly once before r_max (checked at sample resolution).  Points where
    the metric cannot be evaluated count as interior; the built-in families
    only degenerate inside their ergoregions.

    Returns a classified :class:`ErgosphereCurve`; raises SeedError,
    NonStarShapedError, RootToleranceError, or KernelRankError.
    """
    if m.n != 2:
        raise SeedError("boundary tracing is implemented for 2 spatial dimensions")
    seed = (float(seed[0]), float(seed[1]))
    d_seed = _delta_or_none(m, seed)
    if not _is_interior(d_seed):
        raise SeedError(
            f"seed not in ergoregion: determinant {d_seed:.6g} >= 0 at {seed}"
        )
    if n_rays < 3:
        raise SeedError("n_rays must be at least 3")

    thetas = 2.0 * math.pi * np.arange(n_rays) / n_rays

    def solve(theta):
        u = np.array([math.cos(theta), math.sin(theta)])
        return _root_on_ray(m, seed, u, r_max, tol)

    roots = thread_map(solve, thetas)

    vertices = []
    prev_e = None
    for theta, (t_star, x_star, slope) in zip(thetas, roots):
        d_val, grad = m.spatial_det_with_gradient(x_star)
        gnorm = float(np.linalg.norm(grad))
        if gnorm < grad_floor * max(slope, 1e-300):
            raise RootToleranceError(
                f"determinant gradient {gnorm:.3e} at boundary point "
                f"{tuple(x_star)} is below {grad_floor:g} of the crossing "
                "slope; the boundary is not smooth there"
            )
        nu = grad / gnorm
        e = null_kernel(m, x_star)
        if prev_e is not None and abs(float(e @ nu)) <= 1e-12:
            if float(e @ prev_e) < 0.0:
                e = -e
        prev_e = e
        g = m.matrix(x_star)
        M = g[1:, 1:]
        vertices.append(
            ErgoVertex(
                theta=float(theta),
                position=x_star,
                outward_normal=nu,
                delta_grad=grad,
                null_vector=e,
                char_form=float(nu @ M @ nu),
                orient=float(g[0, 1:] @ grad),
                char_scale=float(np.linalg.norm(M, 2)),
            )
        )

    # inward probes: a short step against the normal must land in Delta < 0
    for v in vertices:
        depth = 1e-4 * max(float(np.hypot(*(v.position - np.asarray(seed)))), 1e-6)
        probe = _delta_or_none(m, v.position - depth * v.outward_normal)
        if not _is_interior(probe) and not (probe is not None and probe < tol):
            raise NonStarShapedError(
                f"inward probe at theta={v.theta:.4f} found determinant "
                f"{probe:.3e} >= 0; traced curve does not bound the ergoregion"
            )

    first = vertices[0]
    closing = ErgoVertex(
        theta=2.0 * math.pi,
        position=first.position.copy(),
        outward_normal=first.outward_normal.copy(),
        delta_grad=first.delta_grad.copy(),
        null_vector=first.null_vector.copy(),
        char_form=first.char_form,
        orient=first.orient,
        char_scale=first.char_scale,
    )
    vertices.append(closing)

    curve = ErgosphereCurve(vertices=vertices, seed=seed, metric_name=m.name)
    classify(curve, char_tol=char_tol)
    return curve


def classify(curve, char_tol=1e-6):
    """Assign the characteristic trichotomy and time orientation to a curve.

    A vertex counts as characteristic when |char_form| < char_tol times the
    spectral norm of the spatial block there (scale-invariant test).
    Returns (classification, orientation_sign) and stores both on the curve.
    """
    flags = np.array(
        [abs(v.char_form) < char_tol * max(v.char_scale, 1e-300) for v in curve.vertices]
    )
    if flags.all():
        classification = CASE_CHARACTERISTIC
    elif not flags.any():
        classification = CASE_NONCHARACTERISTIC
    else:
        classification = CASE_MIXED

    orients = np.array([v.orient for v in curve.vertices])
    if (orients < 0.0).all():
        orientation = ORIENT_BLACK
    elif (orients > 0.0).all():
        orientation = ORIENT_WHITE
    else:
        orientation = ORIENT_INDEFINITE

    curve.classification = classification
    curve.orientation_sign = orientation
    curve.char_tol = char_tol
    curve.char_flags = flags
    return classification, orientation
