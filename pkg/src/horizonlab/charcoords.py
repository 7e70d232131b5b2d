"""Collar coordinates on the ergoregion strip and the characteristic
half-plane map.

The strip between the ergosphere and the horizon carries natural curvilinear
coordinates: theta runs along the boundary (arclength, normalized to 2*pi)
and rho = -(spatial determinant) measures depth, so rho = 0 is exactly the
boundary.  Points are carried inward along gradient-descent transversals of
the determinant, which makes rho exact by construction and leaves theta
constant along each transversal.

In these coordinates the spatial part of the inverse metric degenerates
linearly at rho = 0, and the two root fields mu+/mu- of its characteristic
quadratic define two foliations by level curves.  Transporting the boundary
parameter along each foliation yields a pair of scalar fields whose half-sum
and half-difference map the strip onto a half-plane with the boundary going
to the edge — a characteristic straightening of the degenerate-hyperbolic
band.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline, RectBivariateSpline

from ._util import stable_quadratic
from .errors import CoverageError, ParameterError, TangencyError

_TWO_PI = 2.0 * math.pi


class _PeriodicSurface:
    """Bicubic interpolant on (rho, theta) with periodic wrap in theta."""

    def __init__(self, rho_grid, theta_grid, values, margin=8):
        k = len(theta_grid)
        mg = min(margin, k)
        th = np.concatenate(
            (theta_grid[-mg:] - _TWO_PI, theta_grid, theta_grid[:mg] + _TWO_PI)
        )
        vv = np.concatenate((values[:, -mg:], values, values[:, :mg]), axis=1)
        ky = 3 if len(th) > 3 else 1
        kx = 3 if len(rho_grid) > 3 else 1
        self._spl = RectBivariateSpline(rho_grid, th, vv, kx=kx, ky=ky, s=0)

    def __call__(self, rho, theta):
        r = np.asarray(rho, dtype=float)
        t = np.mod(np.asarray(theta, dtype=float), _TWO_PI)
        out = self._spl.ev(r, t)
        return out


@dataclass
class CollarChart:
    """Curvilinear chart (rho, theta) on a band inside the ergosphere.

    rho(x) = -(spatial determinant) exactly; theta is the boundary arclength
    parameter (total 2*pi), constant along inward gradient transversals.
    """

    metric: object
    rho_grid: np.ndarray
    theta_grid: np.ndarray
    nodes: np.ndarray  # (n_rho, n_theta, 2) polished node positions
    depth: float
    boundary: CubicSpline  # periodic, theta -> boundary point
    grad_rho: np.ndarray  # (n_rho, n_theta, 2) exact rows of the inverse Jacobian
    grad_theta: np.ndarray
    det_forward: np.ndarray  # (n_rho, n_theta) det d(x)/d(rho,theta)
    consistency: float  # worst relative gap between exact and inverted rho-row
    _sx: _PeriodicSurface = field(repr=False, default=None)
    _sy: _PeriodicSurface = field(repr=False, default=None)
    _bdense: tuple = field(repr=False, default=None)

    def to_xy(self, rho, theta):
        """Forward map; accepts scalars or broadcastable arrays."""
        x = self._sx(rho, theta)
        y = self._sy(rho, theta)
        return np.stack([x, y], axis=-1)

    def rho_of(self, points):
        """Exact depth coordinate of Cartesian points, shape (k, 2) -> (k,)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        det, valid = self.metric.spatial_det_batch((pts[:, 0], pts[:, 1]))
        if not np.all(valid):
            raise ParameterError("point outside the metric domain")
        return -det

    def theta_of(self, point):
        """Boundary parameter of one point: ascend the transversal to rho=0."""
        p = np.asarray(point, dtype=float)
        det, grad = self.metric.spatial_det_with_gradient(p)
        rho = -det
        if rho < -1e-12:
            raise ParameterError("point lies outside the ergoregion")
        if rho > 1e-12:

            def up(_r, x):
                _d, g = self.metric.spatial_det_with_gradient(x)
                g2 = float(g @ g)
                if g2 < 1e-28:
                    raise ParameterError("determinant gradient vanished on a transversal")
                return -g / g2

            sol = solve_ivp(
                up, (rho, 0.0), p, method="RK45", rtol=1e-11, atol=1e-13
            )
            if sol.status != 0:
                raise ParameterError(f"transversal ascent failed: {sol.message}")
            p = sol.y[:, -1]
        th_dense, b_dense = self._bdense
        i = int(np.argmin((b_dense[:, 0] - p[0]) ** 2 + (b_dense[:, 1] - p[1]) ** 2))
        th = th_dense[i]
        for _ in range(4):
            b = self.boundary(th)
            db = self.boundary(th, 1)
            d2b = self.boundary(th, 2)
            r = b - p
            h = float(r @ db)
            hp = float(db @ db + r @ d2b)
            if hp == 0.0:
                break
            th -= h / hp
        return float(np.mod(th, _TWO_PI))

    def from_xy(self, point):
        """Inverse map for one point -> (rho, theta)."""
        rho = float(self.rho_of(np.asarray(point)[None, :])[0])
        return rho, self.theta_of(point)


@dataclass
class PulledBackMetric:
    """Inverse-metric components in collar coordinates on the band.

    Spatial block entries g^{rr}, g^{rt}, g^{tt} (r = rho, t = theta) plus
    the time row; the spatial 2x2 determinant vanishes linearly at rho = 0
    and is negative inside.
    """

    chart: CollarChart
    rho_grid: np.ndarray
    theta_grid: np.ndarray
    g_rr: np.ndarray
    g_rt: np.ndarray
    g_tt: np.ndarray
    g_0r: np.ndarray
    g_0t: np.ndarray
    g_00: np.ndarray
    delta_tilde_grid: np.ndarray  # node-exact: det(A)^2 * (spatial determinant)
    depth: float
    _surfaces: dict = field(repr=False, default=None)

    @property
    def desing_eps(self):
        return 1e-4 * self.depth

    def components(self, rho, theta):
        """(g_rr, g_rt, g_tt, g_0r, g_0t, g_00) interpolated at (rho, theta)."""
        s = self._surfaces
        return tuple(
            s[k](rho, theta) for k in ("rr", "rt", "tt", "0r", "0t", "00")
        )

    def delta_tilde(self, rho, theta):
        """Spatial 2x2 determinant in collar coordinates (from components)."""
        s = self._surfaces
        rr = s["rr"](rho, theta)
        rt = s["rt"](rho, theta)
        tt = s["tt"](rho, theta)
        return rr * tt - rt * rt


def build_collar(m, curve, depth, n_rho=64, n_theta=256):
    """Build the collar chart and the pulled-back metric on a band.

    ``curve`` is a traced ergosphere (non-characteristic case); ``depth`` is
    how far inward (in units of -determinant) the band extends.  Transversals
    are gradient-descent lines of the determinant, re-polished so that the
    depth coordinate is exact at every node.
    """
    if depth <= 0.0:
        raise ParameterError("collar depth must be positive")
    if n_rho < 4 or n_theta < 8:
        raise ParameterError("collar grid too coarse (need n_rho >= 4, n_theta >= 8)")

    pts = curve.positions()
    if not np.allclose(pts[0], pts[-1], atol=1e-12):
        pts = np.vstack([pts, pts[0]])
    pts = pts.copy()
    pts[-1] = pts[0]
    seg = np.sqrt(np.sum(np.diff(pts, axis=0) ** 2, axis=1))
    s_cum = np.concatenate(([0.0], np.cumsum(seg)))
    total = s_cum[-1]
    if total <= 0.0:
        raise ParameterError("degenerate boundary polyline")
    th_nodes = _TWO_PI * s_cum / total
    boundary = CubicSpline(th_nodes, pts, bc_type="periodic", axis=0)
    # chord length under-measures curved segments unevenly; reparameterize by
    # the true arclength of the fitted curve so theta advances uniformly
    gl_x, gl_w = np.polynomial.legendre.leggauss(6)
    a, b = th_nodes[:-1], th_nodes[1:]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    quad = np.zeros_like(a)
    for q_x, q_w in zip(gl_x, gl_w):
        speed = np.sqrt(np.sum(boundary(mid + q_x * half, 1) ** 2, axis=1))
        quad += q_w * speed
    arc = np.concatenate(([0.0], np.cumsum(quad * half)))
    th_nodes = _TWO_PI * arc / arc[-1]
    boundary = CubicSpline(th_nodes, pts, bc_type="periodic", axis=0)

    theta_grid = np.linspace(0.0, _TWO_PI, n_theta, endpoint=False)
    rho_grid = np.linspace(0.0, depth, n_rho)
    start = boundary(theta_grid)  # (n_theta, 2)

    def rhs(_rho, y):
        p = y.reshape(-1, 2)
        det, grad, valid = m.spatial_det_with_gradient_batch((p[:, 0], p[:, 1]))
        if not np.all(valid):
            raise ParameterError(
                "transversal left the metric domain — reduce the collar depth"
            )
        g2 = np.sum(grad * grad, axis=1)
        if np.any(g2 < 1e-28):
            raise ParameterError(
                "determinant gradient vanished on a transversal — reduce depth"
            )
        return (-grad / g2[:, None]).ravel()

    sol = solve_ivp(
        rhs,
        (0.0, depth),
        start.ravel(),
        t_eval=rho_grid,
        method="RK45",
        rtol=1e-11,
        atol=1e-13,
    )
    if sol.status != 0:
        raise ParameterError(f"transversal integration failed: {sol.message}")
    nodes = sol.y.T.reshape(n_rho, n_theta, 2).copy()

    # enforce rho = -(determinant) exactly at every node
    grad_nodes = np.empty_like(nodes)
    det_nodes = np.empty((n_rho, n_theta))
    for i, rho_i in enumerate(rho_grid):
        row = nodes[i]
        for _ in range(10):
            det, grad, valid = m.spatial_det_with_gradient_batch((row[:, 0], row[:, 1]))
            if not np.all(valid):
                raise ParameterError("node polish left the metric domain")
            err = det + rho_i
            g2 = np.sum(grad * grad, axis=1)
            if np.any(g2 < 1e-28):
                raise ParameterError("determinant gradient vanished at a node")
            if np.max(np.abs(err)) < 1e-13 * (1.0 + rho_i):
                break
            row -= (err / g2)[:, None] * grad
        else:
            raise ParameterError(
                f"depth enforcement did not converge at rho = {rho_i:.4g}"
            )
        grad_nodes[i] = grad
        det_nodes[i] = det

    # chart Jacobian columns: d x/d rho exact, d x/d theta from row splines
    g2 = np.sum(grad_nodes * grad_nodes, axis=2)
    t_rho = -grad_nodes / g2[..., None]
    t_theta = np.empty_like(nodes)
    th_closed = np.append(theta_grid, _TWO_PI)
    for i in range(n_rho):
        closed = np.vstack([nodes[i], nodes[i][:1]])
        row_spl = CubicSpline(th_closed, closed, bc_type="periodic", axis=0)
        t_theta[i] = row_spl(theta_grid, 1)
    det_fwd = t_rho[..., 0] * t_theta[..., 1] - t_rho[..., 1] * t_theta[..., 0]
    sgn = np.sign(det_fwd)
    if np.any(sgn == 0.0) or not (np.all(sgn > 0) or np.all(sgn < 0)):
        raise ParameterError(
            "chart Jacobian changes sign: transversals cross inside the band — "
            "reduce the collar depth"
        )

    grad_rho = -grad_nodes  # exact conormal of the depth coordinate
    grad_theta = (
        np.stack([-t_rho[..., 1], t_rho[..., 0]], axis=-1) / det_fwd[..., None]
    )
    # diagnostic: the inverted Jacobian must reproduce the exact rho-row
    inv_row = (
        np.stack([t_theta[..., 1], -t_theta[..., 0]], axis=-1) / det_fwd[..., None]
    )
    scale = np.sqrt(np.sum(grad_rho**2, axis=2)) + 1e-300
    consistency = float(
        np.max(np.sqrt(np.sum((inv_row - grad_rho) ** 2, axis=2)) / scale)
    )

    flat = nodes.reshape(-1, 2)
    mats, valid = m.matrix_batch((flat[:, 0], flat[:, 1]))
    if not np.all(valid):
        raise ParameterError("metric invalid at a collar node")
    mats = mats.reshape(n_rho, n_theta, 3, 3)
    spatial = mats[..., 1:, 1:]
    g0 = mats[..., 0, 1:]

    def form(a, b):
        return np.einsum("ijk,ijkl,ijl->ij", a, spatial, b)

    g_rr = form(grad_rho, grad_rho)
    g_rt = form(grad_rho, grad_theta)
    g_tt = form(grad_theta, grad_theta)
    g_0r = np.einsum("ijk,ijk->ij", g0, grad_rho)
    g_0t = np.einsum("ijk,ijk->ij", g0, grad_theta)
    g_00 = mats[..., 0, 0]
    det_a = (
        grad_rho[..., 0] * grad_theta[..., 1] - grad_rho[..., 1] * grad_theta[..., 0]
    )
    delta_tilde_grid = det_a**2 * det_nodes

    chart = CollarChart(
        metric=m,
        rho_grid=rho_grid,
        theta_grid=theta_grid,
        nodes=nodes,
        depth=float(depth),
        boundary=boundary,
        grad_rho=grad_rho,
        grad_theta=grad_theta,
        det_forward=det_fwd,
        consistency=consistency,
        _sx=_PeriodicSurface(rho_grid, theta_grid, nodes[..., 0]),
        _sy=_PeriodicSurface(rho_grid, theta_grid, nodes[..., 1]),
    )
    th_dense = np.linspace(0.0, _TWO_PI, 8 * n_theta, endpoint=False)
    chart._bdense = (th_dense, boundary(th_dense))

    surfaces = {
        "rr": _PeriodicSurface(rho_grid, theta_grid, g_rr),
        "rt": _PeriodicSurface(rho_grid, theta_grid, g_rt),
        "tt": _PeriodicSurface(rho_grid, theta_grid, g_tt),
        "0r": _PeriodicSurface(rho_grid, theta_grid, g_0r),
        "0t": _PeriodicSurface(rho_grid, theta_grid, g_0t),
        "00": _PeriodicSurface(rho_grid, theta_grid, g_00),
    }
    pb = PulledBackMetric(
        chart=chart,
        rho_grid=rho_grid,
        theta_grid=theta_grid,
        g_rr=g_rr,
        g_rt=g_rt,
        g_tt=g_tt,
        g_0r=g_0r,
        g_0t=g_0t,
        g_00=g_00,
        delta_tilde_grid=delta_tilde_grid,
        depth=float(depth),
        _surfaces=surfaces,
    )
    return chart, pb


def mu_pm(pb, rho, theta):
    """The two slope fields of the characteristic quadratic at (rho, theta).

    Roots mu of g_rr mu^2 + 2 g_rt mu + g_tt = 0; mu_plus carries the +sqrt
    branch of (-g_rt +/- sqrt(g_rt^2 - g_rr g_tt)) / g_rr.  Strict interior
    only (rho > 0); the two roots coalesce in the rho -> 0 limit.
    """
    r = np.asarray(rho, dtype=float)
    scalar = r.ndim == 0 and np.asarray(theta).ndim == 0
    if np.any(r <= 0.0):
        raise ParameterError("characteristic slopes need the strict interior (rho > 0)")
    grr, grt, gtt, _, _, _ = pb.components(r, theta)
    grr = np.asarray(grr, dtype=float)
    grt = np.asarray(grt, dtype=float)
    gtt = np.asarray(gtt, dtype=float)
    scale = np.maximum(np.abs(grr), np.maximum(np.abs(grt), np.abs(gtt)))
    if np.any(np.abs(grr) <= 1e-12 * scale):
        raise TangencyError(
            "the depth direction is characteristic here (g_rr = 0); "
            "rotate the section before solving for slopes"
        )
    hi, lo = stable_quadratic(grr, grt, gtt)
    plus = np.where(grr > 0.0, hi, lo)
    minus = np.where(grr > 0.0, lo, hi)
    if scalar:
        return float(plus), float(minus)
    return plus, minus


@dataclass
class CharLevelCurve:
    """One level curve of the transported boundary parameter."""

    family: str
    theta0: float
    rho: np.ndarray
    theta: np.ndarray


def integrate_level_curve(pb, theta0, family, rho_cap=None, n_samples=256):
    """Trace the level curve with label theta0 of the chosen slope family.

    Launched at the desingularization depth eps (the slope roots coalesce on
    the boundary itself) and integrated inward as d theta/d rho = -mu.
    Parameterizing by depth keeps the equation regular where the theta-slope
    of the curve degenerates.
    """
    if family not in ("plus", "minus"):
        raise ParameterError(f"unknown family {family!r} (use 'plus' or 'minus')")
    eps = pb.desing_eps
    cap = 0.95 * pb.depth if rho_cap is None else float(rho_cap)
    cap = min(cap, 0.999 * pb.depth)
    if cap <= 2.0 * eps:
        raise ParameterError("level-curve cap is not above the launch depth")
    idx = 0 if family == "plus" else 1

    def rhs(rho, th):
        mu = mu_pm(pb, rho, np.asarray(th))
        return -np.asarray(mu[idx], dtype=float)

    t_eval = np.linspace(eps, cap, n_samples)
    sol = solve_ivp(
        rhs,
        (eps, cap),
        [float(theta0)],
        t_eval=t_eval,
        method="RK45",
        rtol=1e-10,
        atol=1e-12,
    )
    if sol.status != 0:
        raise ParameterError(f"level-curve integration failed: {sol.message}")
    return CharLevelCurve(
        family=family, theta0=float(theta0), rho=t_eval, theta=sol.y[0].copy()
    )


@dataclass
class CharField:
    """Gridded transported-parameter fields on the strip.

    S_plus/S_minus hold the boundary label carried along each slope family;
    the boundary row is the identity.  c1 is the fitted linear-vanishing rate
    of -delta_tilde in rho near the boundary.
    """

    pb: PulledBackMetric
    rho_grid: np.ndarray
    theta_grid: np.ndarray
    S_plus: np.ndarray
    S_minus: np.ndarray
    delta_tilde: np.ndarray
    c1: float
    c1_r_squared: float
    c1_window: tuple
    _res_plus: _PeriodicSurface = field(repr=False, default=None)
    _res_minus: _PeriodicSurface = field(repr=False, default=None)

    def eval_S(self, family, rho, theta):
        """Interpolated field value; equivariant under theta -> theta + 2*pi."""
        surf = self._res_plus if family == "plus" else self._res_minus
        t = np.asarray(theta, dtype=float)
        out = surf(rho, t) + t
        return float(out) if out.ndim == 0 else out

    def grad_S(self, family, rho, theta):
        """(dS/drho, dS/dtheta) from spline partials of the periodic residual."""
        surf = self._res_plus if family == "plus" else self._res_minus
        r = np.asarray(rho, dtype=float)
        t = np.mod(np.asarray(theta, dtype=float), _TWO_PI)
        s_r = surf._spl.ev(r, t, dx=1)
        s_t = 1.0 + surf._spl.ev(r, t, dy=1)
        return s_r, s_t


def build_char_field(pb, horizon, n_rho=128, n_theta=256, oversample=2,
                     horizon_margin=0.9):
    """Transport the boundary parameter along both slope families onto a grid.

    The band is capped strictly short of the shallowest horizon depth
    (``horizon_margin`` of it): on the horizon itself the depth conormal is
    null, one slope family diverges, and its level curves wind forever
    without reaching that depth.  The deepest grid row is therefore the
    near-horizon row, not the horizon itself.
    """
    chart = pb.chart
    eps = pb.desing_eps
    if not (0.0 < horizon_margin < 1.0):
        raise ParameterError("horizon_margin must lie in (0, 1)")
    if horizon is not None:
        rho0 = chart.rho_of(horizon.positions())
        cap = min(0.98 * pb.depth, horizon_margin * float(np.min(rho0)))
    else:
        cap = 0.98 * pb.depth
    if cap <= 10.0 * eps:
        raise ParameterError("collar band is too shallow for a field grid")
    rho_grid = np.linspace(0.0, cap, n_rho)
    if rho_grid[1] <= 2.0 * eps:
        raise ParameterError(
            "field grid finer than the desingularization depth; lower n_rho"
        )
    theta_grid = np.linspace(0.0, _TWO_PI, n_theta, endpoint=False)

    k_launch = oversample * n_theta
    labels = np.linspace(0.0, _TWO_PI, k_launch, endpoint=False)
    fields = {}
    for family, idx in (("plus", 0), ("minus", 1)):

        def rhs(rho, th, _i=idx):
            mu = mu_pm(pb, float(rho) * np.ones_like(th), th)
            return -np.asarray(mu[_i], dtype=float)

        sol = solve_ivp(
            rhs,
            (eps, cap),
            labels.copy(),
            t_eval=rho_grid[1:],
            method="RK45",
            rtol=1e-10,
            atol=1e-12,
        )
        if sol.status != 0:
            raise CoverageError(f"characteristic transport failed: {sol.message}")
        S = np.empty((n_rho, n_theta))
        S[0] = theta_grid
        for i in range(1, n_rho):
            crossings = sol.y[:, i - 1]
            wrapped = np.append(np.diff(crossings), crossings[0] + _TWO_PI - crossings[-1])
            if np.any(wrapped <= 0.0):
                raise CoverageError(
                    f"{family} level curves cross at depth {rho_grid[i]:.4g}; "
                    "refine the launch set or reduce the band"
                )
            ext_x = np.concatenate(
                (crossings - _TWO_PI, crossings, crossings + _TWO_PI)
            )
            ext_y = np.concatenate((labels - _TWO_PI, labels, labels + _TWO_PI))
            S[i] = CubicSpline(ext_x, ext_y)(theta_grid)
        fields[family] = S

    mesh_r, mesh_t = np.meshgrid(rho_grid, theta_grid, indexing="ij")
    dt = pb.delta_tilde(mesh_r.ravel(), mesh_t.ravel()).reshape(n_rho, n_theta)

    # asymptotic slope of -delta_tilde at rho -> 0: shrink the fit window
    # until the linear model explains the data (or the row floor is hit)
    def fit(window):
        mask = (rho_grid > 0.0) & (rho_grid <= window)
        if np.count_nonzero(mask) < 3:
            mask = np.zeros_like(rho_grid, dtype=bool)
            mask[1:4] = True
        xw = np.repeat(rho_grid[mask], n_theta)
        yw = (-dt[mask]).ravel()
        slope = float(np.sum(xw * yw) / np.sum(xw * xw))
        ss_res = float(np.sum((yw - slope * xw) ** 2))
        ss_tot = float(np.sum((yw - np.mean(yw)) ** 2))
        rsq = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else 1.0
        return slope, rsq, int(np.count_nonzero(mask)), float(rho_grid[mask][-1])

    window_hi = 0.1 * pb.depth
    c1, r2, n_rows, window_hi = fit(window_hi)
    while r2 < 0.995 and n_rows > 4:
        c1, r2, n_rows, window_hi = fit(0.5 * window_hi)

    res_plus = fields["plus"] - theta_grid[None, :]
    res_minus = fields["minus"] - theta_grid[None, :]
    return CharField(
        pb=pb,
        rho_grid=rho_grid,
        theta_grid=theta_grid,
        S_plus=fields["plus"],
        S_minus=fields["minus"],
        delta_tilde=dt,
        c1=c1,
        c1_r_squared=r2,
        c1_window=(0.0, float(window_hi)),
        _res_plus=_PeriodicSurface(rho_grid, theta_grid, res_plus),
        _res_minus=_PeriodicSurface(rho_grid, theta_grid, res_minus),
    )


def transport_drift(field, points, family):
    """Max |S - S(start)| along a Cartesian track projected into the collar.

    ``points`` is an (k, 2) array of positions inside the band, e.g. the
    spatial samples of a null geodesic carried by one slope family.
    """
    chart = field.pb.chart
    pts = np.asarray(points, dtype=float)
    rho = chart.rho_of(pts)
    thetas = np.empty(len(pts))
    for i, p in enumerate(pts):
        thetas[i] = chart.theta_of(p)
    # lift the angle sequence continuously to the real line
    lifted = np.copy(thetas)
    for i in range(1, len(lifted)):
        d = lifted[i] - lifted[i - 1]
        lifted[i] -= _TWO_PI * round(d / _TWO_PI)
    values = field.eval_S(family, rho, lifted)
    return float(np.max(np.abs(values - values[0]))), values


@dataclass
class InjectivityReport:
    """Discrete fold check of the half-plane map."""

    fold_free: bool
    jacobian_sign: float
    n_cells: int
    fold_cells: list
    horizon_image: tuple  # (y1, y2) arrays of the deepest grid row


@dataclass
class HalfPlaneMap:
    """Half-sum/half-difference image of the transported fields.

    y1 restricts to the boundary parameter on rho = 0; y2 vanishes there and
    keeps one sign inside (the depth-like coordinate).  ``depth_sign`` is the
    orientation factor applied so y2 >= 0.
    """

    rho_grid: np.ndarray
    theta_grid: np.ndarray
    y1: np.ndarray
    y2: np.ndarray
    depth_sign: float
    report: InjectivityReport


def half_plane_map(field):
    """Combine the two transported fields into half-plane coordinates.

    y1 = (S_plus + S_minus)/2, y2 = +/-(S_plus - S_minus)/2 with the global
    sign chosen to make y2 nonnegative; injectivity is checked through the
    sign of the discrete Jacobian over every interior grid cell.
    """
    sigma = field.S_plus
    tau = field.S_minus
    diff = sigma - tau
    interior = diff[1:, :]
    med = float(np.median(interior))
    depth_sign = 1.0 if med >= 0.0 else -1.0
    y1 = 0.5 * (sigma + tau)
    y2 = 0.5 * depth_sign * diff

    n_rho, n_theta = y1.shape
    jac = np.empty((n_rho - 1, n_theta))
    for j in range(n_theta):
        jn = (j + 1) % n_theta
        shift = _TWO_PI if jn == 0 else 0.0
        d1_rho = y1[1:, j] - y1[:-1, j]
        d2_rho = y2[1:, j] - y2[:-1, j]
        d1_th = (y1[:-1, jn] + shift) - y1[:-1, j]
        d2_th = y2[:-1, jn] - y2[:-1, j]
        jac[:, j] = d1_rho * d2_th - d1_th * d2_rho
    signs = np.sign(jac)
    pos = int(np.count_nonzero(signs > 0))
    neg = int(np.count_nonzero(signs < 0))
    majority = 1.0 if pos >= neg else -1.0
    bad = np.argwhere(signs != majority)
    report = InjectivityReport(
        fold_free=(len(bad) == 0),
        jacobian_sign=majority,
        n_cells=int(jac.size),
        fold_cells=[tuple(int(v) for v in cell) for cell in bad[:32]],
        horizon_image=(y1[-1].copy(), y2[-1].copy()),
    )
    return HalfPlaneMap(
        rho_grid=field.rho_grid,
        theta_grid=field.theta_grid,
        y1=y1,
        y2=y2,
        depth_sign=depth_sign,
        report=report,
    )
