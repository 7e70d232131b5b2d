"""Null geodesic (bicharacteristic) integration parameterized by time.

The Hamiltonian is the full quadratic form H(x, xi) = sum g^{munu} xi_mu xi_nu
over the (n+1)-covector (xi_0, xi).  Stationarity makes xi_0 an exact
invariant, so trajectories are integrated in the time variable x_0:

    dx_i/dx_0  =  (dH/dxi_i) / (dH/dxi_0)
    dxi_i/dx_0 = -(dH/dx_i) / (dH/dxi_0)

with xi_0 re-solved from H = 0 after every accepted step (nearest-root
continuation) to suppress drift off the null cone.  The integrator is an
embedded Dormand-Prince 5(4) pair with FSAL and standard step control,
written out here so both a scalar stepper (with external step-by-step
control, used for section-crossing event location) and a batched variant
(thousands of independent trajectories advanced in lockstep with
per-trajectory step sizes) share one set of coefficients.

Families: for a given spatial covector the null condition is a quadratic in
xi_0 with two real roots when g^{00} > 0 and the discriminant is
nonnegative; "plus" labels the larger root.  Strictly inside the ergoregion
there are also exactly two spatial covector lines that are null with
xi_0 = 0; oriented so dH/dxi_0 > 0, the branch whose velocity has the larger
radial component spirals along the boundary ("minus") while the other falls
inward ("plus").
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ._util import stable_quadratic
from .errors import (
    MetricDomainError,
    NoNullCovectorError,
    StepFailureError,
    TangencyError,
)

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# b5 - b4: error estimator weights
_E = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)

TERM_LEFT_DOMAIN = "left_domain"
TERM_TRAPPED = "entered_trapped"
TERM_MAX_TIME = "max_time"
TERM_STEP_FAILURE = "step_failure"


@dataclass
class GeodesicState:
    """Phase-space point of a time-parameterized null geodesic."""

    x0: float
    x: np.ndarray
    xi: np.ndarray
    family: str = "plus"
    xi0: float = 0.0


@dataclass
class NullGeodesic:
    """One integrated trajectory.

    ``max_H_drift`` is the largest |H| observed at an accepted step end
    *before* the xi_0 re-solve, divided by the total elapsed time — the
    per-unit-time rate at which the trajectory drifted off the null cone.
    """

    samples: list
    direction: str
    termination: str
    max_H_drift: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def end(self):
        return self.samples[-1]

    def arrays(self):
        """(x0, x, xi, xi0) stacked over samples."""
        t = np.array([s.x0 for s in self.samples])
        x = np.array([s.x for s in self.samples])
        xi = np.array([s.xi for s in self.samples])
        xi0 = np.array([s.xi0 for s in self.samples])
        return t, x, xi, xi0


def solve_xi0(m, p, xi_spatial):
    """Both time components making (xi_0, xi_spatial) null at p.

    Returns (xi0_plus, xi0_minus) with plus the larger root of
    g^{00} xi_0^2 + 2 sum_j g^{0j} xi_0 xi_j + sum_jk g^{jk} xi_j xi_k = 0.
    Raises NoNullCovectorError when the discriminant is negative.
    """
    g = m.matrix(p)
    xi = np.asarray(xi_spatial, dtype=float)
    a = g[0, 0]
    b2 = float(g[0, 1:] @ xi)
    c = float(xi @ g[1:, 1:] @ xi)
    disc = b2 * b2 - a * c
    if disc < -1e-14 * max(b2 * b2, abs(a * c), 1e-300):
        raise NoNullCovectorError(
            f"no null covector with spatial part {tuple(xi)} at {tuple(np.asarray(p))}: "
            f"discriminant {disc:.3e} < 0"
        )
    hi, lo = stable_quadratic(a, b2, c)
    return float(hi), float(lo)


def hamiltonian(m, x, xi0, xi):
    """H = full quadratic form at (x; xi0, xi)."""
    g = m.matrix(x)
    xf = np.concatenate(([xi0], np.asarray(xi, dtype=float)))
    return float(xf @ g @ xf)


def velocity(m, state):
    """Spatial velocity dx/dx_0 of a geodesic state."""
    g = m.matrix(state.x)
    xf = np.concatenate(([state.xi0], state.xi))
    w = g @ xf
    return w[1:] / w[0]


class _TimeParamError(Exception):
    """dH/dxi_0 vanished: trajectory not parameterizable by time here."""


def _rhs(m, x, xi0, xi):
    """Time-parameterized equations of motion; raises MetricDomainError or
    _TimeParamError."""
    g, dg = m.matrix_and_gradient(x)
    xf = np.concatenate(([xi0], xi))
    w = g @ xf
    b = w[0]  # = dH/dxi_0 / 2
    scale = float(np.abs(g).max() * (1.0 + np.abs(xf).max()))
    if abs(b) < 1e-14 * scale:
        raise _TimeParamError(
            f"dH/dxi_0 = {2*b:.3e} ~ 0 at x = {tuple(x)}; the geodesic is not "
            "parameterizable by the time variable here"
        )
    dx = w[1:] / b
    n = m.n
    dxi = np.empty(n)
    for i in range(n):
        dxi[i] = -(xf @ dg[:, :, i] @ xf) / (2.0 * b)
    return np.concatenate((dx, dxi))


class Stepper:
    """Scalar Dormand-Prince 5(4) stepper with FSAL, exposed step-by-step.

    Attributes after each successful step(): t, y = (x, xi), f (RHS at
    (t, y)), t_prev, y_prev, f_prev, h_used.  status is None while running,
    else one of the termination codes.  xi_0 is re-solved after every
    accepted step; the pre-solve |H| feeds max_H (see NullGeodesic).
    """

    def __init__(self, m, x, xi, xi0, sign, rtol=1e-9, atol=1e-12, t0=0.0):
        self.m = m
        self.n = m.n
        self.t = float(t0)
        self.y = np.concatenate((np.asarray(x, float), np.asarray(xi, float)))
        self.xi0 = float(xi0)
        self.sign = 1.0 if sign >= 0 else -1.0
        self.rtol = float(rtol)
        self.atol = float(atol)
        self.status = None
        self.fail_reason = ""
        self.max_H = 0.0
        self.n_steps = 0
        self.t_prev = self.t
        self.y_prev = self.y.copy()
        self.xi0_prev = self.xi0
        self.h_used = 0.0
        try:
            self.f = _rhs(m, self.y[: self.n], self.xi0, self.y[self.n :])
        except (MetricDomainError, _TimeParamError) as exc:
            self.status = TERM_STEP_FAILURE
            self.fail_reason = str(exc)
            self.f = np.zeros(2 * self.n)
            return
        self.f_prev = self.f.copy()
        self.h = self._initial_step()

    def _scale(self, y):
        return self.atol + self.rtol * np.abs(y)

    def _initial_step(self):
        sc = self._scale(self.y)
        d0 = float(np.sqrt(np.mean((self.y / sc) ** 2)))
        d1 = float(np.sqrt(np.mean((self.f / sc) ** 2)))
        h0 = 1e-6 if d1 < 1e-12 else 0.01 * d0 / d1
        h0 = max(min(h0, 1.0), 1e-9)
        try:
            f1 = _rhs(
                self.m,
                self.y[: self.n] + self.sign * h0 * self.f[: self.n],
                self.xi0,
                self.y[self.n :] + self.sign * h0 * self.f[self.n :],
            )
            d2 = float(np.sqrt(np.mean(((f1 - self.f) / sc) ** 2))) / h0
        except (MetricDomainError, _TimeParamError):
            return h0 * 0.1
        if max(d1, d2) > 1e-15:
            h1 = (0.01 / max(d1, d2)) ** 0.2
            return min(100 * h0, h1)
        return h0

    def step(self, t_limit=None):
        """Advance one accepted step; optionally clamp to land on t_limit.

        Returns True if a step was taken, False if status is set (finished
        or failed).  Reaching t_limit exactly does NOT set status; the
        caller decides what the limit means.
        """
        if self.status is not None:
            return False
        m, n = self.m, self.n
        h = self.h
        if t_limit is not None:
            remaining = (t_limit - self.t) * self.sign
            if remaining <= 1e-16 * max(1.0, abs(self.t)):
                return False
            h = min(h, remaining)
        invalid_streak = 0
        for _attempt in range(60):
            if h < 1e-14 * max(1.0, abs(self.t)):
                self.status = (
                    TERM_LEFT_DOMAIN if invalid_streak > 0 else TERM_STEP_FAILURE
                )
                if not self.fail_reason:
                    self.fail_reason = "step size collapsed"
                return False
            K = np.empty((7, 2 * n))
            K[0] = self.f
            y_new = None
            try:
                for s in range(1, 7):
                    ys = self.y + self.sign * h * (_A[s] @ K[:s])
                    if s == 6:
                        y_new = ys
                    K[s] = _rhs(m, ys[:n], self.xi0, ys[n:])
            except (MetricDomainError, _TimeParamError) as exc:
                invalid_streak += 1
                self.fail_reason = str(exc)
                h *= 0.5
                continue
            invalid_streak = 0
            err_vec = h * (_E @ K)
            sc = self.atol + self.rtol * np.maximum(np.abs(self.y), np.abs(y_new))
            err = float(np.sqrt(np.mean((err_vec / sc) ** 2)))
            if err <= 1.0:
                factor = 0.9 * (max(err, 1e-10)) ** -0.2
                self.t_prev, self.y_prev, self.f_prev = self.t, self.y, self.f
                self.xi0_prev = self.xi0
                self.h_used = self.sign * h
                self.t = self.t + self.sign * h
                self.y = y_new
                self.f = K[6]  # FSAL
                self.h = h * min(factor, 10.0)
                self.n_steps += 1
                self._renormalize()
                return True
            h *= max(0.2, min(0.9 * err**-0.2, 1.0))
        self.status = TERM_STEP_FAILURE
        self.fail_reason = "no acceptable step in 60 attempts"
        return False

    def _renormalize(self):
        x, xi = self.y[: self.n], self.y[self.n :]
        try:
            H = hamiltonian(self.m, x, self.xi0, xi)
        except MetricDomainError:
            return
        self.max_H = max(self.max_H, abs(H))
        g = self.m.matrix(x)
        a = g[0, 0]
        b2 = float(g[0, 1:] @ xi)
        c = float(xi @ g[1:, 1:] @ xi)
        if b2 * b2 - a * c < 0.0:
            return  # keep current xi0; drift is recorded in max_H
        hi, lo = stable_quadratic(a, b2, c)
        hi, lo = float(hi), float(lo)
        self.xi0 = hi if abs(hi - self.xi0) <= abs(lo - self.xi0) else lo
        # refresh cached RHS: xi0 changed under the FSAL cache
        try:
            self.f = _rhs(self.m, x, self.xi0, xi)
        except (MetricDomainError, _TimeParamError) as exc:
            self.status = TERM_STEP_FAILURE
            self.fail_reason = str(exc)

    def state(self, family):
        return GeodesicState(
            x0=self.t,
            x=self.y[: self.n].copy(),
            xi=self.y[self.n :].copy(),
            family=family,
            xi0=self.xi0,
        )


def flow(
    m,
    init,
    direction="forward",
    t_max=10.0,
    rtol=1e-9,
    atol=1e-12,
    trapped=None,
    max_steps=100000,
    store_samples=True,
):
    """Integrate a null geodesic from ``init`` for a time span of t_max.

    ``init.xi0`` must make the state null (use solve_xi0 or a launch
    helper).  ``trapped``, if given, is a predicate on the spatial point;
    the run stops with termination 'entered_trapped' when it holds at an
    accepted step end.  Termination 'left_domain' means the metric ceased
    to be evaluable along the trajectory (domain boundary or singularity).
    """
    if direction not in ("forward", "backward"):
        raise ValueError("direction must be 'forward' or 'backward'")
    sign = 1.0 if direction == "forward" else -1.0
    st = Stepper(m, init.x, init.xi, init.xi0, sign, rtol=rtol, atol=atol, t0=init.x0)
    t_end = init.x0 + sign * t_max
    samples = [st.state(init.family)]
    termination = None
    for _ in range(max_steps):
        took = st.step(t_limit=t_end)
        if not took:
            termination = st.status if st.status is not None else TERM_MAX_TIME
            break
        if store_samples:
            samples.append(st.state(init.family))
        if trapped is not None and trapped(st.y[: m.n]):
            termination = TERM_TRAPPED
            break
    else:
        termination = TERM_STEP_FAILURE
        st.fail_reason = f"exceeded max_steps={max_steps}"
    if not store_samples:
        samples.append(st.state(init.family))
    elapsed = abs(st.t - init.x0)
    drift = st.max_H / elapsed if elapsed > 0 else 0.0
    diagnostics = {"n_steps": st.n_steps}
    if st.fail_reason:
        diagnostics["reason"] = st.fail_reason
    return NullGeodesic(
        samples=samples,
        direction=direction,
        termination=termination,
        max_H_drift=drift,
        diagnostics=diagnostics,
    )


def spatial_null_states(m, x, center=(0.0, 0.0)):
    """The two xi_0 = 0 null branches at a point strictly inside the
    ergoregion.

    The spatial block M there is indefinite, so { xi : xi M xi = 0 } is a
    pair of lines.  Each line is oriented so dH/dxi_0 = 2 sum g^{0j} xi_j > 0
    and tagged by its velocity: 'minus' has the algebraically larger radial
    velocity component about ``center`` (it hugs the boundary; backward in
    time it spirals onto the event horizon), 'plus' the smaller (it falls
    inward).  Returns {'plus': GeodesicState, 'minus': GeodesicState}.
    """
    x = np.asarray(x, dtype=float)
    g = m.matrix(x)
    M = g[1:, 1:]
    det = M[0, 0] * M[1, 1] - M[0, 1] ** 2
    if det >= 0.0:
        raise NoNullCovectorError(
            f"point {tuple(x)} is not strictly inside the ergoregion "
            f"(spatial determinant {det:.3e} >= 0); no xi_0 = 0 null covectors"
        )
    # xi M xi = 0 via the eigenbasis: with M = lam_p w_p w_p^T + lam_m w_m w_m^T,
    # lam_p > 0 > lam_m, the null lines are sqrt(-lam_m) w_p +- sqrt(lam_p) w_m
    lam, vecs = np.linalg.eigh(M)
    w_m, w_p = vecs[:, 0], vecs[:, 1]  # eigh sorts ascending
    a = math.sqrt(-lam[0])
    b = math.sqrt(lam[1])
    lines = [b * w_m + a * w_p, b * w_m - a * w_p]
    rhat = x - np.asarray(center, dtype=float)
    nr = np.linalg.norm(rhat)
    rhat = rhat / nr if nr > 0 else np.array([1.0, 0.0])
    branches = []
    for xi in lines:
        xi = xi / np.linalg.norm(xi)
        b = float(g[0, 1:] @ xi)
        if abs(b) < 1e-14:
            raise StepFailureError(
                f"xi_0 = 0 branch at {tuple(x)} has dH/dxi_0 ~ 0; "
                "not parameterizable by time"
            )
        if b < 0.0:
            xi = -xi
            b = -b
        u = (M @ xi) / b
        branches.append((float(u @ rhat), xi))
    branches.sort(key=lambda p: p[0])
    plus_xi = branches[0][1]
    minus_xi = branches[1][1]
    return {
        "plus": GeodesicState(x0=0.0, x=x.copy(), xi=plus_xi, family="plus", xi0=0.0),
        "minus": GeodesicState(x0=0.0, x=x.copy(), xi=minus_xi, family="minus", xi0=0.0),
    }


def launch_from_ergosphere(m, curve, theta0, family, char_tol=1e-6):
    """Initial state on the traced boundary at ray angle theta0.

    The spatial covector is the inward-oriented degenerate direction (the
    only xi_0-free null spatial covector on the boundary), normalized to
    |xi| = 1; the family picks the corresponding xi_0 root.  At points where
    the boundary is characteristic the geodesics are tangent to it and no
    transversal launch exists: TangencyError.
    """
    from .ergosphere import _root_on_ray, null_kernel

    theta0 = float(theta0)
    u = np.array([math.cos(theta0), math.sin(theta0)])
    _, x_star, _ = _root_on_ray(m, curve.seed, u, r_max=1e3, tol=1e-8)
    e = null_kernel(m, x_star)
    g = m.matrix(x_star)
    M = g[1:, 1:]
    _, grad = m.spatial_det_with_gradient(x_star)
    nu = grad / np.linalg.norm(grad)
    scale = float(np.linalg.norm(M, 2))
    if abs(float(nu @ M @ nu)) < char_tol * scale:
        raise TangencyError(
            f"boundary is characteristic at theta={theta0:.6g}: the degenerate "
            "direction is tangent to it; no transversal launch exists"
        )
    hi, lo = solve_xi0(m, x_star, e)
    xi0 = hi if family == "plus" else lo
    return GeodesicState(x0=0.0, x=x_star, xi=e, family=family, xi0=xi0)


# -- batched integration -------------------------------------------------------


@dataclass
class BatchFlowResult:
    """Endpoint data for a batch of independently stepped trajectories."""

    t: np.ndarray
    x: np.ndarray
    xi: np.ndarray
    xi0: np.ndarray
    termination: list
    max_H_drift: np.ndarray
    n_steps: np.ndarray


def _rhs_batch(m, X, xi0, XI):
    """Vectorized equations of motion.

    Returns (dY (m,2n), b (m,), ok (m,)); rows with invalid metric or
    vanishing dH/dxi_0 have ok=False and zeros in dY.
    """
    mm = X.shape[0]
    n = m.n
    g, dg, valid = m.matrix_and_gradient_batch(tuple(X[:, i] for i in range(n)))
    xf = np.concatenate((xi0[:, None], XI), axis=1)
    with np.errstate(all="ignore"):
        w = np.einsum("mij,mj->mi", g, xf)
        b = w[:, 0]
        gmax = np.where(valid, np.abs(np.nan_to_num(g)).max(axis=(1, 2)), 1.0)
        xfmax = np.abs(xf).max(axis=1)
        ok = valid & (np.abs(b) > 1e-14 * gmax * (1.0 + xfmax))
        bsafe = np.where(ok, b, 1.0)
        dY = np.zeros((mm, 2 * n))
        dY[:, :n] = w[:, 1:] / bsafe[:, None]
        for i in range(n):
            hx = np.einsum("mj,mjk,mk->m", xf, dg[:, :, :, i], xf)
            dY[:, n + i] = -hx / (2.0 * bsafe)
        dY[~ok] = 0.0
    return dY, b, ok


def batch_flow(
    m,
    X,
    XI,
    xi0,
    direction="forward",
    t_max=10.0,
    rtol=1e-9,
    atol=1e-12,
    trapped=None,
    max_iter=100000,
):
    """Integrate many null geodesics at once with per-trajectory step sizes.

    X, XI: (m, n) initial positions and spatial covectors; xi0: (m,) time
    components (already null).  ``trapped`` is a vectorized predicate on an
    (k, n) array of points returning a boolean (k,).  All trajectories run
    until their own termination or the common time span t_max.
    """
    sign = 1.0 if direction == "forward" else -1.0
    X = np.array(X, dtype=float)
    XI = np.array(XI, dtype=float)
    mm, n = X.shape
    Y = np.concatenate((X, XI), axis=1)
    xi0 = np.array(xi0, dtype=float)
    t = np.zeros(mm)
    t_end = sign * t_max
    term = [None] * mm
    maxH = np.zeros(mm)
    n_steps = np.zeros(mm, dtype=int)
    invalid_streak = np.zeros(mm, dtype=int)
    reject_streak = np.zeros(mm, dtype=int)

    F, b, ok = _rhs_batch(m, Y[:, :n], xi0, Y[:, n:])
    for i in np.nonzero(~ok)[0]:
        term[i] = TERM_STEP_FAILURE
    # initial step: conservative uniform heuristic refined by the controller
    sc0 = atol + rtol * np.abs(Y)
    d1 = np.sqrt(np.mean((F / sc0) ** 2, axis=1))
    h = np.where(d1 > 1e-12, 0.01 * np.sqrt(np.mean((Y / sc0) ** 2, axis=1)) / d1, 1e-6)
    h = np.clip(h, 1e-9, 0.5)

    active = np.array([tm is None for tm in term])
    for _ in range(max_iter):
        if not active.any():
            break
        idx = np.nonzero(active)[0]
        # clamp to land exactly on the common end time
        remaining = (t_end - t[idx]) * sign
        done = remaining <= 1e-16
        for i in idx[done]:
            term[i] = TERM_MAX_TIME
            active[i] = False
        idx = idx[~done]
        if idx.size == 0:
            continue
        hs = np.minimum(h[idx], remaining[~done])
        Yi = Y[idx]
        Ki = np.empty((7, idx.size, 2 * n))
        Ki[0] = F[idx]
        stage_ok = np.ones(idx.size, dtype=bool)
        y_new = None
        for s in range(1, 7):
            ys = Yi + (sign * hs)[:, None] * np.einsum(
                "s,smj->mj", _A[s], Ki[:s]
            )
            if s == 6:
                y_new = ys
            dY, _, okk = _rhs_batch(m, ys[:, :n], xi0[idx], ys[:, n:])
            stage_ok &= okk
            Ki[s] = dY
        err_vec = hs[:, None] * np.einsum("s,smj->mj", _E, Ki)
        sc = atol + rtol * np.maximum(np.abs(Yi), np.abs(y_new))
        with np.errstate(all="ignore"):
            err = np.sqrt(np.mean((err_vec / sc) ** 2, axis=1))
        err = np.where(stage_ok, err, np.inf)
        accept = err <= 1.0

        # rejected rows: shrink; invalid stages shrink harder and may end the run
        rej = ~accept
        h_idx = h[idx].copy()
        bad = rej & ~stage_ok
        h_idx[bad] = hs[bad] * 0.5
        invalid_streak[idx[bad]] += 1
        softrej = rej & stage_ok
        with np.errstate(all="ignore"):
            shrink = np.where(
                np.isfinite(err), np.maximum(0.2, np.minimum(0.9 * err**-0.2, 1.0)), 0.5
            )
        h_idx[softrej] = hs[softrej] * shrink[softrej]
        reject_streak[idx[softrej]] += 1
        floor = 1e-14 * np.maximum(1.0, np.abs(t[idx]))
        dead = rej & (h_idx < floor)
        for k in np.nonzero(dead)[0]:
            i = idx[k]
            term[i] = TERM_LEFT_DOMAIN if invalid_streak[i] > 0 else TERM_STEP_FAILURE
            active[i] = False
        stalled = (invalid_streak[idx] > 60) | (reject_streak[idx] > 60)
        for k in np.nonzero(rej & stalled & ~dead)[0]:
            i = idx[k]
            term[i] = TERM_LEFT_DOMAIN if invalid_streak[i] > 0 else TERM_STEP_FAILURE
            active[i] = False

        # accepted rows: move, renormalize xi0, check trapped predicate
        acc = np.nonzero(accept)[0]
        if acc.size:
            ai = idx[acc]
            invalid_streak[ai] = 0
            reject_streak[ai] = 0
            t[ai] = t[ai] + sign * hs[acc]
            Y[ai] = y_new[acc]
            F[ai] = Ki[6, acc]
            n_steps[ai] += 1
            grow = 0.9 * np.maximum(err[acc], 1e-10) ** -0.2
            h_idx[acc] = hs[acc] * np.minimum(grow, 10.0)

            Xa, XIa = Y[ai, :n], Y[ai, n:]
            ga, valid_a = m.matrix_batch(tuple(Xa[:, i] for i in range(n)))
            with np.errstate(all="ignore"):
                xfa = np.concatenate((xi0[ai][:, None], XIa), axis=1)
                Ha = np.einsum("mi,mij,mj->m", xfa, ga, xfa)
                keep = valid_a & np.isfinite(Ha)
                maxH[ai[keep]] = np.maximum(maxH[ai[keep]], np.abs(Ha[keep]))
                aq = ga[:, 0, 0]
                bq = np.einsum("mj,mj->m", ga[:, 0, 1:], XIa)
                cq = np.einsum("mi,mij,mj->m", XIa, ga[:, 1:, 1:], XIa)
                disc = bq * bq - aq * cq
                hi, lo = stable_quadratic(
                    np.where(keep, aq, 1.0), np.where(keep, bq, 0.0), np.where(keep, cq, 0.0)
                )
                solvable = keep & (disc >= 0.0)
                cur = xi0[ai]
                nearest = np.where(np.abs(hi - cur) <= np.abs(lo - cur), hi, lo)
                xi0[ai] = np.where(solvable, nearest, cur)
            if np.any(solvable):
                # xi0 changed: refresh the FSAL cache for those rows
                upd = ai[solvable]
                Fu, _, oku = _rhs_batch(m, Y[upd, :n], xi0[upd], Y[upd, n:])
                F[upd] = Fu
                for i in upd[~oku]:
                    term[i] = TERM_STEP_FAILURE
                    active[i] = False
            if trapped is not None:
                hit = np.asarray(trapped(Y[ai, :n]), dtype=bool)
                for i in ai[hit]:
                    if term[i] is None:
                        term[i] = TERM_TRAPPED
                        active[i] = False
        h[idx] = h_idx
    for i in range(mm):
        if term[i] is None:
            term[i] = TERM_STEP_FAILURE
    elapsed = np.abs(t)
    drift = np.where(elapsed > 0, maxH / np.maximum(elapsed, 1e-300), 0.0)
    return BatchFlowResult(
        t=t,
        x=Y[:, :n].copy(),
        xi=Y[:, n:].copy(),
        xi0=xi0,
        termination=term,
        max_H_drift=drift,
        n_steps=n_steps,
    )


# -- event location --------------------------------------------------------


def _hermite(t0, y0, f0, t1, y1, f1, t):
    """Cubic Hermite interpolant of the solution inside one accepted step."""
    h = t1 - t0
    s = (t - t0) / h
    s2, s3 = s * s, s * s * s
    return (
        (2 * s3 - 3 * s2 + 1) * y0
        + (s3 - 2 * s2 + s) * h * f0
        + (-2 * s3 + 3 * s2) * y1
        + (s3 - s2) * h * f1
    )


def _integrate_to(m, t0, y, xi0, t_target, sign, rtol, atol):
    """Exact re-integration from (t0, y, xi0) to t_target; returns (y, xi0)."""
    n = m.n
    st = Stepper(m, y[:n], y[n:], xi0, sign, rtol=rtol, atol=atol, t0=t0)
    while st.step(t_limit=t_target):
        pass
    if st.status is not None:
        raise StepFailureError(
            f"re-integration inside an accepted step failed: {st.fail_reason}"
        )
    return st.y, st.xi0


def locate_event_in_step(m, st, phi, rtol=1e-9, atol=1e-12):
    """Find the zero of phi(t, y, xi0) inside the last accepted step of st.

    phi must change sign between (t_prev, y_prev) and (t, y).  A first
    estimate comes from bisection on the cubic Hermite interpolant; it is
    then polished by bracket-safeguarded secant iterations on exact
    re-integrations from the step start, so the final accuracy is that of
    the integrator, not of the interpolant.  Returns (t_event, y_event,
    xi0_event).
    """
    t0, y0, f0 = st.t_prev, st.y_prev, st.f_prev
    t1, y1, f1 = st.t, st.y, st.f
    xi0_start = st.xi0_prev
    sign = st.sign
    phi0 = phi(t0, y0, xi0_start)
    phi1 = phi(t1, y1, st.xi0)
    if phi0 == 0.0:
        return t0, y0.copy(), xi0_start
    if phi1 == 0.0:
        return t1, y1.copy(), st.xi0
    if phi0 * phi1 > 0.0:
        raise ValueError("event function does not change sign across the step")

    # stage 1: bisection on the interpolant (no integrations)
    a, b = t0, t1
    fa = phi0
    for _ in range(60):
        mid = 0.5 * (a + b)
        ym = _hermite(t0, y0, f0, t1, y1, f1, mid)
        fm = phi(mid, ym, xi0_start)
        if fm == 0.0:
            a = b = mid
            break
        if fa * fm < 0.0:
            b = mid
        else:
            a, fa = mid, fm
        if abs(b - a) < 1e-3 * abs(t1 - t0):
            break
    t_est = 0.5 * (a + b)

    # stage 2: safeguarded secant on exact partial re-integrations
    lo, flo = t0, phi0
    hi, fhi = t1, phi1

    def exact_phi(tt):
        yy, xx = _integrate_to(m, t0, y0, xi0_start, tt, sign, rtol, atol)
        return phi(tt, yy, xx), yy, xx

    t_cur = t_est
    best = None
    for _ in range(80):
        f_cur, y_cur, xi0_cur = exact_phi(t_cur)
        best = (t_cur, y_cur, xi0_cur, abs(f_cur))
        if f_cur == 0.0:
            break
        if flo * f_cur < 0.0:
            hi, fhi = t_cur, f_cur
        else:
            lo, flo = t_cur, f_cur
        if abs(hi - lo) <= 1e-14 * max(1.0, abs(t1)):
            break
        # secant proposal, safeguarded to the bracket interior
        denom = fhi - flo
        t_next = hi - fhi * (hi - lo) / denom if denom != 0.0 else 0.5 * (lo + hi)
        span = abs(hi - lo)
        if not (min(lo, hi) + 0.05 * span <= t_next <= max(lo, hi) - 0.05 * span):
            t_next = 0.5 * (lo + hi)
        t_cur = t_next
    t_ev, y_ev, xi0_ev, _ = best
    return t_ev, y_ev, xi0_ev


def flow_to_event(
    m,
    init,
    phi,
    direction="forward",
    t_max=10.0,
    rtol=1e-9,
    atol=1e-12,
    max_steps=100000,
    store_samples=False,
):
    """Integrate until phi(x0, y, xi0) changes sign; stop exactly there.

    phi receives (x0, y, xi0) with y = concat(x, xi).  Returns a
    NullGeodesic whose final sample sits on the event to integrator
    accuracy, plus a flag dict in diagnostics: {'event': True/False}.
    If no crossing occurs within t_max the run ends like flow().
    """
    sign = 1.0 if direction == "forward" else -1.0
    st = Stepper(m, init.x, init.xi, init.xi0, sign, rtol=rtol, atol=atol, t0=init.x0)
    t_end = init.x0 + sign * t_max
    samples = [st.state(init.family)]
    phi_prev = phi(st.t, st.y, st.xi0)
    termination = None
    hit = False
    for _ in range(max_steps):
        took = st.step(t_limit=t_end)
        if not took:
            termination = st.status if st.status is not None else TERM_MAX_TIME
            break
        phi_new = phi(st.t, st.y, st.xi0)
        if phi_prev != 0.0 and (phi_new == 0.0 or phi_prev * phi_new < 0.0):
            t_ev, y_ev, xi0_ev = locate_event_in_step(m, st, phi, rtol=rtol, atol=atol)
            final = GeodesicState(
                x0=t_ev,
                x=y_ev[: m.n].copy(),
                xi=y_ev[m.n :].copy(),
                family=init.family,
                xi0=xi0_ev,
            )
            samples.append(final)
            termination = TERM_MAX_TIME
            hit = True
            break
        phi_prev = phi_new
        if store_samples:
            samples.append(st.state(init.family))
    else:
        termination = TERM_STEP_FAILURE
    if not hit and samples[-1].x0 != st.t:
        samples.append(st.state(init.family))
    elapsed = abs(samples[-1].x0 - init.x0)
    drift = st.max_H / elapsed if elapsed > 0 else 0.0
    return NullGeodesic(
        samples=samples,
        direction=direction,
        termination=termination,
        max_H_drift=drift,
        diagnostics={"event": hit, "n_steps": st.n_steps},
    )
