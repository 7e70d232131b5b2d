"""Event horizon location as a limit cycle of the backward geodesic flow.

Inside a non-characteristic ergoregion, the xi_0 = 0 branch that hugs the
boundary spirals onto a closed orbit as time runs backward; that closed
orbit is the event horizon.  This module builds the Poincare return map of
the backward flow on a radial section, finds its fixed point by a
bracket-safeguarded damped secant, and traces one full revolution of the
cycle.  It also provides a sampling probe for trapped regions: launch null
geodesics of both time-component roots from the boundary of a candidate
region and report the fraction that never leave.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import BracketError, MetricDomainError, NoNullCovectorError, SeedError
from .geodesics import (
    Stepper,
    batch_flow,
    locate_event_in_step,
    solve_xi0,
    spatial_null_states,
)


@dataclass
class ReturnMapRecord:
    """History of the fixed-point search on one Poincare section."""

    section_angle: float
    iterates: list  # (rho, winding) pairs in evaluation order
    converged: bool
    fixed_point: float | None
    candidates: list = field(default_factory=list)


@dataclass
class Horizon:
    """The limit cycle, sampled as a closed polyline rho0(theta).

    residual is the re-crossing gap |P(rho*) - rho*| of the final full-cycle
    trace; thetas are principal angles about ``center``.
    """

    thetas: np.ndarray
    rho: np.ndarray
    center: tuple
    record: ReturnMapRecord
    residual: float

    def positions(self):
        c = np.asarray(self.center)
        return c + np.stack(
            [self.rho * np.cos(self.thetas), self.rho * np.sin(self.thetas)], axis=1
        )


def _wrap_pi(a):
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def _spiral_section(
    m,
    theta_star,
    rho_start,
    center,
    direction="backward",
    family="minus",
    rtol=1e-9,
    atol=1e-12,
    t_max=500.0,
    collect=False,
    core_radius=None,
):
    """Integrate the chosen branch until the polar angle about center has
    advanced by exactly 2*pi (unwound); returns (rho_next, info).

    info carries winding sign, elapsed time, and, when collect=True, the
    per-step samples (theta_unwound, rho, t) plus the event-refined final
    state.  Raises BracketError when the trajectory leaves the ergoregion,
    collapses into the core, or stops rotating monotonically.
    """
    c = np.asarray(center, dtype=float)
    x0 = c + rho_start * np.array([math.cos(theta_star), math.sin(theta_star)])
    try:
        st0 = spatial_null_states(m, x0, center)[family]
    except NoNullCovectorError as exc:
        raise BracketError(
            f"section start rho={rho_start:g} is not strictly inside the "
            f"ergoregion: {exc}"
        ) from exc
    sign = -1.0 if direction == "backward" else 1.0
    st = Stepper(m, st0.x, st0.xi, st0.xi0, sign, rtol=rtol, atol=atol)
    if core_radius is None:
        core_radius = 0.02 * rho_start
    theta_acc = theta_star
    winding = 0.0
    target = None
    t_limit = sign * t_max
    samples = [(theta_star, rho_start, 0.0)]
    for _ in range(200000):
        a_ref = math.atan2(st.y[1] - c[1], st.y[0] - c[0])
        th_ref = theta_acc
        if not st.step(t_limit=t_limit):
            if st.status is None:
                raise BracketError(
                    f"no full revolution within the time budget t_max={t_max:g}; "
                    "the start may be outside the spiral basin"
                )
            raise BracketError(
                f"integration stopped ({st.status}) before completing a "
                f"revolution: {st.fail_reason}"
            )
        rel = st.y[:2] - c
        rho_here = float(np.hypot(rel[0], rel[1]))
        if rho_here < core_radius:
            raise BracketError(
                f"trajectory collapsed into the core (rho={rho_here:.3g}) "
                "before returning to the section"
            )
        try:
            if m.spatial_det(st.y[:2]) >= 0.0:
                raise BracketError(
                    "trajectory left the ergoregion before returning to the "
                    "section; there is no interior limit cycle through this "
                    "start (a characteristic boundary lets null geodesics "
                    "cross, so the horizon coincides with the ergosphere)"
                )
        except MetricDomainError:
            pass  # interior singular pocket counts as inside
        a_new = math.atan2(rel[1], rel[0])
        d = _wrap_pi(a_new - a_ref)
        theta_acc = th_ref + d
        if target is None:
            if abs(theta_acc - theta_star) > 1e-9:
                winding = 1.0 if theta_acc > theta_star else -1.0
                target = theta_star + winding * 2.0 * math.pi
        elif d * winding < -1e-9:
            raise BracketError(
                "polar angle about the section centre is not monotone along "
                "the trajectory; this section is invalid here"
            )
        if collect:
            samples.append((theta_acc, rho_here, st.t))
        if target is not None and (th_ref - target) * (theta_acc - target) <= 0.0:
            def phi(t, y, xi0, _a_ref=a_ref, _th_ref=th_ref, _target=target):
                a = math.atan2(y[1] - c[1], y[0] - c[0])
                return (_th_ref + _wrap_pi(a - _a_ref)) - _target

            t_ev, y_ev, xi0_ev = locate_event_in_step(m, st, phi, rtol=rtol, atol=atol)
            rho_next = float(np.hypot(y_ev[0] - c[0], y_ev[1] - c[1]))
            if collect:
                samples[-1] = (target, rho_next, t_ev)
            info = {
                "winding": winding,
                "elapsed": abs(t_ev),
                "n_steps": st.n_steps,
                "max_H_drift": st.max_H / max(abs(t_ev), 1e-300),
                "samples": samples if collect else None,
                "end_state": (t_ev, y_ev, xi0_ev),
            }
            return rho_next, info
    raise BracketError("revolution not completed within the step budget")


def poincare_return(
    m,
    theta_star,
    rho_start,
    center=(0.0, 0.0),
    direction="backward",
    family="minus",
    rtol=1e-9,
    atol=1e-12,
    t_max=500.0,
):
    """One application of the Poincare return map on the ray theta=theta*.

    Integrates the chosen family (default: the boundary-hugging branch,
    backward in time) from radius rho_start until the unwound polar angle
    advances by 2*pi, with the crossing located by in-step event refinement.
    Returns (rho_next, diagnostics).
    """
    rho_next, info = _spiral_section(
        m, theta_star, rho_start, center, direction, family, rtol, atol, t_max
    )
    info.pop("samples", None)
    info.pop("end_state", None)
    return rho_next, info


def find_limit_cycle(
    m,
    theta_star=0.0,
    bracket=(None, None),
    tol=1e-6,
    center=(0.0, 0.0),
    n_theta=256,
    rtol=1e-9,
    atol=1e-12,
    max_iter=60,
    t_max=500.0,
):
    """Fixed point of the return map, then one traced revolution.

    ``bracket`` = (rho_lo, rho_hi) must straddle the cycle radius on the
    section; the displacement g(rho) = P(rho) - rho must change sign across
    it.  The fixed point is found by a bracket-safeguarded damped secant on
    g.  Returns a Horizon with rho0 sampled at n_theta uniform angles.
    """
    rho_lo, rho_hi = bracket
    if rho_lo is None or rho_hi is None:
        raise BracketError("bracket (rho_lo, rho_hi) is required")
    if not (0.0 < rho_lo < rho_hi):
        raise BracketError(f"invalid bracket ({rho_lo}, {rho_hi})")

    record = ReturnMapRecord(
        section_angle=float(theta_star), iterates=[], converged=False, fixed_point=None
    )

    def g(rho):
        r1, info = _spiral_section(
            m, theta_star, rho, center, "backward", "minus", rtol, atol, t_max
        )
        record.iterates.append((float(rho), info["winding"]))
        return r1 - rho

    g_lo = g(rho_lo)
    g_hi = g(rho_hi)
    if g_lo * g_hi > 0.0:
        raise BracketError(
            f"return-map displacement does not change sign over the bracket "
            f"(g({rho_lo:g})={g_lo:.3e}, g({rho_hi:g})={g_hi:.3e}); both ends "
            "pull the same way — widen the bracket, or the boundary may be "
            "characteristic (horizon = ergosphere), in which case use the "
            "classification result instead"
        )
    lo, flo, hi, fhi = rho_lo, g_lo, rho_hi, g_hi
    rho_star = None
    for _ in range(max_iter):
        denom = fhi - flo
        prop = hi - fhi * (hi - lo) / denom if denom != 0.0 else 0.5 * (lo + hi)
        span = hi - lo
        if not (lo + 0.05 * span <= prop <= hi - 0.05 * span):
            prop = 0.5 * (lo + hi)
        f_prop = g(prop)
        if abs(f_prop) < tol:
            rho_star = prop
            record.converged = True
            break
        if flo * f_prop < 0.0:
            hi, fhi = prop, f_prop
        else:
            lo, flo = prop, f_prop
        if hi - lo < 1e-13 * max(1.0, hi):
            rho_star = 0.5 * (lo + hi)
            record.converged = abs(f_prop) < 10 * tol
            break
    if rho_star is None:
        raise BracketError(
            f"secant iteration did not converge in {max_iter} return-map "
            "evaluations"
        )
    record.fixed_point = float(rho_star)
    record.candidates = [float(rho_star)]

    # one full revolution from the fixed point, sampled densely
    rho_back, info = _spiral_section(
        m, theta_star, rho_star, center, "backward", "minus", rtol, atol, t_max,
        collect=True,
    )
    residual = abs(rho_back - rho_star)
    samples = info["samples"]
    th = np.array([s[0] for s in samples])
    rr = np.array([s[1] for s in samples])
    # unwound angle is monotone; orient ascending for the spline
    if th[-1] < th[0]:
        th, rr = th[::-1], rr[::-1]
    # de-duplicate identical abscissae from the event-refined final sample
    keep = np.concatenate(([True], np.diff(th) > 1e-12))
    th, rr = th[keep], rr[keep]
    spline = CubicSpline(th, rr)
    grid_unwound = np.linspace(min(th[0], th[-1]), max(th[0], th[-1]), n_theta + 1)[:-1]
    rho_grid = spline(grid_unwound)
    thetas = np.mod(grid_unwound, 2.0 * math.pi)
    order = np.argsort(thetas)
    thetas, rho_grid = thetas[order], rho_grid[order]

    # the cycle must lie strictly inside the ergoregion
    c = np.asarray(center)
    for t_ang, r_ang in zip(thetas, rho_grid):
        p = c + r_ang * np.array([math.cos(t_ang), math.sin(t_ang)])
        try:
            if m.spatial_det(p) >= 0.0:
                raise BracketError(
                    f"traced cycle touches or leaves the ergoregion at "
                    f"theta={t_ang:.4f}"
                )
        except MetricDomainError:
            pass
    return Horizon(
        thetas=thetas,
        rho=rho_grid,
        center=tuple(float(v) for v in center),
        record=record,
        residual=float(residual),
    )


@dataclass
class TrappedReport:
    """Sampling evidence (not proof) of a trapped region."""

    forward_fraction: float
    backward_fraction: float
    n_trajectories: int
    boundary_points: np.ndarray
    t_budget: float


def trapped_probe(
    m,
    predicate,
    n_samples=16,
    center=(0.0, 0.0),
    n_directions=4,
    t_budget=20.0,
    rtol=1e-8,
    atol=1e-11,
    r_max=1e3,
):
    """Launch both xi_0 roots from the boundary of a candidate region and
    report the fraction of trajectories that never leave it.

    ``predicate`` must be vectorized: predicate((k, n) points) -> bool (k,).
    The probe finds the region boundary by bisection along rays from
    ``center`` (the region must contain it), rejects regions that straddle
    the ergosphere, integrates forward for the trapping fraction and
    backward for the time-reversed (white-hole) variant.
    """
    c = np.asarray(center, dtype=float)
    if not bool(predicate(c[None, :])[0]):
        raise SeedError("the probe centre must lie inside the candidate region")

    # boundary of the region by radial bisection
    bpts = []
    for k in range(n_samples):
        ang = 2.0 * math.pi * k / n_samples
        u = np.array([math.cos(ang), math.sin(ang)])
        r_out = None
        r = 1e-3
        while r <= r_max:
            if not bool(predicate((c + r * u)[None, :])[0]):
                r_out = r
                break
            r *= 1.6
        if r_out is None:
            raise SeedError("candidate region is not bounded within the search radius")
        r_in = 0.0
        for _ in range(80):
            mid = 0.5 * (r_in + r_out)
            if bool(predicate((c + mid * u)[None, :])[0]):
                r_in = mid
            else:
                r_out = mid
        bpts.append(c + r_in * u)
    bpts = np.array(bpts)

    # region must not straddle the ergosphere
    dets = []
    for p in bpts:
        try:
            dets.append(m.spatial_det(p))
        except MetricDomainError:
            dets.append(-math.inf)
    dets = np.array(dets)
    if (dets < 0).any() and (dets > 0).any():
        raise SeedError(
            "candidate region straddles the ergosphere: boundary samples lie "
            "on both sides of the degeneracy set; shrink the region"
        )

    X, XI, XI0 = [], [], []
    for p in bpts:
        for j in range(n_directions):
            ang = math.pi * (j + 0.5) / n_directions
            xi = np.array([math.cos(ang), math.sin(ang)])
            hi, lo = solve_xi0(m, p, xi)
            for root in (hi, lo):
                X.append(p)
                XI.append(xi)
                XI0.append(root)
    X = np.array(X)
    XI = np.array(XI)
    XI0 = np.array(XI0)
    n_traj = X.shape[0]

    def outside(P):
        return ~np.asarray(predicate(P), dtype=bool)

    fractions = {}
    for direction in ("forward", "backward"):
        res = batch_flow(
            m, X, XI, XI0.copy(), direction, t_max=t_budget, rtol=rtol, atol=atol,
            trapped=outside,
        )
        stayed = 0
        for i in range(n_traj):
            if res.termination[i] == "entered_trapped":
                continue  # exited the region
            if bool(predicate(res.x[i][None, :])[0]):
                stayed += 1
        fractions[direction] = stayed / n_traj
    return TrappedReport(
        forward_fraction=fractions["forward"],
        backward_fraction=fractions["backward"],
        n_trajectories=n_traj,
        boundary_points=bpts,
        t_budget=t_budget,
    )
