"""Stationary inverse metrics: evaluation, exact gradients, built-in families.

A SpacetimeMetric represents the inverse metric g^{jk}(x) of a stationary
Lorentzian metric in signature (+, -, ..., -) on n spatial coordinates,
with the time coordinate x0 absent from all components and g^{00} > 0 on
the validity domain.  Components are evaluated through a single core
callable that works on floats, numpy arrays (batched points), or Dual
numbers (exact gradients).

Built-ins:

* acoustic_vortex(A, B): draining-vortex flow at unit density and sound speed
* gordon(...) / gordon_radial(alpha, n_index, c): optical medium with flow
* schwarzschild_equatorial(m): equatorial slice in horizon-regular form
* kerr_restricted(m, a): rotating-source metric on the (rho, z) half-plane
  with the angular momentum coordinate frozen

TOML configuration files are parsed with parse_metric_config().
"""

from __future__ import annotations

import math
import sys

import numpy as np

from . import dual
from .dual import Dual, value
from .errors import MetricConfigError, MetricDomainError, ParameterError
from .expr import parse_expression

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml


def upper_indices(n):
    """Index pairs (j, k), j <= k, of the upper triangle of an (n+1)x(n+1) matrix."""
    return [(j, k) for j in range(n + 1) for k in range(j, n + 1)]


class SpacetimeMetric:
    """Inverse metric g^{jk}(x) with exact derivative evaluation.

    Parameters
    ----------
    n : int
        Number of spatial coordinates (1 to 3).
    core : callable
        core(xs) -> (components, ok) where xs is a tuple of n coordinate
        values (floats, arrays, or Duals), components is the list of
        upper-triangle entries in row-major order, and ok is None or a
        boolean (scalar or array) domain flag for the already-evaluated
        point(s).
    name : str
        Human-readable identifier, echoed in reports.
    params : dict
        Constructor parameters, echoed in reports.
    coord_names : tuple of str, optional
        Display names of the spatial coordinates.
    """

    def __init__(self, n, core, name, params=None, coord_names=None):
        if n not in (1, 2, 3):
            raise ParameterError(f"spatial dimension must be 1, 2, or 3, got {n}")
        self.n = n
        self._core = core
        self.name = name
        self.params = dict(params or {})
        self.coord_names = tuple(coord_names or tuple(f"x{i+1}" for i in range(n)))
        self._upper = upper_indices(n)
        self._m = len(self._upper)

    # -- component evaluation ----------------------------------------------

    def _eval(self, xs):
        comps, ok = self._core(tuple(xs))
        return comps, ok

    def _eval_scalar(self, xs):
        # Exactly-singular points blow up arithmetically in scalar mode before
        # the core's domain flag can report them; fold that into the same error.
        try:
            return self._core(tuple(xs))
        except (ZeroDivisionError, ValueError, OverflowError) as exc:
            raise MetricDomainError(
                f"{self.name}: singular metric at {tuple(value(c) for c in xs)}"
            ) from exc

    def matrix(self, x):
        """Inverse-metric matrix at a single point, shape (n+1, n+1).

        Raises MetricDomainError outside the validity domain (including
        non-positive g^{00} and non-finite components).
        """
        comps, ok = self._eval_scalar(tuple(float(c) for c in x))
        if ok is not None and not bool(ok):
            raise MetricDomainError(f"{self.name}: point {tuple(x)} outside metric domain")
        vals = [value(c) for c in comps]
        if not all(math.isfinite(v) for v in vals):
            raise MetricDomainError(f"{self.name}: singular metric at {tuple(x)}")
        if vals[0] <= 0.0:
            raise MetricDomainError(
                f"{self.name}: g00 = {vals[0]:.6g} <= 0 at {tuple(x)}"
            )
        return self._to_matrix(vals, float)

    def matrix_batch(self, xs):
        """Inverse-metric matrices at a batch of points.

        Parameters
        ----------
        xs : sequence of n arrays, each shape (m,)

        Returns
        -------
        mats : ndarray (m, n+1, n+1), rows for invalid points hold NaN
        valid : boolean ndarray (m,)
        """
        m = np.shape(xs[0])[0]
        with np.errstate(all="ignore"):
            comps, ok = self._eval(tuple(np.asarray(c, dtype=float) for c in xs))
            vals = [np.broadcast_to(np.asarray(value(c), dtype=float), (m,)) for c in comps]
            valid = np.ones(m, dtype=bool)
            if ok is not None:
                valid &= np.broadcast_to(np.asarray(ok, dtype=bool), (m,))
            for v in vals:
                valid &= np.isfinite(v)
            valid &= np.where(np.isfinite(vals[0]), vals[0], -1.0) > 0.0
        mats = np.empty((m, self.n + 1, self.n + 1))
        for (j, k), v in zip(self._upper, vals):
            mats[:, j, k] = v
            mats[:, k, j] = v
        mats[~valid] = np.nan
        return mats, valid

    def matrix_and_gradient(self, x):
        """Inverse metric and its exact spatial gradient at one point.

        Returns
        -------
        g : ndarray (n+1, n+1)
        dg : ndarray (n+1, n+1, n) with dg[j, k, l] = d g^{jk} / d x_l
        """
        seeded = dual.seed(tuple(float(c) for c in x))
        comps, ok = self._eval_scalar(seeded)
        if ok is not None and not bool(value(ok)):
            raise MetricDomainError(f"{self.name}: point {tuple(x)} outside metric domain")
        g = np.empty((self.n + 1, self.n + 1))
        dg = np.empty((self.n + 1, self.n + 1, self.n))
        for (j, k), c in zip(self._upper, comps):
            if isinstance(c, Dual):
                v, d = c.v, c.d
            else:
                v, d = c, (0.0,) * self.n
            g[j, k] = g[k, j] = v
            dg[j, k, :] = d
            dg[k, j, :] = d
        if not np.all(np.isfinite(g)) or not np.all(np.isfinite(dg)):
            raise MetricDomainError(f"{self.name}: singular metric at {tuple(x)}")
        if g[0, 0] <= 0.0:
            raise MetricDomainError(f"{self.name}: g00 <= 0 at {tuple(x)}")
        return g, dg

    def matrix_and_gradient_batch(self, xs):
        """Batched version of matrix_and_gradient.

        Returns (g, dg, valid) with shapes (m, n+1, n+1), (m, n+1, n+1, n), (m,).
        """
        m = np.shape(xs[0])[0]
        arrs = tuple(np.asarray(c, dtype=float) for c in xs)
        with np.errstate(all="ignore"):
            comps, ok = self._eval(dual.seed(arrs))
            g = np.empty((m, self.n + 1, self.n + 1))
            dg = np.zeros((m, self.n + 1, self.n + 1, self.n))
            valid = np.ones(m, dtype=bool)
            if ok is not None:
                valid &= np.broadcast_to(np.asarray(value(ok), dtype=bool), (m,))
            for (j, k), c in zip(self._upper, comps):
                if isinstance(c, Dual):
                    v, d = c.v, c.d
                else:
                    v, d = c, (0.0,) * self.n
                v = np.broadcast_to(np.asarray(v, dtype=float), (m,))
                g[:, j, k] = g[:, k, j] = v
                valid &= np.isfinite(v)
                for l in range(self.n):
                    dl = np.broadcast_to(np.asarray(d[l], dtype=float), (m,))
                    dg[:, j, k, l] = dg[:, k, j, l] = dl
                    valid &= np.isfinite(dl)
            valid &= np.where(np.isfinite(g[:, 0, 0]), g[:, 0, 0], -1.0) > 0.0
        g[~valid] = np.nan
        return g, dg, valid

    # -- spatial determinant -------------------------------------------------

    def _spatial_det_from_comps(self, comps):
        n = self.n
        if n == 1:
            return comps[self._upper.index((1, 1))]
        if n == 2:
            g11 = comps[3]
            g12 = comps[4]
            g22 = comps[5]
            return g11 * g22 - g12 * g12
        g11, g12, g13 = comps[4], comps[5], comps[6]
        g22, g23 = comps[7], comps[8]
        g33 = comps[9]
        return (
            g11 * (g22 * g33 - g23 * g23)
            - g12 * (g12 * g33 - g23 * g13)
            + g13 * (g12 * g23 - g22 * g13)
        )

    def spatial_det(self, x):
        """Determinant of the spatial block [g^{jk}]_{j,k>=1} at one point."""
        comps, ok = self._eval_scalar(tuple(float(c) for c in x))
        if ok is not None and not bool(ok):
            raise MetricDomainError(f"{self.name}: point {tuple(x)} outside metric domain")
        det = value(self._spatial_det_from_comps(comps))
        if not math.isfinite(det):
            raise MetricDomainError(f"{self.name}: singular metric at {tuple(x)}")
        return det

    def spatial_det_batch(self, xs):
        """Batched spatial determinant; returns (det, valid)."""
        m = np.shape(xs[0])[0]
        with np.errstate(all="ignore"):
            comps, ok = self._eval(tuple(np.asarray(c, dtype=float) for c in xs))
            det = np.broadcast_to(
                np.asarray(value(self._spatial_det_from_comps(comps)), dtype=float), (m,)
            ).copy()
            valid = np.isfinite(det)
            if ok is not None:
                valid &= np.broadcast_to(np.asarray(ok, dtype=bool), (m,))
        det[~valid] = np.nan
        return det, valid

    def spatial_det_with_gradient(self, x):
        """Spatial determinant and its exact gradient, (float, ndarray (n,))."""
        seeded = dual.seed(tuple(float(c) for c in x))
        comps, ok = self._eval_scalar(seeded)
        if ok is not None and not bool(value(ok)):
            raise MetricDomainError(f"{self.name}: point {tuple(x)} outside metric domain")
        det = self._spatial_det_from_comps(comps)
        if isinstance(det, Dual):
            v, d = det.v, np.asarray(det.d, dtype=float)
        else:
            v, d = det, np.zeros(self.n)
        if not (math.isfinite(v) and np.all(np.isfinite(d))):
            raise MetricDomainError(f"{self.name}: singular metric at {tuple(x)}")
        return v, d

    def spatial_det_with_gradient_batch(self, xs):
        """Batched spatial determinant with exact gradient.

        Returns (det, grad, valid) with shapes (m,), (m, n), (m,).
        """
        m = np.shape(xs[0])[0]
        arrs = tuple(np.asarray(c, dtype=float) for c in xs)
        with np.errstate(all="ignore"):
            comps, ok = self._eval(dual.seed(arrs))
            det = self._spatial_det_from_comps(comps)
            if isinstance(det, Dual):
                v = np.broadcast_to(np.asarray(det.v, dtype=float), (m,)).copy()
                grad = np.stack(
                    [
                        np.broadcast_to(np.asarray(det.d[l], dtype=float), (m,))
                        for l in range(self.n)
                    ],
                    axis=1,
                ).copy()
            else:
                v = np.broadcast_to(np.asarray(det, dtype=float), (m,)).copy()
                grad = np.zeros((m, self.n))
            valid = np.isfinite(v) & np.all(np.isfinite(grad), axis=1)
            if ok is not None:
                valid &= np.broadcast_to(np.asarray(value(ok), dtype=bool), (m,))
        v[~valid] = np.nan
        grad[~valid] = np.nan
        return v, grad, valid

    def in_domain(self, x):
        """True if the metric evaluates cleanly at the point."""
        try:
            self.matrix(x)
            return True
        except MetricDomainError:
            return False

    def _to_matrix(self, vals, dtype):
        g = np.empty((self.n + 1, self.n + 1), dtype=dtype)
        for (j, k), v in zip(self._upper, vals):
            g[j, k] = v
            g[k, j] = v
        return g

    def __repr__(self):
        ps = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"SpacetimeMetric({self.name}, n={self.n}, {ps})"


# -- built-in families -------------------------------------------------------


def acoustic_vortex(A, B):
    """Draining/rotating vortex flow metric on the plane (unit density and sound speed).

    The background flow is v = (A/r) r_hat + (B/r) phi_hat.  Components:
    g^{00} = 1, g^{0j} = v^j, g^{jk} = -delta_jk + v^j v^k.  A < 0 gives an
    inward drain (black-hole side); the ergosphere sits at r = sqrt(A^2+B^2).
    """
    A = float(A)
    B = float(B)
    if A == 0.0 and B == 0.0:
        raise ParameterError("acoustic_vortex requires a nonzero flow (A, B)")

    def core(xs):
        x1, x2 = xs
        r2 = x1 * x1 + x2 * x2
        v1 = (A * x1 - B * x2) / r2
        v2 = (A * x2 + B * x1) / r2
        comps = [
            1.0,
            v1,
            v2,
            v1 * v1 - 1.0,
            v1 * v2,
            v2 * v2 - 1.0,
        ]
        ok = value(r2) > 0.0
        return comps, ok

    return SpacetimeMetric(2, core, "acoustic_vortex", {"A": A, "B": B})


def gordon(w1_src, w2_src, n_src, c=1.0, params=None):
    """Optical-medium metric for a moving dielectric on the plane.

    The flow components w1, w2 and the refractive index are expression
    strings over x1, x2 and the names in ``params``.  With u the unit
    timelike vector of the flow, the inverse metric is
    eta^{jk} + (n^2 - 1) u^j u^k; the domain requires |w| < c.
    """
    c = float(c)
    if c <= 0.0:
        raise ParameterError("gordon requires c > 0")
    params = dict(params or {})
    pnames = tuple(params.keys())
    e_w1 = parse_expression(w1_src, 2, pnames)
    e_w2 = parse_expression(w2_src, 2, pnames)
    e_n = parse_expression(n_src, 2, pnames)

    def core(xs):
        w1 = e_w1(xs, params)
        w2 = e_w2(xs, params)
        nx = e_n(xs, params)
        s = (w1 * w1 + w2 * w2) / (c * c)
        gamma2 = 1.0 / (1.0 - s)
        t = (nx * nx - 1.0) * gamma2
        u1 = w1 / c
        u2 = w2 / c
        comps = [
            1.0 + t,
            t * u1,
            t * u2,
            t * u1 * u1 - 1.0,
            t * u1 * u2,
            t * u2 * u2 - 1.0,
        ]
        sv = value(s)
        nv = value(nx)
        ok = (sv < 1.0) & (nv > 0.0) if not isinstance(sv, float) else (sv < 1.0 and nv > 0.0)
        return comps, ok

    shown = {"w1": w1_src, "w2": w2_src, "n": n_src, "c": c}
    shown.update(params)
    return SpacetimeMetric(2, core, "gordon", shown)


def gordon_radial(alpha, n_index, c=1.0):
    """Gordon metric preset: inward radial drain w = -(alpha/r) r_hat, constant index.

    The ergosphere (equal to the horizon here) sits at r = alpha * n / c.
    Requires alpha > 0, n_index > 1, c > 0.
    """
    alpha = float(alpha)
    n_index = float(n_index)
    c = float(c)
    if alpha <= 0.0:
        raise ParameterError("gordon_radial requires alpha > 0 (inward drain strength)")
    if n_index <= 1.0:
        raise ParameterError("gordon_radial requires refractive index > 1")
    if c <= 0.0:
        raise ParameterError("gordon_radial requires c > 0")
    m = gordon(
        "-alpha*x1/(x1^2+x2^2)",
        "-alpha*x2/(x1^2+x2^2)",
        "n_index",
        c=c,
        params={"alpha": alpha, "n_index": n_index},
    )
    m.name = "gordon_radial"
    m.params = {"alpha": alpha, "n_index": n_index, "c": c}
    return m


def schwarzschild_equatorial(m):
    """Equatorial slice of a non-rotating source in horizon-regular form.

    Inverse components: g^{00} = 1 + 2m/R, g^{0j} = -2m x_j / R^2,
    g^{jk} = -delta_jk + (2m/R) x_j x_k / R^2, with R = |x|.  The ergosphere
    and horizon coincide at R = 2m.
    """
    m = float(m)
    if m <= 0.0:
        raise ParameterError("schwarzschild_equatorial requires m > 0")

    def core(xs):
        x1, x2 = xs
        R2 = x1 * x1 + x2 * x2
        R = dual.sqrt(R2)
        f = 2.0 * m / R
        n1 = x1 / R
        n2 = x2 / R
        comps = [
            1.0 + f,
            -f * n1,
            -f * n2,
            f * n1 * n1 - 1.0,
            f * n1 * n2,
            f * n2 * n2 - 1.0,
        ]
        ok = value(R2) > 0.0
        return comps, ok

    return SpacetimeMetric(2, core, "schwarzschild_equatorial", {"m": m})


def _kerr_core(m, a):
    a2 = a * a

    def core(xs):
        rho, z = xs
        q = rho * rho + z * z - a2
        r2 = 0.5 * (q + dual.sqrt(q * q + 4.0 * a2 * (z * z)))
        r = dual.sqrt(r2)
        r2a2 = r2 + a2
        denom = r2 * r2 + a2 * (z * z)
        K = 2.0 * m * r * r2 / denom
        l_rho = rho * r / r2a2
        l_z = z / r
        comps = [
            1.0 + K,
            -K * l_rho,
            -K * l_z,
            K * l_rho * l_rho - 1.0,
            K * l_rho * l_z,
            K * l_z * l_z - 1.0,
        ]
        rv = value(r)
        ok = rv > 1e-12
        return comps, ok

    return core


def kerr_restricted(m, a):
    """Rotating source on the (rho, z) half-plane with the angular momentum frozen.

    Uses the horizon-regular (Kerr-Schild style) inverse components built
    from the ellipsoidal radius r(rho, z) solving
    rho^2/(r^2+a^2) + z^2/r^2 = 1.  The zero sets of the spatial determinant
    are the ellipses r = m +/- sqrt(m^2 - a^2).  The coordinate axis rho = 0
    is regular; the ring-singularity disk (z = 0, rho <= |a|, where r -> 0)
    is excluded from the domain.
    """
    m = float(m)
    a = float(a)
    if m <= 0.0:
        raise ParameterError("kerr_restricted requires m > 0")
    met = SpacetimeMetric(
        2, _kerr_core(m, a), "kerr_restricted", {"m": m, "a": a}, coord_names=("rho", "z")
    )
    return met


_BUILTIN_FACTORIES = {
    "acoustic": (acoustic_vortex, ("A", "B")),
    "gordon": (gordon_radial, ("alpha", "n_index", "c")),
    "schwarzschild": (schwarzschild_equatorial, ("m",)),
    "kerr": (kerr_restricted, ("m", "a")),
}


def build_builtin(kind, params):
    """Construct a built-in metric by name from a parameter mapping."""
    if kind not in _BUILTIN_FACTORIES:
        raise MetricConfigError(
            f"unknown builtin {kind!r}; expected one of {sorted(_BUILTIN_FACTORIES)}"
        )
    factory, names = _BUILTIN_FACTORIES[kind]
    optional = {"c"} if kind == "gordon" else set()
    missing = [p for p in names if p not in params and p not in optional]
    if missing:
        raise MetricConfigError(f"builtin {kind!r} missing parameter(s): {', '.join(missing)}")
    extra = set(params) - set(names)
    if extra:
        raise MetricConfigError(f"builtin {kind!r} got unknown parameter(s): {sorted(extra)}")
    try:
        return factory(**{k: params[k] for k in names if k in params})
    except ParameterError as err:
        raise MetricConfigError(str(err)) from err


def parse_metric_config(text):
    """Parse a TOML metric configuration into a SpacetimeMetric.

    Layout::

        [metric]
        kind = "acoustic"          # acoustic | gordon | schwarzschild | kerr | custom
        n = 2                      # custom only; built-ins fix n = 2

        [metric.params]            # builtin parameters
        A = -1.0
        B = 1.0

        [components]               # custom only: upper-triangle entries g00..gnn
        g00 = "1"
        g01 = "0"
        ...

        [params]                   # named constants for custom expressions
        k = 2.0

        [validation]               # optional probe points, checked now
        sample_points = [[1.0, 0.0]]
    """
    try:
        data = _toml.loads(text)
    except _toml.TOMLDecodeError as err:
        raise MetricConfigError(f"invalid TOML: {err}") from err
    if "metric" not in data or not isinstance(data["metric"], dict):
        raise MetricConfigError("missing [metric] table")
    mt = data["metric"]
    kind = mt.get("kind")
    if not isinstance(kind, str):
        raise MetricConfigError("[metric] needs a string 'kind'")

    if kind != "custom":
        params = mt.get("params", {})
        if not isinstance(params, dict):
            raise MetricConfigError("[metric.params] must be a table")
        metric = build_builtin(kind, params)
    else:
        n = mt.get("n", 2)
        if not isinstance(n, int) or not 1 <= n <= 3:
            raise MetricConfigError("[metric] n must be an integer in 1..3 for custom metrics")
        comps_tbl = data.get("components")
        if not isinstance(comps_tbl, dict):
            raise MetricConfigError("custom metric needs a [components] table")
        params = data.get("params", {})
        if not isinstance(params, dict):
            raise MetricConfigError("[params] must be a table")
        for k, v in params.items():
            if not isinstance(v, (int, float)):
                raise MetricConfigError(f"parameter {k!r} must be a number")
        params = {k: float(v) for k, v in params.items()}
        metric = _build_custom(n, comps_tbl, params)

    val = data.get("validation", {})
    pts = val.get("sample_points", []) if isinstance(val, dict) else []
    for p in pts:
        if not (isinstance(p, list) and len(p) == metric.n):
            raise MetricConfigError(
                f"validation sample point {p!r} must have {metric.n} coordinates"
            )
        try:
            metric.matrix(tuple(float(c) for c in p))
        except MetricDomainError as err:
            raise MetricConfigError(f"validation probe failed: {err}") from err
    return metric


def _build_custom(n, comps_tbl, params):
    pnames = tuple(params.keys())
    wanted = upper_indices(n)
    sources = {}
    seen = set()
    for key, src in comps_tbl.items():
        if not (len(key) == 3 and key[0] == "g" and key[1:].isdigit()):
            raise MetricConfigError(f"unknown component key {key!r}")
        j, k = int(key[1]), int(key[2])
        if j > k:
            j, k = k, j
        if not (0 <= j <= n and 0 <= k <= n):
            raise MetricConfigError(f"component {key!r} out of range for n = {n}")
        if (j, k) in seen:
            raise MetricConfigError(f"component g{j}{k} given more than once")
        seen.add((j, k))
        if not isinstance(src, str):
            raise MetricConfigError(f"component {key!r} must be an expression string")
        sources[(j, k)] = src
    missing = [f"g{j}{k}" for (j, k) in wanted if (j, k) not in sources]
    if missing:
        raise MetricConfigError(f"missing component(s): {', '.join(missing)}")

    exprs = [parse_expression(sources[jk], n, pnames) for jk in wanted]

    def core(xs):
        comps = [e(xs, params) for e in exprs]
        return comps, None

    return SpacetimeMetric(n, core, "custom", dict(params))
