"""Forward-mode automatic differentiation on scalars or numpy arrays.

A Dual carries a value and a fixed-length tuple of partial derivatives.
Values may be python floats or numpy arrays (one entry per batch element),
and the arithmetic is written so both work transparently.  This is the
single derivative engine of the package: metric gradients are always exact
products of the chain rule, never finite differences.
"""

from __future__ import annotations

import math

import numpy as np


class Dual:
    """Value plus partial derivatives with respect to n independent inputs."""

    __slots__ = ("v", "d")

    # keep numpy from hijacking arithmetic on ndarray <op> Dual
    __array_ufunc__ = None

    def __init__(self, v, d):
        self.v = v
        self.d = d

    def __repr__(self):
        return f"Dual(v={self.v!r}, d={self.d!r})"

    # -- addition ---------------------------------------------------------
    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.v + other.v, tuple(a + b for a, b in zip(self.d, other.d)))
        return Dual(self.v + other, self.d)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.v - other.v, tuple(a - b for a, b in zip(self.d, other.d)))
        return Dual(self.v - other, self.d)

    def __rsub__(self, other):
        return Dual(other - self.v, tuple(-a for a in self.d))

    def __neg__(self):
        return Dual(-self.v, tuple(-a for a in self.d))

    # -- multiplication ---------------------------------------------------
    def __mul__(self, other):
        if isinstance(other, Dual):
            sv, ov = self.v, other.v
            return Dual(sv * ov, tuple(a * ov + sv * b for a, b in zip(self.d, other.d)))
        return Dual(self.v * other, tuple(a * other for a in self.d))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            ov = other.v
            q = self.v / ov
            return Dual(q, tuple((a - q * b) / ov for a, b in zip(self.d, other.d)))
        return Dual(self.v / other, tuple(a / other for a in self.d))

    def __rtruediv__(self, other):
        q = other / self.v
        s = -q / self.v
        return Dual(q, tuple(s * a for a in self.d))

    def __pow__(self, k):
        if not isinstance(k, int):
            raise TypeError("Dual exponent must be an integer")
        if k == 0:
            return Dual(self.v * 0 + 1.0, tuple(a * 0 for a in self.d))
        if k == 1:
            return self
        if k == 2:
            return self * self
        vkm1 = self.v ** (k - 1)
        s = k * vkm1
        return Dual(vkm1 * self.v, tuple(s * a for a in self.d))


def value(x):
    """Value part of a Dual, or the argument itself."""
    return x.v if isinstance(x, Dual) else x


def seed(xs):
    """Turn a point (sequence of scalars/arrays) into Duals with unit partials."""
    n = len(xs)
    out = []
    for i, x in enumerate(xs):
        d = tuple((1.0 if j == i else 0.0) for j in range(n))
        out.append(Dual(x, d))
    return tuple(out)


def _sqrt_val(v):
    return math.sqrt(v) if type(v) is float else np.sqrt(v)


def _sin_val(v):
    return math.sin(v) if type(v) is float else np.sin(v)


def _cos_val(v):
    return math.cos(v) if type(v) is float else np.cos(v)


def sqrt(x):
    if isinstance(x, Dual):
        r = _sqrt_val(x.v)
        s = 0.5 / r
        return Dual(r, tuple(s * a for a in x.d))
    return _sqrt_val(x)


def sin(x):
    if isinstance(x, Dual):
        c = _cos_val(x.v)
        return Dual(_sin_val(x.v), tuple(c * a for a in x.d))
    return _sin_val(x)


def cos(x):
    if isinstance(x, Dual):
        s = -_sin_val(x.v)
        return Dual(_cos_val(x.v), tuple(s * a for a in x.d))
    return _cos_val(x)


def atan2(y, x):
    """Two-argument arctangent; d(atan2) = (x dy - y dx) / (x^2 + y^2)."""
    yd = isinstance(y, Dual)
    xd = isinstance(x, Dual)
    if not (yd or xd):
        if type(y) is float and type(x) is float:
            return math.atan2(y, x)
        return np.arctan2(y, x)
    yv = y.v if yd else y
    xv = x.v if xd else x
    if type(yv) is float and type(xv) is float:
        av = math.atan2(yv, xv)
    else:
        av = np.arctan2(yv, xv)
    den = xv * xv + yv * yv
    n = len(y.d) if yd else len(x.d)
    parts = []
    for j in range(n):
        t = 0.0
        if yd:
            t = xv * y.d[j]
        if xd:
            t = t - yv * x.d[j] if yd else -yv * x.d[j]
        parts.append(t / den)
    return Dual(av, tuple(parts))
