"""Independent numerical oracles shared by the test suite.

These deliberately use different code paths from the package (finite
differences instead of dual numbers, numpy root finding instead of the
closed-form branch logic) so that agreement is meaningful.
"""

import numpy as np


def five_point_derivative(f, x, h=1e-5):
    """Five-point central difference df/dx at scalar x."""
    return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h)


def five_point_gradient(f, x, h=1e-5):
    """Five-point central-difference gradient of scalar f at point x (1-D array)."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = 1.0
        g[i] = (
            -f(x + 2 * h * e) + 8 * f(x + h * e) - 8 * f(x - h * e) + f(x - 2 * h * e)
        ) / (12 * h)
    return g


def quadratic_roots_desc(a, b2, c):
    """Roots of a*t^2 + 2*b2*t + c = 0 via numpy.roots, sorted descending."""
    r = np.roots([a, 2.0 * b2, c])
    r = np.sort(np.real_if_close(r))[::-1]
    return float(r[0]), float(r[1])
