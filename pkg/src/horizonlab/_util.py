"""Shared helpers: worker-count policy, parallel map, stable quadratics."""

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

_ENV_VAR = "HORIZON_LAB_THREADS"


def worker_count():
    """Parallelism cap: HORIZON_LAB_THREADS if set, else min(cpu_count, 4)."""
    raw = os.environ.get(_ENV_VAR)
    if raw is not None:
        try:
            n = int(raw)
        except ValueError:
            n = 1
        return max(1, n)
    return max(1, min(os.cpu_count() or 1, 4))


def thread_map(fn, items):
    """Map fn over items, possibly on a thread pool; order of results is
    always the order of items, so output is deterministic either way."""
    items = list(items)
    n = worker_count()
    if n <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=min(n, len(items))) as pool:
        return list(pool.map(fn, items))


def stable_quadratic(a, b_half, c):
    """Roots of a*x^2 + 2*b_half*x + c = 0 as (larger, smaller).

    Cancellation-free: the root far from zero comes from the quadratic
    formula with the sign chosen to avoid subtraction, the other from the
    product relation c/(a*x1).  Works elementwise on arrays.  The caller
    must ensure the discriminant b_half^2 - a*c is >= 0 (clipped at 0 here
    to absorb roundoff) and a != 0.
    """
    a = np.asarray(a, dtype=float)
    b_half = np.asarray(b_half, dtype=float)
    c = np.asarray(c, dtype=float)
    disc = b_half * b_half - a * c
    sqrt_d = np.sqrt(np.maximum(disc, 0.0))
    sgn = np.where(b_half >= 0.0, 1.0, -1.0)
    q = -(b_half + sgn * sqrt_d)
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = np.where(q != 0.0, q / a, 0.0)
        r2 = np.where(q != 0.0, c / q, 0.0)
    return np.maximum(r1, r2), np.minimum(r1, r2)
