"""Pure numpy versions of the hot kernels. Same signatures as ``_ckernels``."""
from __future__ import annotations

import numpy as np

BACKEND = "python"

# status codes shared with the compiled kernels
OK = 0
NO_BRACKET = 1


def project_simplex(y: np.ndarray) -> np.ndarray:
    """Euclidean projection of y onto the probability simplex (sort based)."""
    y = np.asarray(y, dtype=float)
    u = np.sort(y)[::-1]
    css = np.cumsum(u)
    j = np.arange(1, y.size + 1)
    tau = np.flatnonzero(u + (1.0 - css) / j > 0)[-1] + 1
    lam = (1.0 - css[tau - 1]) / tau
    return np.maximum(y + lam, 0.0)


def pbar_eval(u: float, sorted_banks: np.ndarray, weights: np.ndarray) -> float:
    n = sorted_banks.shape[1]
    total = 0.0
    for c in range(sorted_banks.shape[0]):
        if weights[c] != 0.0:
            total += weights[c] * np.searchsorted(sorted_banks[c], u, side="right")
    return total / n


def _avar_at(u: float, sorted_banks, suffix, weights, p: float) -> float:
    n = sorted_banks.shape[1]
    excess = 0.0
    for c in range(sorted_banks.shape[0]):
        if weights[c] != 0.0:
            k = np.searchsorted(sorted_banks[c], u, side="right")
            excess += weights[c] * (suffix[c, k] - (n - k) * u)
    return u + excess / (n * (1.0 - p))


def saa_point(sorted_banks, suffix, weights, p, eps, lo0, hi0):
    """Bisection on the sampled first-order condition, then the AV@R value.

    Returns (u, c, pbar(u), status).
    """
    lo, hi = float(lo0), float(hi0)
    width = max(hi - lo, 1e-12 * max(1.0, abs(lo), abs(hi)), 1e-300)
    step = width
    p_lo = pbar_eval(lo, sorted_banks, weights)
    k = 0
    while p_lo >= p:
        if k >= 64:
            return np.nan, np.nan, np.nan, NO_BRACKET
        lo -= step
        step *= 2.0
        k += 1
        p_lo = pbar_eval(lo, sorted_banks, weights)
    step = width
    p_hi = pbar_eval(hi, sorted_banks, weights)
    k = 0
    while p_hi < p:
        if k >= 64:
            return np.nan, np.nan, np.nan, NO_BRACKET
        hi += step
        step *= 2.0
        k += 1
        p_hi = pbar_eval(hi, sorted_banks, weights)
    # invariant: pbar(lo) < p <= pbar(hi)
    while True:
        if abs(p_hi - p) <= eps:
            u, pu = hi, p_hi
            break
        if abs(p_lo - p) <= eps:
            u, pu = lo, p_lo
            break
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            u, pu = hi, p_hi
            break
        pm = pbar_eval(mid, sorted_banks, weights)
        if pm < p:
            lo, p_lo = mid, pm
        else:
            hi, p_hi = mid, pm
    return u, _avar_at(u, sorted_banks, suffix, weights, p), pu, OK


def saa_grid(sorted_banks, suffix, weight_rows, p, eps, lo0, hi0):
    """Evaluate ``saa_point`` for every row of ``weight_rows``."""
    g = weight_rows.shape[0]
    us = np.empty(g)
    cs = np.empty(g)
    ps = np.empty(g)
    status = np.zeros(g, dtype=np.int32)
    for r in range(g):
        us[r], cs[r], ps[r], status[r] = saa_point(sorted_banks, suffix, weight_rows[r], p, eps, lo0, hi0)
    return us, cs, ps, status
