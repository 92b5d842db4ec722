"""Compiled EM inner loop.

One iteration is split into: log-ratio pass, ``exp(-|log-ratio|)``,
accumulation of responsibilities and log-likelihood, then the M-step
passes. For large arrays the exponential goes through numpy's SIMD ``exp``;
for small ones the whole chain stays inside one compiled call.

The per-sample log-likelihood is ``max(a, b) + log(1 + exp(-|a - b|))``.
Factors ``1 + e`` lie in ``[1, 2]``, so they are multiplied in blocks of
512 (at most 2**512) and one log is taken per block.
"""

import math

import numpy as np
from numba import njit

LOG_2PI = math.log(2.0 * math.pi)

# below this many samples the single compiled call is faster
FUSED_MAX_N = 16384

_BLOCK_MASK = 511


@njit(cache=True)
def _log_ratio(ys, lam1, mu1, s1, mu2, v2, t, m):
    log_l1 = math.log(lam1) if lam1 > 0.0 else -math.inf
    lam2 = 1.0 - lam1
    log_l2 = math.log(lam2) if lam2 > 0.0 else -math.inf
    c1 = log_l1 - math.log(2.0 * s1)
    c2 = log_l2 - 0.5 * (LOG_2PI + math.log(v2))
    inv_s1 = 1.0 / s1
    half_inv_v2 = 0.5 / v2
    for i in range(ys.size):
        y = ys[i]
        a = c1 - abs(y - mu1) * inv_s1
        d = y - mu2
        b = c2 - d * d * half_inv_v2
        m[i] = max(a, b)
        t[i] = b - a


@njit(cache=True)
def _exp_neg_abs(t, e):
    for i in range(t.size):
        e[i] = math.exp(-abs(t[i]))


@njit(cache=True)
def _accumulate(t, e, m, g):
    """Fill ``g`` with Laplacian responsibilities; return ``(loglik, n1, n2, ok)``."""
    total = 0.0
    prod = 1.0
    n1 = 0.0
    n2 = 0.0
    for i in range(t.size):
        if not math.isfinite(m[i]):
            return math.nan, 0.0, 0.0, False
        ei = e[i]
        total += m[i]
        prod *= 1.0 + ei
        if (i & _BLOCK_MASK) == _BLOCK_MASK:
            total += math.log(prod)
            prod = 1.0
        gi = (1.0 if t[i] <= 0.0 else ei) / (1.0 + ei)
        g[i] = gi
        n1 += gi
        n2 += 1.0 - gi
    return total + math.log(prod), n1, n2, True


@njit(cache=True)
def _m_update(ys, g, n1, n2, lam1, mu1, s1, mu2, v2, sigma_floor, lambda_floor):
    n = ys.size
    new_mu1, new_s1 = mu1, s1
    if n1 > 0.0:
        half = 0.5 * n1
        acc = 0.0
        idx = n - 1
        for i in range(n):
            acc += g[i]
            if acc >= half:
                idx = i
                break
        new_mu1 = ys[idx]
        dev = 0.0
        for i in range(n):
            dev += g[i] * abs(ys[i] - new_mu1)
        new_s1 = max(dev / n1, sigma_floor)

    new_mu2, new_v2 = mu2, v2
    if n2 > 0.0:
        acc = 0.0
        for i in range(n):
            acc += (1.0 - g[i]) * ys[i]
        new_mu2 = acc / n2
        var = 0.0
        for i in range(n):
            d = ys[i] - new_mu2
            var += (1.0 - g[i]) * d * d
        new_v2 = max(var / n2, sigma_floor * sigma_floor)

    l1 = max(n1 / n, lambda_floor)
    l2 = max(1.0 - n1 / n, lambda_floor)
    return l1 / (l1 + l2), new_mu1, new_s1, new_mu2, new_v2


@njit(cache=True)
def _step_norm(old, new, scale):
    return (
        (new[0] - old[0]) ** 2
        + ((new[1] - old[1]) / scale) ** 2
        + ((new[2] - old[2]) / scale) ** 2
        + ((new[3] - old[3]) / scale) ** 2
        + ((math.sqrt(new[4]) - math.sqrt(old[4])) / scale) ** 2
    )


@njit(cache=True)
def _fused_chain(ys, theta, tol, max_iter, scale, sigma_floor, lambda_floor):
    n = ys.size
    t = np.empty(n)
    m = np.empty(n)
    e = np.empty(n)
    g = np.empty(n)
    logliks = np.empty(max_iter)
    for it in range(max_iter):
        _log_ratio(ys, theta[0], theta[1], theta[2], theta[3], theta[4], t, m)
        _exp_neg_abs(t, e)
        ll, n1, n2, ok = _accumulate(t, e, m, g)
        if not ok:
            return theta, logliks[:it], False, False
        logliks[it] = ll
        new = _m_update(
            ys, g, n1, n2, theta[0], theta[1], theta[2], theta[3], theta[4],
            sigma_floor, lambda_floor,
        )
        step = _step_norm(theta, new, scale)
        theta = new
        if step < tol:
            return theta, logliks[: it + 1], True, True
    return theta, logliks, False, True


def _vector_chain(ys, theta, tol, max_iter, scale, sigma_floor, lambda_floor):
    n = ys.size
    t = np.empty(n)
    m = np.empty(n)
    e = np.empty(n)
    g = np.empty(n)
    logliks = []
    for _ in range(max_iter):
        _log_ratio(ys, *theta, t, m)
        np.abs(t, out=e)
        np.negative(e, out=e)
        with np.errstate(invalid="ignore"):
            np.exp(e, out=e)
        ll, n1, n2, ok = _accumulate(t, e, m, g)
        if not ok:
            return theta, np.asarray(logliks), False, False
        logliks.append(ll)
        new = _m_update(ys, g, n1, n2, *theta, sigma_floor, lambda_floor)
        step = _step_norm(theta, new, scale)
        theta = new
        if step < tol:
            return theta, np.asarray(logliks), True, True
    return theta, np.asarray(logliks), False, True


def em_chain(ys, theta, tol, max_iter, scale, sigma_floor, lambda_floor):
    """Run one EM chain on ascending samples ``ys``.

    ``theta`` is ``(lambda1, mu1, sigma1, mu2, sigma2_sq)``. Returns
    ``(theta, logliks, converged, ok)``; ``ok`` is false if some sample had
    zero density under both components. ``logliks[i]`` is the
    log-likelihood of the parameters entering iteration ``i``.
    """
    theta = tuple(float(v) for v in theta)
    args = (float(tol), int(max_iter), float(scale), float(sigma_floor), float(lambda_floor))
    if ys.size <= FUSED_MAX_N:
        return _fused_chain(ys, theta, *args)
    return _vector_chain(ys, theta, *args)
