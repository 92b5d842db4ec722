"""Laplacian, Gaussian and Laplacian-Gaussian mixture (LGM) densities.

All evaluation functions accept scalars or arrays and broadcast like numpy
ufuncs; a scalar input returns a Python float.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc, ndtri

from .errors import EmptyInput, NoConvergence, NonFiniteSample

LOG_2PI = math.log(2.0 * math.pi)

QUANTILE_TOL = 1e-10
QUANTILE_MAX_ITER = 200


def _out(value):
    if np.ndim(value) == 0:
        return float(value)
    return value


def _require_finite(name, value):
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class LaplacianParams:
    mu1: float
    sigma1: float

    def __post_init__(self):
        object.__setattr__(self, "mu1", float(self.mu1))
        object.__setattr__(self, "sigma1", float(self.sigma1))
        _require_finite("mu1", self.mu1)
        _require_finite("sigma1", self.sigma1)
        if self.sigma1 <= 0:
            raise ValueError(f"sigma1 must be positive, got {self.sigma1!r}")

    def pdf(self, y):
        return laplacian_pdf(y, self)

    def logpdf(self, y):
        return laplacian_logpdf(y, self)

    def cdf(self, y):
        return laplacian_cdf(y, self)

    def ppf(self, prob):
        return laplacian_quantile(prob, self)

    def to_dict(self):
        return {"mu1": self.mu1, "sigma1": self.sigma1}


@dataclass(frozen=True)
class GaussianParams:
    mu2: float
    sigma2_sq: float

    def __post_init__(self):
        object.__setattr__(self, "mu2", float(self.mu2))
        object.__setattr__(self, "sigma2_sq", float(self.sigma2_sq))
        _require_finite("mu2", self.mu2)
        _require_finite("sigma2_sq", self.sigma2_sq)
        if self.sigma2_sq <= 0:
            raise ValueError(f"sigma2_sq must be positive, got {self.sigma2_sq!r}")

    @property
    def sigma2(self):
        return math.sqrt(self.sigma2_sq)

    def pdf(self, y):
        return gaussian_pdf(y, self)

    def logpdf(self, y):
        return gaussian_logpdf(y, self)

    def cdf(self, y):
        return gaussian_cdf(y, self)

    def ppf(self, prob):
        return gaussian_quantile(prob, self)

    def to_dict(self):
        return {"mu2": self.mu2, "sigma2_sq": self.sigma2_sq}


@dataclass(frozen=True)
class LgmParams:
    """Two-component mixture ``lambda1 * Laplace + lambda2 * Gauss``.

    ``lambda2`` is not an argument; it is always ``1 - lambda1``.
    """

    lambda1: float
    laplacian: LaplacianParams
    gaussian: GaussianParams
    lambda2: float = field(init=False)

    def __post_init__(self):
        lam = float(self.lambda1)
        if not 0.0 <= lam <= 1.0:
            raise ValueError(f"lambda1 must lie in [0, 1], got {lam!r}")
        object.__setattr__(self, "lambda1", lam)
        object.__setattr__(self, "lambda2", 1.0 - lam)

    @classmethod
    def from_values(cls, lambda1, mu1, sigma1, mu2, sigma2_sq):
        return cls(lambda1, LaplacianParams(mu1, sigma1), GaussianParams(mu2, sigma2_sq))

    @classmethod
    def from_dict(cls, d):
        return cls.from_values(d["lambda1"], d["mu1"], d["sigma1"], d["mu2"], d["sigma2_sq"])

    def to_dict(self):
        return {
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            **self.laplacian.to_dict(),
            **self.gaussian.to_dict(),
        }

    def pdf(self, y):
        return lgm_pdf(y, self)

    def logpdf(self, y):
        return lgm_logpdf(y, self)

    def cdf(self, y):
        return lgm_cdf(y, self)

    def ppf(self, prob):
        return lgm_quantile(prob, self)


# ----------------------------------------------------------------------------
# Laplacian component
# ----------------------------------------------------------------------------

def laplacian_pdf(y, p: LaplacianParams):
    y = np.asarray(y, dtype=float)
    return _out(np.exp(-np.abs(y - p.mu1) / p.sigma1) / (2.0 * p.sigma1))


def laplacian_logpdf(y, p: LaplacianParams):
    y = np.asarray(y, dtype=float)
    return _out(-np.abs(y - p.mu1) / p.sigma1 - math.log(2.0 * p.sigma1))


def laplacian_cdf(y, p: LaplacianParams):
    z = (np.asarray(y, dtype=float) - p.mu1) / p.sigma1
    # each branch evaluated only where its exponent is non-positive
    half_tail = 0.5 * np.exp(-np.abs(z))
    return _out(np.where(z < 0, half_tail, 1.0 - half_tail))


def laplacian_quantile(prob, p: LaplacianParams):
    q = np.asarray(prob, dtype=float)
    with np.errstate(divide="ignore"):
        lower = p.mu1 + p.sigma1 * np.log(2.0 * q)
        upper = p.mu1 - p.sigma1 * np.log(2.0 * (1.0 - q))
    return _out(np.where(q < 0.5, lower, upper))


# ----------------------------------------------------------------------------
# Gaussian component
# ----------------------------------------------------------------------------

def gaussian_pdf(y, p: GaussianParams):
    y = np.asarray(y, dtype=float)
    d = y - p.mu2
    return _out(np.exp(-0.5 * d * d / p.sigma2_sq) / math.sqrt(2.0 * math.pi * p.sigma2_sq))


def gaussian_logpdf(y, p: GaussianParams):
    y = np.asarray(y, dtype=float)
    d = y - p.mu2
    return _out(-0.5 * d * d / p.sigma2_sq - 0.5 * (LOG_2PI + math.log(p.sigma2_sq)))


def gaussian_cdf(y, p: GaussianParams):
    z = (np.asarray(y, dtype=float) - p.mu2) / math.sqrt(2.0 * p.sigma2_sq)
    return _out(0.5 * erfc(-z))


def gaussian_quantile(prob, p: GaussianParams):
    return _out(p.mu2 + math.sqrt(p.sigma2_sq) * ndtri(np.asarray(prob, dtype=float)))


# ----------------------------------------------------------------------------
# Mixture
# ----------------------------------------------------------------------------

def lgm_pdf(y, p: LgmParams):
    return _out(p.lambda1 * laplacian_pdf(y, p.laplacian) + p.lambda2 * gaussian_pdf(y, p.gaussian))


def component_log_terms(y, p: LgmParams):
    """Return ``(log(lambda1 f1(y)), log(lambda2 f2(y)))`` as two arrays.

    A zero mixing weight yields ``-inf`` for that component.
    """
    y = np.asarray(y, dtype=float)
    with np.errstate(divide="ignore"):
        log_l1 = math.log(p.lambda1) if p.lambda1 > 0 else -math.inf
        log_l2 = math.log(p.lambda2) if p.lambda2 > 0 else -math.inf
    a = log_l1 + np.asarray(laplacian_logpdf(y, p.laplacian))
    b = log_l2 + np.asarray(gaussian_logpdf(y, p.gaussian))
    return a, b


def lgm_logpdf(y, p: LgmParams):
    a, b = component_log_terms(y, p)
    return _out(np.logaddexp(a, b))


def _check_samples(y):
    y = np.asarray(y, dtype=float).ravel()
    if y.size == 0:
        raise EmptyInput("sample array is empty")
    if not np.all(np.isfinite(y)):
        bad = int(np.flatnonzero(~np.isfinite(y))[0])
        raise NonFiniteSample(f"sample {bad} is not finite ({y[bad]!r})")
    return y


def lgm_log_likelihood(y, p: LgmParams) -> float:
    y = _check_samples(y)
    return float(np.sum(lgm_logpdf(y, p)))


def lgm_cdf(y, p: LgmParams):
    return _out(p.lambda1 * laplacian_cdf(y, p.laplacian) + p.lambda2 * gaussian_cdf(y, p.gaussian))


def lgm_quantile(prob, p: LgmParams):
    """Invert :func:`lgm_cdf` by bracketed bisection.

    The starting bracket is spanned by the two component quantiles at
    ``prob``; it is widened by doubling in the (numerically unlikely) case
    that it does not straddle the target.

    Raises
    ------
    NoConvergence
        If some entry is still outside tolerance after 200 halvings.
    """
    q = np.asarray(prob, dtype=float)
    if np.any((q <= 0) | (q >= 1)) or np.any(np.isnan(q)):
        raise ValueError("quantile probabilities must lie strictly inside (0, 1)")
    shape = q.shape
    q = q.ravel()

    ql = np.asarray(laplacian_quantile(q, p.laplacian), dtype=float).reshape(-1)
    qg = np.asarray(gaussian_quantile(q, p.gaussian), dtype=float).reshape(-1)
    lo = np.minimum(ql, qg)
    hi = np.maximum(ql, qg)
    width = np.maximum(hi - lo, max(p.laplacian.sigma1, p.gaussian.sigma2) * 1e-3)
    for _ in range(64):
        below = np.asarray(lgm_cdf(lo, p)) > q
        above = np.asarray(lgm_cdf(hi, p)) < q
        if not (below.any() or above.any()):
            break
        lo = np.where(below, lo - width, lo)
        hi = np.where(above, hi + width, hi)
        width = width * 2.0

    mid = 0.5 * (lo + hi)
    active = np.ones(q.shape, dtype=bool)
    for _ in range(QUANTILE_MAX_ITER):
        mid = np.where(active, 0.5 * (lo + hi), mid)
        f = np.asarray(lgm_cdf(mid, p), dtype=float)
        done = np.abs(f - q) <= QUANTILE_TOL
        # the bracket has shrunk to adjacent floats: mid is as good as it gets
        collapsed = (mid <= lo) | (mid >= hi)
        active &= ~(done | collapsed)
        if not active.any():
            break
        go_right = active & (f < q)
        go_left = active & (f > q)
        lo = np.where(go_right, mid, lo)
        hi = np.where(go_left, mid, hi)
    else:
        raise NoConvergence(
            f"quantile bisection did not converge in {QUANTILE_MAX_ITER} iterations"
        )
    return _out(mid.reshape(shape))


def sample_lgm(n: int, p: LgmParams, seed: int) -> np.ndarray:
    """Draw ``n`` i.i.d. samples from the mixture.

    Component labels come from one uniform stream, Laplace draws from the
    inverse CDF of a second, Gaussian draws from numpy's normal generator.
    """
    n = int(n)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    pick = rng.random(n) < p.lambda1
    u = np.maximum(rng.random(n), np.finfo(float).tiny)
    lap = laplacian_quantile(u, p.laplacian)
    gau = p.gaussian.mu2 + p.gaussian.sigma2 * rng.standard_normal(n)
    return np.where(pick, lap, gau)
