"""EM estimation of the Laplacian-Gaussian mixture and standalone MLE baselines."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .distributions import (
    GaussianParams,
    LaplacianParams,
    LgmParams,
    LOG_2PI,
    _check_samples,
    component_log_terms,
)
from ._kernels import em_chain
from .errors import DegenerateDensity, DegenerateInput, EmptyInput, TooFewSamples

MIN_FIT_SAMPLES = 10


def sample_hash(y) -> str:
    """SHA-256 of the float64 byte image of ``y``; identifies a sample array."""
    arr = np.ascontiguousarray(np.asarray(y, dtype=np.float64).ravel())
    return hashlib.sha256(arr.tobytes()).hexdigest()


@dataclass(frozen=True)
class EmConfig:
    """Controls for :func:`fit_lgm`.

    ``sigma_floor=None`` means ``1e-8`` times the sample standard deviation.
    """

    tol: float = 1e-10
    max_iter: int = 500
    n_restarts: int = 5
    sigma_floor: float | None = None
    lambda_floor: float = 1e-6

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.n_restarts < 1:
            raise ValueError("n_restarts must be >= 1")
        if self.sigma_floor is not None and not self.sigma_floor > 0:
            raise ValueError("sigma_floor must be positive")
        if not 0.0 <= self.lambda_floor < 0.5:
            raise ValueError("lambda_floor must lie in [0, 0.5)")


@dataclass(frozen=True)
class Responsibilities:
    gamma: np.ndarray

    @property
    def n1(self) -> float:
        return float(self.gamma[:, 0].sum())

    @property
    def n2(self) -> float:
        return float(self.gamma[:, 1].sum())


@dataclass(frozen=True)
class EmTrace:
    log_likelihoods: np.ndarray
    iterations: int
    converged: bool


@dataclass(frozen=True)
class FitResult:
    params: LgmParams
    trace: EmTrace
    final_loglik: float
    n1: float
    n2: float
    restart: int = 0
    data_hash: str = ""


# ----------------------------------------------------------------------------
# E-step
# ----------------------------------------------------------------------------

def _posterior(y, p: LgmParams):
    """Log-space responsibilities of the Laplacian component.

    Returns ``(gamma1, per-sample log-likelihood)``.
    """
    a, b = component_log_terms(y, p)
    ll = np.logaddexp(a, b)
    if not np.all(np.isfinite(ll)):
        bad = int(np.flatnonzero(~np.isfinite(ll))[0])
        raise DegenerateDensity(
            f"both component densities vanish at sample {bad} (y={y[bad]!r}) under {p}"
        )
    return np.exp(a - ll), ll


def e_step(y, p: LgmParams) -> Responsibilities:
    y = _check_samples(y)
    g1, _ = _posterior(y, p)
    return Responsibilities(np.column_stack([g1, 1.0 - g1]))


# ----------------------------------------------------------------------------
# M-step
# ----------------------------------------------------------------------------

def _weighted_median_sorted(ys, w):
    cw = np.cumsum(w)
    idx = int(np.searchsorted(cw, 0.5 * cw[-1], side="left"))
    return ys[min(idx, ys.size - 1)]


def weighted_median(values, weights) -> float:
    """Smallest value whose cumulative normalized weight reaches one half.

    This is the lower end of the interval minimizing ``sum(w * |y - m|)``.
    """
    values = np.asarray(values, dtype=float).ravel()
    weights = np.asarray(weights, dtype=float).ravel()
    if values.size == 0:
        raise EmptyInput("weighted_median of an empty array")
    if values.shape != weights.shape:
        raise ValueError("values and weights must have equal length")
    if np.any(weights < 0) or not np.all(np.isfinite(weights)):
        raise ValueError("weights must be finite and non-negative")
    if not weights.sum() > 0:
        raise EmptyInput("weights sum to zero")
    order = np.argsort(values, kind="stable")
    return float(_weighted_median_sorted(values[order], weights[order]))


def _floor_weights(lam1, lambda_floor):
    l1 = max(lam1, lambda_floor)
    l2 = max(1.0 - lam1, lambda_floor)
    return l1 / (l1 + l2)


def _m_step_sorted(ys, g1, prev: LgmParams, sigma_floor, lambda_floor):
    # ``ys`` ascending, so the weighted median needs no sort
    n = ys.size
    g2 = 1.0 - g1
    n1 = float(g1.sum())
    n2 = float(g2.sum())

    if n1 > 0:
        mu1 = float(_weighted_median_sorted(ys, g1))
        sigma1 = float(np.dot(g1, np.abs(ys - mu1))) / n1
        laplacian = LaplacianParams(mu1, max(sigma1, sigma_floor))
    else:
        laplacian = prev.laplacian

    if n2 > 0:
        mu2 = float(np.dot(g2, ys)) / n2
        d = ys - mu2
        var2 = float(np.dot(g2, d * d)) / n2
        gaussian = GaussianParams(mu2, max(var2, sigma_floor * sigma_floor))
    else:
        gaussian = prev.gaussian

    return LgmParams(_floor_weights(n1 / n, lambda_floor), laplacian, gaussian)


def m_step(y, g: Responsibilities, prev: LgmParams, *, sigma_floor=0.0, lambda_floor=0.0) -> LgmParams:
    """Closed-form maximizer of the expected complete-data log-likelihood.

    The scale updates use the location estimates from this same step. A
    component whose responsibilities are all zero keeps ``prev``'s values.
    """
    y = _check_samples(y)
    gamma = np.asarray(g.gamma, dtype=float)
    if gamma.shape != (y.size, 2):
        raise ValueError(f"responsibilities shape {gamma.shape} does not match {y.size} samples")
    order = np.argsort(y, kind="stable")
    return _m_step_sorted(y[order], gamma[order, 0], prev, sigma_floor, lambda_floor)


# ----------------------------------------------------------------------------
# Initialization and the EM loop
# ----------------------------------------------------------------------------

def _lower_median(sorted_y):
    return float(sorted_y[(sorted_y.size - 1) // 2])


def _spread(y):
    s = float(np.std(y))
    if not s > 0:
        raise DegenerateInput("samples have zero spread")
    return s


def init_params(y, *, min_samples=MIN_FIT_SAMPLES, sigma_floor=0.0) -> LgmParams:
    """Moment/median starting point for EM.

    Laplacian part from the median and mean absolute deviation about it,
    Gaussian part from the mean and (1/N) variance, equal weights.
    """
    y = _check_samples(y)
    if y.size < min_samples:
        raise TooFewSamples(f"need at least {min_samples} samples, got {y.size}")
    _spread(y)
    ys = np.sort(y)
    med = _lower_median(ys)
    mad = float(np.mean(np.abs(ys - med)))
    mean = float(np.mean(ys))
    var = float(np.mean((ys - mean) ** 2))
    return LgmParams(
        0.5,
        LaplacianParams(med, max(mad, sigma_floor)),
        GaussianParams(mean, max(var, sigma_floor * sigma_floor)),
    )


def _restart_inits(base: LgmParams, s, n_restarts, seed, sigma_floor):
    inits = [base]
    rng = np.random.default_rng(seed)
    for _ in range(1, n_restarts):
        signs = rng.choice([-1.0, 1.0], size=2)
        factors = rng.choice([0.5, 2.0], size=2)
        inits.append(
            LgmParams(
                base.lambda1,
                LaplacianParams(
                    base.laplacian.mu1 + signs[0] * 0.1 * s,
                    max(base.laplacian.sigma1 * factors[0], sigma_floor),
                ),
                GaussianParams(
                    base.gaussian.mu2 + signs[1] * 0.1 * s,
                    max(base.gaussian.sigma2_sq * factors[1] ** 2, sigma_floor * sigma_floor),
                ),
            )
        )
    return inits


def _run_chain(ys, p: LgmParams, cfg: EmConfig, s, sigma_floor):
    theta = (p.lambda1, p.laplacian.mu1, p.laplacian.sigma1, p.gaussian.mu2, p.gaussian.sigma2_sq)
    theta, logliks, converged, ok = em_chain(
        ys, theta, cfg.tol, cfg.max_iter, s, sigma_floor, cfg.lambda_floor
    )
    if not ok:
        raise DegenerateDensity(f"both component densities vanish at some sample under {p}")
    trace = EmTrace(np.array(logliks, dtype=float), len(logliks), bool(converged))
    return LgmParams.from_values(*theta), trace


def fit_lgm(y, cfg: EmConfig | None = None, seed: int = 0) -> FitResult:
    """Fit the mixture by EM, keeping the best of ``cfg.n_restarts`` chains.

    Chain 0 starts from :func:`init_params`; the others perturb it with
    seeded location shifts of 0.1 sample standard deviations and scale
    factors of 0.5 or 2. Ties in final log-likelihood go to the lower chain.
    """
    cfg = cfg or EmConfig()
    y = _check_samples(y)
    if y.size < MIN_FIT_SAMPLES:
        raise TooFewSamples(f"need at least {MIN_FIT_SAMPLES} samples, got {y.size}")
    s = _spread(y)
    sigma_floor = cfg.sigma_floor if cfg.sigma_floor is not None else 1e-8 * s
    ys = np.sort(y)

    base = init_params(ys, sigma_floor=sigma_floor)
    best = None
    for r, start in enumerate(_restart_inits(base, s, cfg.n_restarts, seed, sigma_floor)):
        params, trace = _run_chain(ys, start, cfg, s, sigma_floor)
        g1, ll = _posterior(ys, params)
        final = float(ll.sum())
        if best is None or final > best.final_loglik:
            n1 = float(g1.sum())
            best = FitResult(params, trace, final, n1, float((1.0 - g1).sum()), r)
    return FitResult(
        best.params, best.trace, best.final_loglik, best.n1, best.n2, best.restart, sample_hash(y)
    )


# ----------------------------------------------------------------------------
# Standalone baselines
# ----------------------------------------------------------------------------

def _baseline_samples(y):
    y = _check_samples(y)
    if y.size < 2:
        raise TooFewSamples(f"need at least 2 samples, got {y.size}")
    _spread(y)
    return y


def fit_laplacian(y) -> LaplacianParams:
    y = _baseline_samples(y)
    mu = _lower_median(np.sort(y))
    return LaplacianParams(mu, float(np.mean(np.abs(y - mu))))


def fit_gaussian(y) -> GaussianParams:
    y = _baseline_samples(y)
    mu = float(np.mean(y))
    return GaussianParams(mu, float(np.mean((y - mu) ** 2)))


def laplacian_log_likelihood(y, p: LaplacianParams) -> float:
    y = _check_samples(y)
    return float(np.sum(-np.abs(y - p.mu1) / p.sigma1) - y.size * math.log(2.0 * p.sigma1))


def gaussian_log_likelihood(y, p: GaussianParams) -> float:
    y = _check_samples(y)
    d = y - p.mu2
    return float(-0.5 * np.dot(d, d) / p.sigma2_sq - 0.5 * y.size * (LOG_2PI + math.log(p.sigma2_sq)))
