"""Model evaluation: empirical pdf, KL divergence, Q-Q fit with R^2, likelihood-ratio test."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import (
    GaussianParams,
    LaplacianParams,
    LgmParams,
    _check_samples,
    lgm_log_likelihood,
)
from .em import gaussian_log_likelihood, laplacian_log_likelihood, sample_hash
from .errors import DegenerateInput, MismatchedData, TooFewSamples
from .special import chi_square_sf

MIN_HIST_SAMPLES = 10
MIN_GOF_SAMPLES = 30
AUTO_BINS_MIN = 20
AUTO_BINS_MAX = 512
MASS_FLOOR = 1e-12
Z_95 = 1.96
LRT_DF = 3

MODEL_NAMES = {LgmParams: "lgm", LaplacianParams: "laplacian", GaussianParams: "gaussian"}


def model_name(model) -> str:
    return MODEL_NAMES.get(type(model), type(model).__name__)


@dataclass(frozen=True)
class EmpiricalPdf:
    edges: np.ndarray
    mass: np.ndarray

    @property
    def centers(self):
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def widths(self):
        return np.diff(self.edges)

    @property
    def density(self):
        return self.mass / self.widths


@dataclass(frozen=True)
class KldResult:
    d_kl: float
    bins_used: int
    model_name: str


@dataclass(frozen=True)
class GofResult:
    empirical_q: np.ndarray
    model_q: np.ndarray
    r_squared: float
    ci_low: float
    ci_high: float

    def summary(self):
        return {"r_squared": self.r_squared, "ci_low": self.ci_low, "ci_high": self.ci_high}


@dataclass(frozen=True)
class LrtResult:
    t_stat: float
    df: int
    p_value: float
    null_model: str
    alt_model: str

    def reject(self, alpha=0.01):
        return self.p_value < alpha

    def to_dict(self):
        return {
            "t_stat": self.t_stat,
            "df": self.df,
            "p_value": self.p_value,
            "null_model": self.null_model,
            "alt_model": self.alt_model,
        }


def freedman_diaconis_bins(y) -> int:
    """Freedman-Diaconis bin count clamped to ``[20, 512]``."""
    y = np.asarray(y, dtype=float)
    q75, q25 = np.percentile(y, [75, 25])
    width = 2.0 * (q75 - q25) * y.size ** (-1.0 / 3.0)
    span = float(y.max() - y.min())
    if width <= 0:
        return AUTO_BINS_MAX
    return int(min(max(math.ceil(span / width), AUTO_BINS_MIN), AUTO_BINS_MAX))


def empirical_pdf(y, bins="auto", *, min_samples=MIN_HIST_SAMPLES) -> EmpiricalPdf:
    """Normalized equal-width histogram over ``[min(y), max(y)]``.

    The last bin includes its right edge. ``bins="auto"`` uses
    :func:`freedman_diaconis_bins`.
    """
    y = _check_samples(y)
    if y.size < min_samples:
        raise TooFewSamples(f"need at least {min_samples} samples, got {y.size}")
    lo, hi = float(y.min()), float(y.max())
    if not hi > lo:
        raise DegenerateInput("samples have zero spread")
    n_bins = freedman_diaconis_bins(y) if bins in (None, "auto") else int(bins)
    if n_bins < 1:
        raise ValueError(f"bins must be >= 1, got {n_bins}")
    edges = np.linspace(lo, hi, n_bins + 1)
    counts, _ = np.histogram(y, bins=edges)
    return EmpiricalPdf(edges, counts / y.size)


def kl_divergence(p1, p2) -> float:
    """Discrete ``sum p1 ln(p1/p2)`` with ``0 ln 0 = 0``."""
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    nz = p1 > 0
    return float(np.sum(p1[nz] * np.log(p1[nz] / p2[nz])))


def model_bin_mass(mpdf: EmpiricalPdf, model) -> np.ndarray:
    """Model probability of each histogram bin, renormalized over the histogram's support.

    Bins whose mass underflows are floored at ``1e-12`` before
    renormalizing.
    """
    cdf = np.asarray(model.cdf(mpdf.edges), dtype=float)
    p2 = np.maximum(np.diff(cdf), MASS_FLOOR)
    return p2 / p2.sum()


def kld_empirical_vs_model(mpdf: EmpiricalPdf, model, name=None) -> KldResult:
    p2 = model_bin_mass(mpdf, model)
    d = kl_divergence(mpdf.mass, p2)
    return KldResult(d, int(np.count_nonzero(mpdf.mass > 0)), name or model_name(model))


def r_squared_ci(r_squared, n, z_crit=Z_95):
    """Fisher-z interval for R^2 through the implied correlation ``sqrt(R^2)``.

    Returns ``(nan, nan)`` when ``R^2 <= 0`` (no correlation to transform).
    """
    if not r_squared > 0 or n <= 3:
        return math.nan, math.nan
    r = math.sqrt(r_squared)
    if r >= 1.0:
        return 1.0, 1.0
    z = math.atanh(r)
    half = z_crit / math.sqrt(n - 3)
    low = max(math.tanh(z - half), 0.0)
    high = math.tanh(z + half)
    return low * low, high * high


def goodness_of_fit(y, model, *, min_samples=MIN_GOF_SAMPLES) -> GofResult:
    """Quantile-quantile comparison of the samples against ``model``.

    Model quantiles are taken at plotting positions ``(k + 0.5) / N``.
    R^2 measures agreement with the line of equality:
    ``1 - sum((emp - model)^2) / sum((emp - mean(emp))^2)``.
    """
    y = _check_samples(y)
    n = y.size
    if n < min_samples:
        raise TooFewSamples(f"need at least {min_samples} samples, got {n}")
    emp = np.sort(y)
    ss_tot = float(np.sum((emp - emp.mean()) ** 2))
    if not ss_tot > 0:
        raise DegenerateInput("samples have zero spread")
    positions = (np.arange(n) + 0.5) / n
    mq = np.asarray(model.ppf(positions), dtype=float)
    ss_res = float(np.sum((emp - mq) ** 2))
    r2 = 1.0 - ss_res / ss_tot
    low, high = r_squared_ci(r2, n)
    return GofResult(emp, mq, r2, low, high)


def null_log_likelihood(y, null_params) -> float:
    if isinstance(null_params, LaplacianParams):
        return laplacian_log_likelihood(y, null_params)
    if isinstance(null_params, GaussianParams):
        return gaussian_log_likelihood(y, null_params)
    raise TypeError(f"unsupported null model {type(null_params).__name__}")


def likelihood_ratio_test(y, lgm: LgmParams, null_params, null_kind=None, *, data_hashes=()) -> LrtResult:
    """``T = 2 (log L_lgm - log L_null)`` referred to chi-square with 3 df.

    ``data_hashes`` are :func:`~lgmix.em.sample_hash` values of the arrays
    the models were fitted on; any mismatch with ``y`` raises.
    """
    y = _check_samples(y)
    if data_hashes:
        h = sample_hash(y)
        if any(d != h for d in data_hashes):
            raise MismatchedData("models were fitted on different sample arrays")
    t = 2.0 * (lgm_log_likelihood(y, lgm) - null_log_likelihood(y, null_params))
    p = chi_square_sf(max(t, 0.0), LRT_DF)
    return LrtResult(t, LRT_DF, p, null_kind or model_name(null_params), "lgm")
