"""Laplacian-Gaussian mixture (LGM) modelling of signal-amplitude samples."""

from .distributions import (
    GaussianParams,
    LaplacianParams,
    LgmParams,
    gaussian_pdf,
    laplacian_pdf,
    lgm_cdf,
    lgm_log_likelihood,
    lgm_pdf,
    lgm_quantile,
    sample_lgm,
)
from .em import (
    EmConfig,
    FitResult,
    e_step,
    fit_gaussian,
    fit_laplacian,
    fit_lgm,
    init_params,
    m_step,
    weighted_median,
)
from .evaluation import (
    empirical_pdf,
    goodness_of_fit,
    kld_empirical_vs_model,
    likelihood_ratio_test,
)
from .special import chi_square_sf

__version__ = "0.1.0"
