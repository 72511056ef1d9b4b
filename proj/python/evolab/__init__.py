"""Python bindings for the evolab C++ core."""

from ._core import (
    Environment,
    GpdParams,
    compute_nu0,
    config_text,
    empirical_quantile,
    environment_ids,
    estimate_tv_term,
    extract_peaks,
    fit_gpd_mle,
    fit_tail,
    gpd_cdf,
    gpd_log_likelihood,
    gpd_pdf,
    gpd_quantile,
    ks_gpd,
    make_environment,
    ratio_metric,
    risk_boundary,
    summarize_runs,
    train,
    variance_pair,
    violation_prob_bound,
)

__all__ = [name for name in dir() if not name.startswith("_")]
