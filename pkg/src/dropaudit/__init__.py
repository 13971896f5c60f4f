"""Drop-sensitivity auditing for MCMC-based Bayesian analyses.

Given posterior draws reduced to a quantity-of-interest vector and a
per-observation log-likelihood matrix, this package estimates how much the
conclusion can move when a small fraction of the data is dropped, wraps the
estimate in bootstrap confidence intervals, and validates everything against
closed-form conjugate models.
"""

from __future__ import annotations

from .amip import AmipResult, brute_force_mip, sosie, taylor_predict
from .core import (
    Z_975,
    DrawBundle,
    NumericalError,
    QoiSpec,
    ValidationError,
    index_set_to_weight,
    resolve_qoi_preset,
    resolve_qoi_rule,
    validate_index_set,
    validate_weights,
    weight_to_index_set,
)
from .crosscheck import CheckRow, run_cross_checks
from .estimator import (
    AsymptoticCovEstimate,
    Moments,
    TripleDistribution,
    asymptotic_cov_estimate,
    brute_force_cov_of_cov,
    exact_cov_of_sample_covariances,
    influence_estimates,
    moments,
)
from .harness import (
    DEFAULT_ZETA_GRID,
    CoverageRecord,
    CoverageReport,
    InterpolationReport,
    Verdict,
    coverage_experiment,
    default_alpha_grid,
    interpolation_experiment,
    oracle_mean_sd,
    qoi_influences,
    soi_coverage_experiment,
    verdict,
    weighted_qoi,
)
from .oracles import (
    DropError,
    NormalGammaModel,
    NormalGammaPosterior,
    NormalMeansDropReport,
    NormalMeansModel,
    NormalModel,
    normal_drop_errors,
    normal_gamma_influence,
    normal_gamma_posterior,
    normal_gamma_sigma_nn,
    normal_gamma_weighted_posterior,
    normal_influences,
    normal_means_drop_errors,
    normal_means_error_bound,
    normal_means_influences,
    normal_means_posterior_lambda,
    normal_means_weighted_posterior,
    normal_weighted_posterior,
)
from .report import (
    file_digest,
    format_float,
    ingest_bundle,
    render_document,
    render_table,
    write_bundle_csv,
)
from .resample import (
    BootstrapConfig,
    IntervalResult,
    block_resample,
    ci_for_amip,
    ci_for_posterior_mean,
    ci_for_sum_of_influence,
    clopper_pearson,
    quantile,
    row_resample,
    substream_seed,
)
from .samplers import (
    SamplerConfig,
    lag1_autocorrelation,
    sample_metropolis,
    sample_normal_exact,
    sample_normal_gamma_exact,
    sample_normal_means_exact,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "Z_975",
    "DrawBundle",
    "QoiSpec",
    "ValidationError",
    "NumericalError",
    "index_set_to_weight",
    "weight_to_index_set",
    "validate_index_set",
    "validate_weights",
    "resolve_qoi_preset",
    "resolve_qoi_rule",
    "DropError",
    "NormalModel",
    "NormalMeansModel",
    "NormalMeansDropReport",
    "NormalGammaModel",
    "NormalGammaPosterior",
    "normal_weighted_posterior",
    "normal_influences",
    "normal_drop_errors",
    "normal_means_weighted_posterior",
    "normal_means_posterior_lambda",
    "normal_means_influences",
    "normal_means_drop_errors",
    "normal_means_error_bound",
    "normal_gamma_posterior",
    "normal_gamma_weighted_posterior",
    "normal_gamma_influence",
    "normal_gamma_sigma_nn",
    "Moments",
    "moments",
    "influence_estimates",
    "AsymptoticCovEstimate",
    "asymptotic_cov_estimate",
    "TripleDistribution",
    "exact_cov_of_sample_covariances",
    "brute_force_cov_of_cov",
    "AmipResult",
    "sosie",
    "brute_force_mip",
    "taylor_predict",
    "BootstrapConfig",
    "IntervalResult",
    "quantile",
    "substream_seed",
    "row_resample",
    "block_resample",
    "ci_for_amip",
    "ci_for_sum_of_influence",
    "ci_for_posterior_mean",
    "clopper_pearson",
    "SamplerConfig",
    "sample_normal_exact",
    "sample_normal_means_exact",
    "sample_normal_gamma_exact",
    "sample_metropolis",
    "lag1_autocorrelation",
    "Verdict",
    "verdict",
    "CoverageRecord",
    "CoverageReport",
    "InterpolationReport",
    "DEFAULT_ZETA_GRID",
    "default_alpha_grid",
    "oracle_mean_sd",
    "weighted_qoi",
    "qoi_influences",
    "coverage_experiment",
    "soi_coverage_experiment",
    "interpolation_experiment",
    "ingest_bundle",
    "write_bundle_csv",
    "render_document",
    "render_table",
    "file_digest",
    "format_float",
    "CheckRow",
    "run_cross_checks",
]
