"""Blind denoising with Tweedie exponential-dispersion posterior means."""

from ._core import (
    INTENSITY_FLOOR,
    DomainError,
    EstimationError,
    QuadratureError,
    SingularEstimateError,
    ValidationError,
    alpha_term,
    analytic_score_gaussian,
    atoms_of,
    brute_posterior_mean,
    classify_model,
    denoise_blind,
    denoise_known,
    estimate_noise,
    gen_clean,
    geometric_schedule,
    numeric_marginal_score,
    perturb,
    posterior_mean_special,
    posterior_mean_universal,
    psnr,
    saddle_density,
    sample_noisy,
    unit_deviance,
    variance_function,
)

__all__ = [name for name in dir() if not name.startswith("_")]
