from .forward_search import (
    Dataset,
    ForwardPath,
    ForwardSearchConfig,
    ForwardStep,
    InitialMethod,
    InitializationError,
    LeverageOverflowError,
    RankDeficiencyError,
    bias_corrected_sigma,
    embed,
    empirical_abs_quantile,
    forward_step,
    initial_estimate,
    least_squares,
    leverage_scaled_residuals,
    perturbed_quantile_gap,
    run_forward_search
    )

__all__ = [
    'Dataset',
    'ForwardPath',
    'ForwardSearchConfig',
    'ForwardStep',
    'InitialMethod',
    'InitializationError',
    'LeverageOverflowError',
    'RankDeficiencyError',
    'bias_corrected_sigma',
    'embed',
    'empirical_abs_quantile',
    'forward_step',
    'initial_estimate',
    'least_squares',
    'leverage_scaled_residuals',
    'perturbed_quantile_gap',
    'run_forward_search'
    ]
