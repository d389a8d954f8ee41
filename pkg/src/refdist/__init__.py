from .refdist import (
    DistributionKind,
    DomainError,
    PsiFunctions,
    QuadratureError,
    ReferenceDistribution,
    UnsupportedDofError,
    abs_cdf,
    abs_quantile,
    abs_sf,
    cdf,
    pdf,
    psi_functions,
    psi_table,
    quantile,
    sigma_correction,
    truncated_moment_numeric,
    truncated_moments
    )

__all__ = [
    'DistributionKind',
    'DomainError',
    'PsiFunctions',
    'QuadratureError',
    'ReferenceDistribution',
    'UnsupportedDofError',
    'abs_cdf',
    'abs_quantile',
    'abs_sf',
    'cdf',
    'pdf',
    'psi_functions',
    'psi_table',
    'quantile',
    'sigma_correction',
    'truncated_moment_numeric',
    'truncated_moments'
    ]
