from .asymptotics import (
    BandCurve,
    BandStatistic,
    band,
    beta_asymptotic_variance,
    cov_GL,
    default_psi_grid,
    gl_covariance,
    lts_efficiency,
    omega,
    omega_quadratic_form,
    rho,
    var_G,
    var_L
    )

__all__ = [
    'BandCurve',
    'BandStatistic',
    'band',
    'beta_asymptotic_variance',
    'cov_GL',
    'default_psi_grid',
    'gl_covariance',
    'lts_efficiency',
    'omega',
    'omega_quadratic_form',
    'rho',
    'var_G',
    'var_L'
    ]
