"""Asymptotic variances and pointwise confidence bands for forward plots."""

import logging
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np
from scipy import integrate

from refdist import (
    DomainError,
    PsiFunctions,
    QuadratureError,
    ReferenceDistribution,
    UnsupportedDofError,
    pdf,
    psi_functions,
    quantile,
)

logger = logging.getLogger(__name__)

DEFAULT_PSI_MIN = 0.05
DEFAULT_PSI_MAX = 0.95
DEFAULT_PSI_POINTS = 181
QUADRATURE_RTOL = 1e-11


class BandStatistic(Enum):
    Z_OVER_SIGMA_HAT = 'z_sigma_hat'
    Z_OVER_SIGMA_CORR = 'z_sigma_corr'
    Z_OVER_KNOWN_SIGMA = 'z_known_sigma'
    BETA_COMPONENT = 'beta'


@dataclass(frozen=True)
class BandCurve:
    psi_grid: np.ndarray
    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    statistic: BandStatistic
    n: int
    level: float

    def rows(self) -> list:
        return [
            {'psi': float(p), 'mean': float(m), 'lower': float(lo), 'upper': float(hi)}
            for p, m, lo, hi in zip(self.psi_grid, self.mean, self.lower, self.upper)
        ]

    def contains(self, psi_index: int, values):
        """Whether values lie in [lower, upper] at psi_grid[psi_index]; elementwise for arrays."""
        values = np.asarray(values, dtype=float)
        inside = (values >= self.lower[psi_index]) & (values <= self.upper[psi_index])
        return bool(inside) if inside.ndim == 0 else inside


def default_psi_grid(psi_min: float = DEFAULT_PSI_MIN, psi_max: float = DEFAULT_PSI_MAX,
                     points: int = DEFAULT_PSI_POINTS) -> np.ndarray:
    if points < 1:
        raise DomainError(f"A psi grid needs at least one point, got points={points}")
    if not 0.0 < psi_min <= psi_max < 1.0:
        raise DomainError(f"The psi grid must lie inside (0, 1), got [{psi_min}, {psi_max}]")
    return np.linspace(psi_min, psi_max, points)


def _interior(psi: float, name: str) -> None:
    if not 0.0 < psi < 1.0:
        raise DomainError(f"{name} needs 0 < psi < 1, got psi={psi}")


def var_G(psi: float) -> float:
    """Variance of the limiting empirical process G at c_psi."""
    if not 0.0 <= psi <= 1.0:
        raise DomainError(f"var_G needs 0 <= psi <= 1, got psi={psi}")
    return psi * (1.0 - psi)


def _truncated_integral(dist: ReferenceDistribution, c: float, weight: Callable[[float], float],
                        name: str) -> float:
    """E[weight(|u|/c); |u| <= c] integrated over s = |u|/c in [0, 1].

    weight must be nonnegative so the relative tolerance is attainable at any c.
    """
    with warnings.catch_warnings():
        warnings.simplefilter('error', integrate.IntegrationWarning)
        try:
            value, _ = integrate.quad(lambda s: weight(s) * float(pdf(dist, c * s)), 0.0, 1.0,
                                      epsabs=0.0, epsrel=QUADRATURE_RTOL, limit=200)
        except integrate.IntegrationWarning as e:
            raise QuadratureError(f"Quadrature of {name} did not converge at c={c:.6g}: {e}",
                                  achieved=float('nan')) from e
    return 2.0 * c * value


def _centred_moments(dist: ReferenceDistribution, values: PsiFunctions) -> tuple:
    """(tau, E[c^2 - u^2; A], E[(c^2 - u^2)^2; A]) on A = {|u| <= c_psi}, free of cancellation at small c."""
    c = values.c
    c_sq = c * c
    tau = c_sq * _truncated_integral(dist, c, lambda s: s * s, 'tau')
    gap = c_sq * _truncated_integral(dist, c, lambda s: 1.0 - s * s, 'the truncation gap')
    spread = c_sq * c_sq * _truncated_integral(dist, c, lambda s: (1.0 - s * s) ** 2, 'the truncation spread')
    return tau, gap, spread


def _require_kappa(dist: ReferenceDistribution, values: PsiFunctions, name: str) -> None:
    if values.kappa is None:
        raise UnsupportedDofError(f"{name} needs the truncated fourth moment, unavailable for dof={dist.dof:g}")


def var_L(dist: ReferenceDistribution, psi: float) -> float:
    """Variance of the limiting truncated second-moment process L at c_psi.

    Evaluated as Var[(u^2 - c^2) 1(|u| <= c)] / tau^2, which equals
    (kappa - tau^2 + c^2 (1 - psi)(c^2 psi - 2 tau)) / tau^2.
    """
    _interior(psi, 'var_L')
    values = psi_functions(dist, psi)
    _require_kappa(dist, values, 'Var L')
    tau, gap, spread = _centred_moments(dist, values)
    return max(spread - gap ** 2, 0.0) / tau ** 2


def cov_GL(dist: ReferenceDistribution, psi: float) -> float:
    """Covariance of G and L at c_psi, (tau - c^2 psi)(1 - psi)/tau; negative on (0, 1)."""
    _interior(psi, 'cov_GL')
    values = psi_functions(dist, psi)
    tau, gap, _ = _centred_moments(dist, values)
    return -gap * (1.0 - values.psi) / tau


def gl_covariance(dist: ReferenceDistribution, psi: float) -> np.ndarray:
    """2x2 covariance matrix of (G(c_psi), L(c_psi))."""
    cov = cov_GL(dist, psi)
    return np.array([[var_G(psi), cov], [cov, var_L(dist, psi)]])


def omega(dist: ReferenceDistribution, psi: float) -> float:
    """Asymptotic variance of n^{1/2}(z_psi / sigma_corr - c_psi).

    Var G + 2 c f Cov + (c f)^2 Var L is the variance of w(u) 1(|u| <= c) with
    w = 1 - (c f / tau)(c^2 - u^2); its second moment is integrated directly.
    """
    _interior(psi, 'omega')
    values = psi_functions(dist, psi)
    _require_kappa(dist, values, 'omega')
    c = values.c
    f = float(pdf(dist, c))
    tau, gap, _ = _centred_moments(dist, values)
    slope = c * f / tau * c * c
    second = _truncated_integral(dist, c, lambda s: (1.0 - slope * (1.0 - s * s)) ** 2, 'omega')
    first = values.psi - c * f / tau * gap
    return max(second - first ** 2, 0.0) / (2.0 * f) ** 2


def omega_quadratic_form(dist: ReferenceDistribution, psi: float) -> float:
    """omega_psi assembled as w' Cov[G, L] w / (2f)^2 with w = (1, c f)."""
    _interior(psi, 'omega_quadratic_form')
    values = psi_functions(dist, psi)
    f = float(pdf(dist, values.c))
    weights = np.array([1.0, values.c * f])
    return float(weights @ gl_covariance(dist, psi) @ weights) / (2.0 * f) ** 2


def rho(dist: ReferenceDistribution, psi: float) -> float:
    _interior(psi, 'rho')
    return psi_functions(dist, psi).rho


def lts_efficiency(dist: ReferenceDistribution, psi: float) -> float:
    """tau_psi / (psi - 2 c_psi f(c_psi))^2, the variance factor shared with trimmed least squares."""
    _interior(psi, 'lts_efficiency')
    values = psi_functions(dist, psi)
    denominator = values.psi - 2.0 * values.c * float(pdf(dist, values.c))
    if denominator <= 0.0:
        raise DomainError(f"psi - 2 c f(c) must be positive, got {denominator:.6g} at psi={psi}")
    return values.tau / denominator ** 2


def beta_asymptotic_variance(dist: ReferenceDistribution, psi: float, sigma: float, Sigma) -> np.ndarray:
    """Limiting variance of N^{-1}(beta_psi - beta).

    Args:
        dist: Reference distribution.
        psi: Probability in (0, 1).
        sigma: Error scale.
        Sigma: Limit of the normalized regressor second moments.

    Returns:
        tau sigma^2 / (psi - 2 c f(c))^2 times the inverse of Sigma.

    Raises:
        DomainError: If Sigma is not symmetric positive definite.
    """
    Sigma = np.atleast_2d(np.asarray(Sigma, dtype=float))
    if Sigma.shape[0] != Sigma.shape[1] or not np.allclose(Sigma, Sigma.T):
        raise DomainError(f"Sigma must be a symmetric square matrix, got shape {Sigma.shape}")
    try:
        chol = np.linalg.cholesky(Sigma)
    except np.linalg.LinAlgError as e:
        raise DomainError("Sigma is not positive definite") from e
    inverse = np.linalg.inv(chol).T @ np.linalg.inv(chol)
    return lts_efficiency(dist, psi) * sigma ** 2 * inverse


def band(dist: ReferenceDistribution, statistic: BandStatistic, psi_grid=None, n: int = 128,
         level: float = 0.90, sigma: float = 1.0, Sigma=None, component: int = 0,
         centre: float = 0.0) -> BandCurve:
    """Pointwise asymptotic mean and quantile curves of a forward statistic.

    Args:
        dist: Reference distribution.
        statistic: Which forward statistic the band is for.
        psi_grid: Increasing values in (0, 1); default 181 points on [0.05, 0.95].
        n: Sample size.
        level: Two-sided pointwise coverage; edges at the (1 -/+ level)/2 normal quantiles.
        sigma, Sigma, component, centre: BetaComponent only. The band is for
            component of beta_psi around centre, with standard deviation
            sqrt(V/n) for the limiting variance V of N^{-1}(beta_psi - beta).

    Returns:
        BandCurve.

    Raises:
        DomainError: If the grid touches 0 or 1, or level or n are out of range.
    """
    grid = default_psi_grid() if psi_grid is None else np.asarray(psi_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise DomainError("psi_grid must be a nonempty vector")
    if np.any(grid <= 0.0) or np.any(grid >= 1.0):
        bad = grid[(grid <= 0.0) | (grid >= 1.0)][0]
        raise DomainError(f"Bands are only defined for 0 < psi < 1, got psi={bad}")
    if np.any(np.diff(grid) <= 0.0):
        raise DomainError("psi_grid must be strictly increasing")
    if not 0.0 < level < 1.0:
        raise DomainError(f"level must lie in (0, 1), got level={level}")
    if n < 1:
        raise DomainError(f"n must be positive, got n={n}")

    z_level = quantile(ReferenceDistribution.normal(), (1.0 + level) / 2.0)
    mean = np.empty(grid.size)
    sd = np.empty(grid.size)
    if statistic is BandStatistic.BETA_COMPONENT:
        Sigma = np.eye(component + 1) if Sigma is None else Sigma
    for k, psi in enumerate(grid):
        values = psi_functions(dist, float(psi))
        varsigma = np.sqrt(values.varsigma_sq)
        if statistic is BandStatistic.Z_OVER_SIGMA_HAT:
            mean[k] = values.c / varsigma
            sd[k] = np.sqrt(omega(dist, psi) / n) / varsigma
        elif statistic is BandStatistic.Z_OVER_SIGMA_CORR:
            mean[k] = values.c
            sd[k] = np.sqrt(omega(dist, psi) / n)
        elif statistic is BandStatistic.Z_OVER_KNOWN_SIGMA:
            f = float(pdf(dist, values.c))
            mean[k] = values.c / varsigma
            sd[k] = np.sqrt(var_G(psi) / (2.0 * f) ** 2 / n) / varsigma
        else:
            variance = beta_asymptotic_variance(dist, psi, sigma, Sigma)
            mean[k] = centre
            sd[k] = np.sqrt(variance[component, component] / n)
    half_width = z_level * sd
    logger.debug(f'band {statistic.value}: n={n}, level={level}, {grid.size} points', extra={'n': n})
    return BandCurve(psi_grid=grid, mean=mean, lower=mean - half_width, upper=mean + half_width,
                     statistic=statistic, n=n, level=level)
