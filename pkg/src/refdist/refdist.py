"""Reference error distributions and the truncation functions of psi.

Everything here is a pure function of its inputs. A psi is a probability
mass of the absolute error, c_psi the matching quantile of |eps|/sigma.
"""

import logging
import math
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import numpy as np
from scipy import integrate, optimize, special

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

PSI_UPPER_CLAMP = 1.0 - 1e-12
QUANTILE_XTOL = 1e-14
QUADRATURE_TOL = 1e-12


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of an operation."""


class UnsupportedDofError(ValueError):
    """Raised when a scaled-t quantity needs more degrees of freedom."""


class QuadratureError(ArithmeticError):
    """Raised when adaptive quadrature does not reach its tolerance."""

    def __init__(self, message: str, achieved: float):
        super().__init__(message)
        self.achieved = achieved


class DistributionKind(Enum):
    STANDARD_NORMAL = 'normal'
    SCALED_T = 't'


@dataclass(frozen=True)
class ReferenceDistribution:
    """Symmetric unit-variance error law: standard normal or scaled t(d).

    The scaled t has density f(c) = delta_d * f_d(c * delta_d) with
    delta_d**2 = d / (d - 2).
    """

    kind: DistributionKind = DistributionKind.STANDARD_NORMAL
    dof: Optional[float] = None

    def __post_init__(self):
        if self.kind is DistributionKind.SCALED_T:
            if self.dof is None or not self.dof > 2:
                raise DomainError(
                    f"Scaled t reference distribution needs dof > 2 for unit variance, got dof={self.dof}"
                )
        elif self.dof is not None:
            raise DomainError("The standard normal reference distribution takes no dof")

    @classmethod
    def normal(cls) -> 'ReferenceDistribution':
        return cls(DistributionKind.STANDARD_NORMAL)

    @classmethod
    def scaled_t(cls, dof: float) -> 'ReferenceDistribution':
        return cls(DistributionKind.SCALED_T, float(dof))

    @classmethod
    def from_name(cls, name: str, dof: Optional[float] = None) -> 'ReferenceDistribution':
        """Build a distribution from a CLI/config name ('normal' or 't')."""
        if name == 'normal':
            return cls.normal()
        if name == 't':
            if dof is None:
                raise DomainError("Distribution 't' requires a dof value")
            return cls.scaled_t(dof)
        raise DomainError(f"Unknown distribution name: {name!r} (expected 'normal' or 't')")

    @property
    def is_normal(self) -> bool:
        return self.kind is DistributionKind.STANDARD_NORMAL

    @property
    def delta(self) -> float:
        """Standard deviation delta_d of the unscaled t(d); 1 for the normal."""
        if self.is_normal:
            return 1.0
        return math.sqrt(self.dof / (self.dof - 2.0))

    @property
    def label(self) -> str:
        return 'normal' if self.is_normal else f't({self.dof:g})'

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        """Draw unit-variance errors."""
        if self.is_normal:
            return rng.standard_normal(size)
        return rng.standard_t(self.dof, size) / self.delta

    def variance_check(self) -> float:
        """Numeric second moment over the whole support."""
        value, _ = integrate.quad(lambda u: u * u * float(pdf(self, u)), -np.inf, np.inf,
                                  epsabs=1e-13, epsrel=1e-12, limit=400)
        return value


def _t_density(t: ArrayLike, dof: float) -> ArrayLike:
    log_norm = special.gammaln((dof + 1.0) / 2.0) - special.gammaln(dof / 2.0) - 0.5 * math.log(dof * math.pi)
    return np.exp(log_norm - (dof + 1.0) / 2.0 * np.log1p(np.square(t) / dof))


def _t_cdf(t: ArrayLike, dof: float) -> ArrayLike:
    """Student t CDF through the regularized incomplete beta function."""
    t = np.asarray(t, dtype=float)
    tail = 0.5 * special.betainc(dof / 2.0, 0.5, dof / (dof + np.square(t)))
    return np.where(t < 0, tail, 1.0 - tail)


def t_abs_mass(t: ArrayLike, dof: float) -> ArrayLike:
    """P(|T| <= t) for T ~ t(dof), i.e. 2 F_dof(t) - 1, accurate for small t."""
    t2 = np.square(np.asarray(t, dtype=float))
    with np.errstate(invalid='ignore'):
        return np.where(np.isinf(t2), 1.0, special.betainc(0.5, dof / 2.0, t2 / (dof + t2)))


def _t_abs_tail(t: ArrayLike, dof: float) -> ArrayLike:
    """P(|T| > t) for T ~ t(dof), accurate for large t."""
    t2 = np.square(np.asarray(t, dtype=float))
    return special.betainc(dof / 2.0, 0.5, dof / (dof + t2))


def pdf(dist: ReferenceDistribution, c: ArrayLike) -> ArrayLike:
    """Density f(c)."""
    if dist.is_normal:
        return np.exp(-0.5 * np.square(c)) / math.sqrt(2.0 * math.pi)
    delta = dist.delta
    return delta * _t_density(np.multiply(c, delta), dist.dof)


def cdf(dist: ReferenceDistribution, c: ArrayLike) -> ArrayLike:
    """Distribution function F(c) = P(eps <= sigma c)."""
    if dist.is_normal:
        return special.ndtr(c)
    return _t_cdf(np.multiply(c, dist.delta), dist.dof)


def abs_cdf(dist: ReferenceDistribution, c: ArrayLike) -> ArrayLike:
    """G(c) = 2 F(c) - 1, the distribution function of |eps|/sigma."""
    if dist.is_normal:
        return special.erf(np.divide(c, math.sqrt(2.0)))
    return t_abs_mass(np.multiply(c, dist.delta), dist.dof)


def abs_sf(dist: ReferenceDistribution, c: ArrayLike) -> ArrayLike:
    """1 - G(c), evaluated directly in the tail."""
    if dist.is_normal:
        return special.erfc(np.divide(c, math.sqrt(2.0)))
    return _t_abs_tail(np.multiply(c, dist.delta), dist.dof)


def _bracket(func, start: float = 1.0) -> tuple:
    lo, hi = -start, start
    while func(lo) > 0:
        lo *= 2.0
    while func(hi) < 0:
        hi *= 2.0
    return lo, hi


def _solve(func, lo: float, hi: float) -> float:
    return optimize.brentq(func, lo, hi, xtol=QUANTILE_XTOL, rtol=4 * np.finfo(float).eps, maxiter=500)


def quantile(dist: ReferenceDistribution, p: float) -> float:
    """F^{-1}(p) by bracketed root finding on the CDF."""
    if not 0.0 < p < 1.0:
        raise DomainError(f"Quantile probability must lie in (0, 1), got p={p}")
    if p == 0.5:
        return 0.0
    if p > 0.5:
        # Solve the upper tail through the lower one where cdf keeps full relative precision.
        return -quantile(dist, 1.0 - p)

    def func(x):
        return float(cdf(dist, x)) - p

    lo, hi = _bracket(func)
    return _solve(func, lo, min(hi, 0.0))


def abs_quantile(dist: ReferenceDistribution, psi: float) -> float:
    """c_psi = G^{-1}(psi) = F^{-1}{(1 + psi)/2}."""
    if not 0.0 <= psi < 1.0:
        raise DomainError(f"abs_quantile needs 0 <= psi < 1, got psi={psi}")
    if psi == 0.0:
        return 0.0
    if psi <= 0.5:
        def func(c):
            return float(abs_cdf(dist, c)) - psi
    else:
        tail = 1.0 - psi

        def func(c):
            return tail - float(abs_sf(dist, c))
    hi = 1.0
    while func(hi) < 0:
        hi *= 2.0
    return _solve(func, 0.0, hi)


def _clamp_psi(psi: float) -> tuple:
    if psi >= PSI_UPPER_CLAMP:
        if psi >= 1.0:
            raise DomainError(f"psi must be below 1, got psi={psi}")
        logger.warning(f'psi={psi!r} clamped to {PSI_UPPER_CLAMP!r}', extra={'psi': psi})
        return PSI_UPPER_CLAMP, True
    return psi, False


def _normal_moments(c: float) -> tuple:
    phi = float(pdf(ReferenceDistribution.normal(), c))
    mass = float(special.erf(c / math.sqrt(2.0)))
    tau = mass - 2.0 * c * phi
    kappa = 3.0 * mass - 2.0 * (c ** 3 + 3.0 * c) * phi
    return tau, kappa


def _scaled_t_tau(c: float, d: float) -> float:
    return (d - 1.0) * float(t_abs_mass(c, d - 2.0)) - (d - 2.0) * float(t_abs_mass(c * math.sqrt(d / (d - 2.0)), d))


def _scaled_t_kappa(c: float, d: float) -> float:
    if not d > 4:
        raise UnsupportedDofError(
            f"The truncated fourth moment of the scaled t needs dof > 4, got dof={d:g}"
        )
    delta_d2 = math.sqrt((d - 2.0) / (d - 4.0))
    outer = (d - 1.0) * (d - 3.0) / ((d - 2.0) * (d - 4.0)) * float(t_abs_mass(c / delta_d2, d - 4.0))
    middle = 2.0 * (d - 1.0) / (d - 2.0) * float(t_abs_mass(c, d - 2.0))
    inner = float(t_abs_mass(c * math.sqrt(d / (d - 2.0)), d))
    return (d - 2.0) ** 2 * (outer - middle + inner)


def truncated_moments(dist: ReferenceDistribution, psi: float, with_kappa: bool = True) -> tuple:
    """Closed-form truncated moments (tau_psi, kappa_psi).

    Args:
        dist: Reference distribution.
        psi: Probability in [0, 1); values within 1e-12 of 1 are clamped.
        with_kappa: Skip kappa (returned as None) when only tau is needed,
            which lets scaled t with 2 < dof <= 4 through.

    Returns:
        Tuple (tau, kappa).

    Raises:
        DomainError: If psi is outside [0, 1).
        UnsupportedDofError: If kappa is requested for a scaled t with dof <= 4.
    """
    if psi < 0.0:
        raise DomainError(f"truncated_moments needs psi >= 0, got psi={psi}")
    psi, _ = _clamp_psi(psi)
    if psi == 0.0:
        return 0.0, (0.0 if with_kappa else None)
    c = abs_quantile(dist, psi)
    if dist.is_normal:
        tau, kappa = _normal_moments(c)
        return tau, (kappa if with_kappa else None)
    tau = _scaled_t_tau(c, dist.dof)
    kappa = _scaled_t_kappa(c, dist.dof) if with_kappa else None
    return tau, kappa


def truncated_moment_numeric(dist: ReferenceDistribution, psi: float, order: int) -> float:
    """Adaptive quadrature of the integral of u**order f(u) over [-c_psi, c_psi]."""
    if order not in (2, 4):
        raise DomainError(f"Only moment orders 2 and 4 are supported, got order={order}")
    if psi < 0.0:
        raise DomainError(f"truncated_moment_numeric needs psi >= 0, got psi={psi}")
    psi, _ = _clamp_psi(psi)
    if psi == 0.0:
        return 0.0
    c = abs_quantile(dist, psi)
    with warnings.catch_warnings():
        warnings.simplefilter('error', integrate.IntegrationWarning)
        try:
            half, abserr = integrate.quad(lambda u: u ** order * float(pdf(dist, u)), 0.0, c,
                                          epsabs=1e-13, epsrel=1e-13, limit=200)
        except integrate.IntegrationWarning as e:
            raise QuadratureError(f"Quadrature did not converge for psi={psi}, order={order}: {e}",
                                  achieved=float('nan')) from e
    if 2.0 * abserr > QUADRATURE_TOL:
        raise QuadratureError(
            f"Quadrature for psi={psi}, order={order} reached only {2.0 * abserr:.3g}",
            achieved=2.0 * abserr,
        )
    return 2.0 * half


@dataclass(frozen=True)
class PsiFunctions:
    """The scalar functions of one psi."""

    psi: float
    c: float
    tau: float
    kappa: Optional[float]
    varsigma_sq: float
    rho: float
    clamped: bool = False

    @property
    def f(self) -> float:
        """Density at c_psi recovered from rho."""
        return self.rho * self.psi / (2.0 * self.c)


def psi_functions(dist: ReferenceDistribution, psi: float) -> PsiFunctions:
    """Bundle c, tau, kappa, varsigma^2 = tau/psi and rho = 2 c f(c)/psi for one psi.

    kappa is None for a scaled t with dof <= 4.
    """
    if not 0.0 < psi < 1.0:
        raise DomainError(f"psi_functions needs 0 < psi < 1, got psi={psi}")
    psi, clamped = _clamp_psi(psi)
    c = abs_quantile(dist, psi)
    with_kappa = dist.is_normal or dist.dof > 4
    tau, kappa = truncated_moments(dist, psi, with_kappa=with_kappa)
    return PsiFunctions(
        psi=psi,
        c=c,
        tau=tau,
        kappa=kappa,
        varsigma_sq=tau / psi,
        rho=2.0 * c * float(pdf(dist, c)) / psi,
        clamped=clamped,
    )


def sigma_correction(dist: ReferenceDistribution, psi: float) -> float:
    """varsigma^2_psi including the limits 0 at psi = 0 and 1 at psi = 1."""
    if psi <= 0.0:
        return 0.0
    if psi >= 1.0:
        return 1.0
    tau, _ = truncated_moments(dist, psi, with_kappa=False)
    return tau / psi


def psi_table(dist: ReferenceDistribution, psi_grid) -> list:
    """Rows for the moments table, each with the quadrature cross-check columns."""
    rows = []
    for psi in psi_grid:
        values = psi_functions(dist, float(psi))
        row = {
            'psi': values.psi,
            'c': values.c,
            'tau': values.tau,
            'kappa': values.kappa,
            'varsigma_sq': values.varsigma_sq,
            'rho': values.rho,
            'f': float(pdf(dist, values.c)),
            'tau_quadrature': truncated_moment_numeric(dist, values.psi, 2),
            'kappa_quadrature': (truncated_moment_numeric(dist, values.psi, 4)
                                 if values.kappa is not None else None),
        }
        rows.append(row)
    return rows
