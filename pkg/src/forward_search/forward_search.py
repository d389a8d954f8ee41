"""The Forward Search for linear regression.

Starting from a robust initial estimate, the subset of "good" observations
grows one observation at a time by ordered absolute residuals, refitting
least squares on every subset.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from scipy import linalg

from refdist import DomainError, ReferenceDistribution, sigma_correction

logger = logging.getLogger(__name__)

PIVOT_TOL = 1e-12
DEFAULT_LMS_CANDIDATES = 500
PSI_GUARD = 1e-9
LEVERAGE_TOL = 1e-10


class RankDeficiencyError(ArithmeticError):
    """Raised when a subset Gram matrix is numerically singular."""

    def __init__(self, message: str, subset_size: int, m: Optional[int] = None):
        super().__init__(message)
        self.subset_size = subset_size
        self.m = m


class InitializationError(RuntimeError):
    """Raised when no initial estimate can be formed."""


class LeverageOverflowError(ArithmeticError):
    """Raised when an in-subset leverage reaches 1."""


class InitialMethod(Enum):
    LMS = 'lms'
    FULL_LS = 'ols'


@dataclass(frozen=True)
class Dataset:
    """Response y and regressors X of the model y_i = x_i' beta + eps_i.

    true_beta and true_sigma are only known for simulated data.
    """

    y: np.ndarray
    X: np.ndarray
    true_beta: Optional[np.ndarray] = None
    true_sigma: Optional[float] = None
    columns: tuple = ()

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).reshape(-1)
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        object.__setattr__(self, 'y', y)
        object.__setattr__(self, 'X', X)
        if self.true_beta is not None:
            object.__setattr__(self, 'true_beta', np.asarray(self.true_beta, dtype=float).reshape(-1))
        n, p = X.shape
        if y.shape[0] != n:
            raise DomainError(f"y has {y.shape[0]} rows but X has {n}")
        if not n > p >= 1:
            raise DomainError(f"Dataset needs n > dim x >= 1, got n={n}, dim x={p}")
        if np.linalg.matrix_rank(X) < p:
            raise RankDeficiencyError(
                f"Regressor matrix does not have full column rank {p} on the full sample", subset_size=n
            )
        if not self.columns:
            object.__setattr__(self, 'columns', tuple(f'x{j}' for j in range(p)))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim_x(self) -> int:
        return self.X.shape[1]

    @property
    def errors(self) -> np.ndarray:
        """True errors y - X beta, available when true_beta is known."""
        if self.true_beta is None:
            raise ValueError("Dataset has no true_beta; errors are unknown")
        return self.y - self.X @ self.true_beta


@dataclass(frozen=True)
class ForwardSearchConfig:
    """Settings of one Forward Search run.

    m0 None means int(n/2). estimate False keeps the dataset's true_beta
    at every step.
    """

    m0: Optional[int] = None
    initial: InitialMethod = InitialMethod.LMS
    seed: int = 0
    dof_correct: bool = False
    lms_candidates: int = DEFAULT_LMS_CANDIDATES
    estimate: bool = True

    def resolve_m0(self, n: int) -> int:
        return self.m0 if self.m0 is not None else n // 2

    def checked_m0(self, n: int, dim_x: int) -> int:
        """resolve_m0, raising DomainError unless dim x + 1 <= m0 < n."""
        m0 = self.resolve_m0(n)
        if not dim_x + 1 <= m0 < n:
            raise DomainError(f"Parameter m0 must satisfy dim x + 1 <= m0 < n, got m0={m0}, dim x={dim_x}, n={n}")
        return m0


@dataclass(frozen=True)
class ForwardStep:
    """Record of step m: the fit on S(m), its order statistics, and the fit on S(m+1)."""

    m: int
    subset: np.ndarray
    beta: np.ndarray
    sigma_sq: float
    z: float
    d: float
    next_subset: np.ndarray
    next_beta: np.ndarray
    next_sigma_sq: float


@dataclass(frozen=True)
class ForwardPath:
    steps: tuple
    n: int
    m0: int
    initial: InitialMethod
    seed: int
    dof_correct: bool = False
    columns: tuple = field(default=())

    @property
    def final_beta(self) -> np.ndarray:
        return self.steps[-1].next_beta

    @property
    def final_sigma_sq(self) -> float:
        return self.steps[-1].next_sigma_sq

    @property
    def m_values(self) -> np.ndarray:
        return np.array([step.m for step in self.steps])

    @property
    def z(self) -> np.ndarray:
        return np.array([step.z for step in self.steps])

    @property
    def d(self) -> np.ndarray:
        return np.array([step.d for step in self.steps])

    @property
    def sigma_sq(self) -> np.ndarray:
        return np.array([step.sigma_sq for step in self.steps])

    @property
    def betas(self) -> np.ndarray:
        return np.vstack([step.beta for step in self.steps])

    def table(self, dist: ReferenceDistribution) -> list:
        """Per-step rows of the forward plots."""
        sigma_corr = bias_corrected_sigma(self, dist)
        rows = []
        for step, s_corr in zip(self.steps, sigma_corr):
            sigma = float(np.sqrt(step.sigma_sq))
            row = {
                'm': step.m,
                'psi': step.m / self.n,
                'z': step.z,
                'd': step.d,
                'sigma': sigma,
                'sigma_corr': float(s_corr),
                'z_scaled': step.z / sigma if sigma > 0 else float('nan'),
                'd_scaled': step.d / sigma if sigma > 0 else float('nan'),
            }
            for name, value in zip(self.columns, step.beta):
                row[f'beta_{name}'] = float(value)
            rows.append(row)
        return rows


def _ordering(residuals: np.ndarray) -> np.ndarray:
    # Stable sort: ties go to the lower observation index.
    return np.argsort(residuals, kind='stable')


def _rank_deficient(R: np.ndarray) -> bool:
    """True if the pivoted R has a zero leading pivot or a relative pivot below PIVOT_TOL."""
    pivots = np.abs(np.diag(R))
    return pivots[0] == 0.0 or pivots[-1] < PIVOT_TOL * pivots[0]


def least_squares(dataset: Dataset, subset, dof_correct: bool = False) -> tuple:
    """Least squares on a subset through a pivoted QR of the subset Gram matrix.

    Args:
        dataset: The data.
        subset: Observation indices.
        dof_correct: Divide by |S| - dim x instead of |S|.

    Returns:
        Tuple (beta, sigma_sq).

    Raises:
        RankDeficiencyError: If the Gram matrix has a relative pivot below 1e-12.
    """
    subset = np.asarray(subset, dtype=int)
    size = subset.shape[0]
    p = dataset.dim_x
    if size < p:
        raise RankDeficiencyError(f"Subset of size {size} cannot identify {p} coefficients", subset_size=size)
    Xs = dataset.X[subset]
    ys = dataset.y[subset]
    gram = Xs.T @ Xs
    Q, R, piv = linalg.qr(gram, pivoting=True)
    if _rank_deficient(R):
        raise RankDeficiencyError(
            f"Gram matrix of a subset of size {size} is rank deficient", subset_size=size
        )
    beta = np.empty(p)
    beta[piv] = linalg.solve_triangular(R, Q.T @ (Xs.T @ ys))
    resid = ys - Xs @ beta
    divisor = size - p if dof_correct else size
    if divisor <= 0:
        raise RankDeficiencyError(
            f"Degrees-of-freedom correction leaves no residual degrees of freedom for subset size {size}",
            subset_size=size,
        )
    return beta, float(resid @ resid) / divisor


def _lms(dataset: Dataset, candidates: int, seed: int) -> np.ndarray:
    n, p = dataset.n, dataset.dim_x
    rng = np.random.default_rng(seed)
    keys = rng.random((candidates, n))
    idx = np.argpartition(keys, p - 1, axis=1)[:, :p]
    Xe = dataset.X[idx]
    ye = dataset.y[idx]
    svals = np.linalg.svd(Xe, compute_uv=False)
    usable = svals[:, -1] > PIVOT_TOL * svals[:, 0]
    if not usable.any():
        raise InitializationError(f"All {candidates} elemental subsets of size {p} are singular")
    fits = np.linalg.solve(Xe[usable], ye[usable][..., None])[..., 0]
    resid = dataset.y[None, :] - fits @ dataset.X.T
    criterion = np.median(resid ** 2, axis=1)
    best = int(np.argmin(criterion))
    logger.debug(f'LMS picked candidate {best} of {int(usable.sum())} with median squared residual {criterion[best]:.6g}')
    return fits[best]


def initial_estimate(dataset: Dataset, method: InitialMethod = InitialMethod.LMS, m0: Optional[int] = None,
                     seed: int = 0, candidates: int = DEFAULT_LMS_CANDIDATES) -> np.ndarray:
    """Robust starting estimate of beta.

    LMS minimises the median squared residual over seeded elemental-subset
    fits; FullLS is the full-sample least squares fit.
    """
    p = dataset.dim_x
    if m0 is not None and m0 < p + 1:
        raise DomainError(f"Parameter m0 must be at least dim x + 1 = {p + 1}, got m0={m0}")
    if method is InitialMethod.FULL_LS:
        try:
            beta, _ = least_squares(dataset, np.arange(dataset.n))
        except RankDeficiencyError as e:
            raise InitializationError(f"Full-sample least squares failed: {e}") from e
        return beta
    return _lms(dataset, candidates, seed)


def forward_step(dataset: Dataset, beta_m: np.ndarray, m: int, subset: Optional[np.ndarray] = None,
                 dof_correct: bool = False, estimate: bool = True) -> ForwardStep:
    """One step of the Forward Search.

    Args:
        dataset: The data.
        beta_m: Estimate fitted on S(m).
        m: Current subset size.
        subset: S(m). None takes the m smallest absolute residuals under beta_m,
            in which case d equals z.
        dof_correct: Use the |S| - dim x divisor for the variances.
        estimate: Refit on S(m+1); False carries beta_m forward unchanged.

    Returns:
        The ForwardStep for m.
    """
    n, p = dataset.n, dataset.dim_x
    if not p <= m < n:
        raise DomainError(f"forward_step needs dim x <= m < n, got m={m}, dim x={p}, n={n}")
    residuals = np.abs(dataset.y - dataset.X @ beta_m)
    order = _ordering(residuals)
    if subset is None:
        subset = np.sort(order[:m])
    subset = np.asarray(subset, dtype=int)
    inside = np.zeros(n, dtype=bool)
    inside[subset] = True
    divisor = m - p if dof_correct else m
    sigma_sq = float(np.sum(residuals[inside] ** 2)) / divisor if divisor > 0 else float('nan')

    z = float(residuals[order[m]])
    d = float(residuals[~inside].min())
    next_subset = np.sort(order[:m + 1])
    if estimate:
        try:
            next_beta, next_sigma_sq = least_squares(dataset, next_subset, dof_correct)
        except RankDeficiencyError as e:
            raise RankDeficiencyError(f"{e} at step m={m}", subset_size=e.subset_size, m=m) from e
    else:
        next_beta = np.asarray(beta_m, dtype=float)
        next_divisor = m + 1 - p if dof_correct else m + 1
        next_sigma_sq = float(np.sum(residuals[next_subset] ** 2)) / next_divisor
    return ForwardStep(m=m, subset=subset, beta=np.asarray(beta_m, dtype=float), sigma_sq=sigma_sq,
                       z=z, d=d, next_subset=next_subset, next_beta=next_beta, next_sigma_sq=next_sigma_sq)


def run_forward_search(dataset: Dataset, config: Optional[ForwardSearchConfig] = None) -> ForwardPath:
    """Apply the Forward Search for m = m0, ..., n-1."""
    config = config or ForwardSearchConfig()
    n, p = dataset.n, dataset.dim_x
    m0 = config.checked_m0(n, p)
    if config.estimate:
        beta = initial_estimate(dataset, config.initial, m0, config.seed, config.lms_candidates)
    else:
        if dataset.true_beta is None:
            raise InitializationError("Known-beta mode needs a dataset with true_beta")
        beta = dataset.true_beta

    subset = np.sort(_ordering(np.abs(dataset.y - dataset.X @ beta))[:m0])
    steps = []
    for m in range(m0, n):
        step = forward_step(dataset, beta, m, subset, config.dof_correct, config.estimate)
        logger.debug(f'step m={m}: z={step.z:.6g}, d={step.d:.6g}, sigma_sq={step.sigma_sq:.6g}',
                     extra={'step': m})
        steps.append(step)
        beta, subset = step.next_beta, step.next_subset
    return ForwardPath(steps=tuple(steps), n=n, m0=m0, initial=config.initial, seed=config.seed,
                       dof_correct=config.dof_correct, columns=dataset.columns)


def bias_corrected_sigma(path: ForwardPath, dist: ReferenceDistribution, include_final: bool = False) -> np.ndarray:
    """sigma_corr(m) = sigma(m) / varsigma_{m/n} for every step.

    include_final appends the full-sample fit, whose correction factor is 1.
    """
    if not path.steps:
        raise ValueError("Forward path has no steps")
    values = [np.sqrt(step.sigma_sq / sigma_correction(dist, step.m / path.n)) for step in path.steps]
    if include_final:
        values.append(np.sqrt(path.final_sigma_sq / sigma_correction(dist, 1.0)))
    return np.array(values)


def leverage_scaled_residuals(dataset: Dataset, step: ForwardStep) -> np.ndarray:
    """Absolute residuals of step m scaled by sigma(m) and the leverage factor.

    In-subset residuals are divided by sqrt(1 - h_i), the others by sqrt(1 + h_i),
    with h_i = x_i' (sum_{j in S(m)} x_j x_j')^{-1} x_i.
    """
    Xs = dataset.X[step.subset]
    gram = Xs.T @ Xs
    Q, R, piv = linalg.qr(gram, pivoting=True)
    if _rank_deficient(R):
        raise RankDeficiencyError(f"Gram matrix of S(m) is rank deficient at m={step.m}",
                                  subset_size=step.subset.shape[0], m=step.m)
    solved = np.empty((dataset.dim_x, dataset.n))
    solved[piv] = linalg.solve_triangular(R, Q.T @ dataset.X.T)
    leverage = np.einsum('ij,ji->i', dataset.X, solved)

    inside = np.zeros(dataset.n, dtype=bool)
    inside[step.subset] = True
    overflow = inside & (leverage >= 1.0 - LEVERAGE_TOL)
    if overflow.any():
        worst = int(np.flatnonzero(overflow)[0])
        raise LeverageOverflowError(f"Leverage of observation {worst} in S(m) is {leverage[worst]:.6g} >= 1 at m={step.m}")
    factor = np.where(inside, np.sqrt(1.0 - np.where(inside, leverage, 0.0)), np.sqrt(1.0 + leverage))
    residuals = np.abs(dataset.y - dataset.X @ step.beta)
    return residuals / (np.sqrt(step.sigma_sq) * factor)


def embed(path: ForwardPath, psi_grid, field: str = 'z') -> np.ndarray:
    """Right-continuous embedding of a forward statistic on [0, 1].

    For m = int(n psi) the value of step m is returned, 0 below m0/n. At
    int(n psi) = n, beta and sigma_sq take the full-sample fit and z, d
    the last step.
    """
    if field not in ('z', 'd', 'sigma_sq', 'beta'):
        raise DomainError(f"Unknown forward statistic: {field!r}")
    psi_grid = np.atleast_1d(np.asarray(psi_grid, dtype=float))
    n, m0 = path.n, path.m0
    width = path.steps[0].beta.shape[0]
    out = np.zeros((psi_grid.shape[0], width)) if field == 'beta' else np.zeros(psi_grid.shape[0])
    for k, psi in enumerate(psi_grid):
        m = int(np.floor(n * psi + PSI_GUARD))
        if m < m0:
            continue
        if m >= n:
            if field == 'beta':
                out[k] = path.final_beta
            elif field == 'sigma_sq':
                out[k] = path.final_sigma_sq
            else:
                out[k] = getattr(path.steps[-1], field)
            continue
        out[k] = getattr(path.steps[m - m0], field)
    return out


def empirical_abs_quantile(values: np.ndarray, psi: float) -> float:
    """inf{c : (1/n) #{values <= c} >= psi} for nonnegative values."""
    values = np.sort(np.asarray(values, dtype=float))
    n = values.shape[0]
    if psi <= 0.0:
        return 0.0
    k = int(np.ceil(n * psi - PSI_GUARD))
    return float(values[min(max(k, 1), n) - 1])


def perturbed_quantile_gap(errors: np.ndarray, X_normalized: np.ndarray, b: np.ndarray, sigma: float,
                           psi: float) -> tuple:
    """Distance between the psi-quantiles of |eps_i - x_in' b|/sigma and |eps_i|/sigma.

    Returns:
        Tuple (sigma * |c_b - c_0|, 2 |b| max_i |x_in|), the gap and its bound.
    """
    errors = np.asarray(errors, dtype=float)
    shifted = np.abs(errors - X_normalized @ b) / sigma
    c_b = empirical_abs_quantile(shifted, psi)
    c_0 = empirical_abs_quantile(np.abs(errors) / sigma, psi)
    bound = 2.0 * np.linalg.norm(b) * np.max(np.linalg.norm(X_normalized, axis=1))
    return sigma * abs(c_b - c_0), float(bound)
