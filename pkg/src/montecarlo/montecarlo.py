"""Monte Carlo engine: data-generating processes, replicated Forward Search
runs, direct simulation of the empirical processes G, L, K and comparison
with the asymptotic theory.

Replicate r of master seed s always draws from
``SeedSequence(entropy=s, spawn_key=(r,))``, so serial and threaded
execution give identical reports.
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np

from asymptotics import (
    BandStatistic,
    band,
    beta_asymptotic_variance,
    omega,
    var_G,
    var_L,
    cov_GL,
)
from forward_search import (
    Dataset,
    ForwardPath,
    ForwardSearchConfig,
    InitializationError,
    RankDeficiencyError,
    LeverageOverflowError,
    embed,
    run_forward_search,
)
from refdist import (
    DomainError,
    ReferenceDistribution,
    UnsupportedDofError,
    abs_quantile,
    pdf,
    psi_functions,
    sigma_correction,
    truncated_moments,
)

logger = logging.getLogger(__name__)

DEFAULT_PROBES = (0.3, 0.5, 0.7, 0.9)
DEFAULT_QUANTILES = (0.05, 0.5, 0.95)
REPLICATE_FAILURES = (RankDeficiencyError, InitializationError, LeverageOverflowError, FloatingPointError)


class Regime(Enum):
    LOCATION_SCALE = 'location'
    STATIONARY_AR1 = 'ar1'
    LINEAR_TREND = 'trend'
    RANDOM_WALK = 'random_walk'


_DIM_X = {
    Regime.LOCATION_SCALE: (1,),
    Regime.STATIONARY_AR1: (1, 2),
    Regime.LINEAR_TREND: (2,),
    Regime.RANDOM_WALK: (1,),
}

STATIONARY_REGIMES = (Regime.LOCATION_SCALE, Regime.STATIONARY_AR1)


@dataclass(frozen=True)
class DgpSpec:
    """Data-generating process y_i = x_i' beta + sigma eps_i.

    Regressors per regime: a ones column; a stationary AR(1) series, with a
    leading ones column when dim_x is 2; the trend (1, i); or the random walk
    x_i = sum_{s < i} eps_s of the regression errors.
    """

    regime: Regime = Regime.LOCATION_SCALE
    n: int = 128
    dim_x: Optional[int] = None
    beta: Optional[tuple] = None
    sigma: float = 1.0
    error_dist: ReferenceDistribution = field(default_factory=ReferenceDistribution.normal)
    ar_coef: float = 0.5

    def __post_init__(self):
        allowed = _DIM_X[self.regime]
        dim_x = allowed[0] if self.dim_x is None else int(self.dim_x)
        if dim_x not in allowed:
            raise DomainError(f"Regime {self.regime.value} supports dim_x in {allowed}, got dim_x={dim_x}")
        object.__setattr__(self, 'dim_x', dim_x)
        beta = tuple(0.0 for _ in range(dim_x)) if self.beta is None else tuple(float(b) for b in self.beta)
        if len(beta) != dim_x:
            raise DomainError(f"beta has {len(beta)} components but dim_x={dim_x}")
        object.__setattr__(self, 'beta', beta)
        if not self.sigma > 0:
            raise DomainError(f"sigma must be positive, got sigma={self.sigma}")
        if not abs(self.ar_coef) < 1:
            raise DomainError(f"The AR(1) coefficient must satisfy |ar_coef| < 1, got ar_coef={self.ar_coef}")
        if not self.n > dim_x:
            raise DomainError(f"n must exceed dim_x, got n={self.n}, dim_x={dim_x}")

    def to_dict(self) -> dict:
        data = asdict(self)
        data['regime'] = self.regime.value
        data['beta'] = list(self.beta)
        data['error_dist'] = self.error_dist.label
        return data


def replicate_rng(master_seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(key)))


def resolve_threads(threads: Optional[int]) -> int:
    if threads is None:
        return os.cpu_count() or 1
    return max(1, int(threads))


def _map_replicates(func: Callable[[int], object], replicates: int, threads: Optional[int]) -> list:
    workers = min(resolve_threads(threads), replicates)
    if workers <= 1:
        return [func(r) for r in range(replicates)]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(func, range(replicates)))


def normalization(spec: DgpSpec) -> np.ndarray:
    """Normalization matrix N of the regime."""
    n = spec.n
    if spec.regime is Regime.LINEAR_TREND:
        return np.diag([n ** -0.5, n ** -1.5])
    if spec.regime is Regime.RANDOM_WALK:
        return np.array([[1.0 / n]])
    return np.eye(spec.dim_x) / np.sqrt(n)


def _regressors(spec: DgpSpec, errors: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n = spec.n
    if spec.regime is Regime.LOCATION_SCALE:
        return np.ones((n, 1))
    if spec.regime is Regime.LINEAR_TREND:
        return np.column_stack([np.ones(n), np.arange(1, n + 1, dtype=float)])
    if spec.regime is Regime.RANDOM_WALK:
        return np.concatenate([[0.0], np.cumsum(errors[:-1])]).reshape(-1, 1)
    a = spec.ar_coef
    innovations = rng.standard_normal(n)
    series = np.empty(n)
    series[0] = innovations[0] / np.sqrt(1.0 - a * a)
    for i in range(1, n):
        series[i] = a * series[i - 1] + innovations[i]
    if spec.dim_x == 2:
        return np.column_stack([np.ones(n), series])
    return series.reshape(-1, 1)


def generate(spec: DgpSpec, seed) -> Dataset:
    """Draw one dataset; seed is an int, a SeedSequence or a Generator."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    errors = spec.sigma * spec.error_dist.sample(rng, spec.n)
    X = _regressors(spec, errors, rng)
    beta = np.asarray(spec.beta)
    return Dataset(y=X @ beta + errors, X=X, true_beta=beta, true_sigma=spec.sigma)


def _abs_quantiles(dist: ReferenceDistribution, psi_grid: np.ndarray) -> np.ndarray:
    out = np.empty(psi_grid.shape[0])
    for k, psi in enumerate(psi_grid):
        if not 0.0 <= psi <= 1.0:
            raise DomainError(f"psi must lie in [0, 1], got psi={psi}")
        out[k] = np.inf if psi == 1.0 else abs_quantile(dist, float(psi))
    return out


def _truncated_taus(dist: ReferenceDistribution, psi_grid: np.ndarray) -> np.ndarray:
    return np.array([1.0 if psi == 1.0 else truncated_moments(dist, float(psi), with_kappa=False)[0]
                     for psi in psi_grid])


def _counts(errors: np.ndarray, sigma: float, c: np.ndarray) -> tuple:
    ordered = np.sort(np.abs(np.asarray(errors, dtype=float)) / sigma)
    return ordered, np.searchsorted(ordered, c, side='right')


def empirical_G(errors, dist: ReferenceDistribution, psi_grid, sigma: float = 1.0) -> np.ndarray:
    """G_n(c_psi) = n^{-1/2} sum {1(|eps_i / sigma| <= c_psi) - psi} on the grid."""
    grid = np.atleast_1d(np.asarray(psi_grid, dtype=float))
    _, counts = _counts(errors, sigma, _abs_quantiles(dist, grid))
    n = len(errors)
    return (counts - n * grid) / np.sqrt(n)


def empirical_L(errors, dist: ReferenceDistribution, psi_grid, sigma: float = 1.0) -> np.ndarray:
    """L_n(c_psi), the normalized truncated second-moment process; 0 at psi = 0."""
    grid = np.atleast_1d(np.asarray(psi_grid, dtype=float))
    c = _abs_quantiles(dist, grid)
    tau = _truncated_taus(dist, grid)
    ordered, counts = _counts(errors, sigma, c)
    n = ordered.shape[0]
    partial = np.concatenate([[0.0], np.cumsum(ordered ** 2)])[counts]
    # c^2 (k - n psi) vanishes at psi = 1 where c is infinite
    with np.errstate(invalid='ignore'):
        excess = np.where(np.isfinite(c), c ** 2 * (counts - n * grid), 0.0)
    out = np.zeros(grid.shape[0])
    positive = tau > 0
    out[positive] = (partial[positive] - excess[positive] - n * tau[positive]) / (tau[positive] * np.sqrt(n))
    return out


def empirical_K(errors, X, N, psi_grid, dist: Optional[ReferenceDistribution] = None,
                sigma: float = 1.0) -> np.ndarray:
    """K_n(c_psi) = sum N' x_i eps_i 1(|eps_i / sigma| <= c_psi), one row per grid point."""
    dist = dist or ReferenceDistribution.normal()
    grid = np.atleast_1d(np.asarray(psi_grid, dtype=float))
    errors = np.asarray(errors, dtype=float)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    order = np.argsort(np.abs(errors) / sigma, kind='stable')
    _, counts = _counts(errors, sigma, _abs_quantiles(dist, grid))
    contributions = (X @ np.atleast_2d(N))[order] * errors[order, None]
    partial = np.vstack([np.zeros(X.shape[1]), np.cumsum(contributions, axis=0)])
    return partial[counts]


@dataclass(frozen=True)
class ProcessReport:
    """Replicated G_n, L_n, K_n realizations and Sigma_n = N' sum x_i x_i' N."""

    spec: DgpSpec
    psi_grid: np.ndarray
    G: np.ndarray
    L: np.ndarray
    K: np.ndarray
    Sigma_n: np.ndarray
    seed: int

    @property
    def replicates(self) -> int:
        return self.G.shape[0]

    @property
    def Sigma_mean(self) -> np.ndarray:
        return self.Sigma_n.mean(axis=0)

    def empirical_cov_GL(self) -> np.ndarray:
        centred_G = self.G - self.G.mean(axis=0)
        centred_L = self.L - self.L.mean(axis=0)
        return (centred_G * centred_L).sum(axis=0) / (self.replicates - 1)

    def empirical_var_K(self) -> np.ndarray:
        return np.stack([np.atleast_2d(np.cov(self.K[:, k, :], rowvar=False)) for k in range(self.psi_grid.shape[0])])

    def summary(self) -> list:
        """Per-psi empirical moments next to their limits; limits are None off (0, 1)."""
        dist = self.spec.error_dist
        var_K = self.empirical_var_K()
        cov = self.empirical_cov_GL()
        rows = []
        for k, psi in enumerate(self.psi_grid):
            row = {
                'psi': float(psi),
                'var_G': float(self.G[:, k].var(ddof=1)),
                'var_L': float(self.L[:, k].var(ddof=1)),
                'cov_GL': float(cov[k]),
                'var_K': var_K[k].tolist(),
                'var_G_limit': None,
                'var_L_limit': None,
                'cov_GL_limit': None,
                'var_K_limit': None,
            }
            if 0.0 < psi < 1.0:
                row['var_G_limit'] = var_G(psi)
                row['cov_GL_limit'] = cov_GL(dist, psi)
                try:
                    row['var_L_limit'] = var_L(dist, psi)
                except UnsupportedDofError:
                    pass
                if self.spec.regime in STATIONARY_REGIMES:
                    tau, _ = truncated_moments(dist, psi, with_kappa=False)
                    row['var_K_limit'] = (tau * self.spec.sigma ** 2 * self.Sigma_mean).tolist()
            rows.append(row)
        return rows


def simulate_processes(spec: DgpSpec, psi_grid, replicates: int, master_seed: int,
                       threads: Optional[int] = None) -> ProcessReport:
    """Draw errors and regressors and evaluate G_n, L_n, K_n with the true scale."""
    if replicates < 2:
        raise DomainError(f"Process variances need at least 2 replicates, got {replicates}")
    grid = np.atleast_1d(np.asarray(psi_grid, dtype=float))
    N = normalization(spec)
    dist = spec.error_dist

    def one(r: int) -> tuple:
        dataset = generate(spec, replicate_rng(master_seed, r))
        errors = dataset.errors
        XN = dataset.X @ N
        return (
            empirical_G(errors, dist, grid, spec.sigma),
            empirical_L(errors, dist, grid, spec.sigma),
            empirical_K(errors, dataset.X, N, grid, dist, spec.sigma),
            XN.T @ XN,
        )

    results = _map_replicates(one, replicates, threads)
    return ProcessReport(
        spec=spec,
        psi_grid=grid,
        G=np.vstack([r[0] for r in results]),
        L=np.vstack([r[1] for r in results]),
        K=np.stack([r[2] for r in results]),
        Sigma_n=np.stack([r[3] for r in results]),
        seed=master_seed,
    )


@dataclass(frozen=True)
class ProbeStatistic:
    name: str
    band_statistic: Optional[BandStatistic]


PROBE_STATISTICS = (
    ProbeStatistic('z_sigma_hat', BandStatistic.Z_OVER_SIGMA_HAT),
    ProbeStatistic('z_sigma_corr', BandStatistic.Z_OVER_SIGMA_CORR),
    ProbeStatistic('z_known_sigma', BandStatistic.Z_OVER_KNOWN_SIGMA),
    ProbeStatistic('sigma_corr_sq', None),
)


def _centre_and_variance(name: str, dist: ReferenceDistribution, psi: float) -> tuple:
    values = psi_functions(dist, psi)
    varsigma_sq = values.varsigma_sq
    if name == 'z_sigma_hat':
        return values.c / np.sqrt(varsigma_sq), omega(dist, psi) / varsigma_sq
    if name == 'z_sigma_corr':
        return values.c, omega(dist, psi)
    if name == 'z_known_sigma':
        f = float(pdf(dist, values.c))
        return values.c / np.sqrt(varsigma_sq), var_G(psi) / (2.0 * f) ** 2 / varsigma_sq
    return 1.0, None


def _probe_values(path: ForwardPath, dataset: Dataset, dist: ReferenceDistribution, probes: np.ndarray,
                  N_inverse: np.ndarray) -> tuple:
    n = path.n
    z = embed(path, probes, 'z')
    sigma_sq = embed(path, probes, 'sigma_sq')
    betas = embed(path, probes, 'beta')
    sigma = dataset.true_sigma
    raw = np.empty((probes.shape[0], len(PROBE_STATISTICS)))
    for k, psi in enumerate(probes):
        m = int(np.floor(n * psi + 1e-9))
        correction = sigma_correction(dist, m / n)
        sigma_hat = np.sqrt(sigma_sq[k])
        sigma_corr = np.sqrt(sigma_sq[k] / correction)
        raw[k] = (
            z[k] / sigma_hat,
            z[k] / sigma_corr,
            z[k] / (sigma * np.sqrt(sigma_correction(dist, psi))),
            sigma_sq[k] / correction / sigma ** 2,
        )
    beta_stat = (betas - dataset.true_beta) @ N_inverse.T
    return raw, beta_stat


@dataclass(frozen=True)
class ReplicateOutcome:
    index: int
    raw: Optional[np.ndarray] = None
    beta: Optional[np.ndarray] = None
    Sigma_n: Optional[np.ndarray] = None
    error: Optional[str] = None


def _finite(value):
    if value is None:
        return None
    value = float(value)
    return value if np.isfinite(value) else None


def _describe(sample: np.ndarray, quantiles: Sequence[float]) -> dict:
    return {
        'mean': _finite(sample.mean()),
        'variance': _finite(sample.var(ddof=1)) if sample.shape[0] > 1 else 0.0,
        'quantiles': {f'{q:g}': _finite(np.quantile(sample, q)) for q in quantiles},
    }


@dataclass(frozen=True)
class SimulationReport:
    """Aggregated Monte Carlo results of run_experiment."""

    config: dict
    replicates: int
    failures: int
    seed: int
    probes: list
    beta: list
    skipped_probes: list = field(default_factory=list)
    failure_messages: list = field(default_factory=list)

    @property
    def succeeded(self) -> int:
        return self.replicates - self.failures

    def to_dict(self) -> dict:
        return {
            'config': self.config,
            'replicates': self.replicates,
            'failures': self.failures,
            'seed': self.seed,
            'skipped_probes': self.skipped_probes,
            'probes': self.probes,
            'beta': self.beta,
        }

    def csv_rows(self) -> list:
        """One flat row per (psi, statistic); beta components appear as beta_j."""
        rows = []
        for probe in self.probes:
            for name, stats in probe['statistics'].items():
                row = {
                    'psi': probe['psi'],
                    'm': probe['m'],
                    'statistic': name,
                    'mean': stats['mean'],
                    'variance': stats['variance'],
                    'raw_mean': stats['raw_mean'],
                    'centre': stats['centre'],
                    'asymptotic_variance': stats['asymptotic_variance'],
                    'band_lower': stats['band_lower'],
                    'band_upper': stats['band_upper'],
                    'coverage': probe['coverage'].get(name),
                }
                for q, value in stats['quantiles'].items():
                    row[f'q{q}'] = value
                rows.append(row)
        for entry in self.beta:
            row = {
                'psi': entry['psi'],
                'm': entry['m'],
                'statistic': f"beta_{entry['component']}",
                'mean': entry['mean'],
                'variance': entry['variance'],
                'raw_mean': None,
                'centre': 0.0,
                'asymptotic_variance': entry['asymptotic_variance'],
                'band_lower': None,
                'band_upper': None,
                'coverage': None,
            }
            for q, value in entry['quantiles'].items():
                row[f'q{q}'] = value
            rows.append(row)
        return rows


def run_experiment(spec: DgpSpec, fs_config: Optional[ForwardSearchConfig] = None, replicates: int = 100,
                   psi_probes: Sequence[float] = DEFAULT_PROBES, master_seed: int = 0,
                   quantiles: Sequence[float] = DEFAULT_QUANTILES, level: float = 0.90,
                   threads: Optional[int] = None) -> SimulationReport:
    """Replicate dataset generation and the Forward Search, and summarise the
    normalized forward statistics at the probe values of psi.

    Probes below m0/n are skipped with a warning. Failed replicates are
    counted and excluded from the summaries.
    """
    if replicates < 1:
        raise DomainError(f"replicates must be at least 1, got {replicates}")
    if not 0.0 < level < 1.0:
        raise DomainError(f"level must lie in (0, 1), got level={level}")
    fs_config = fs_config or ForwardSearchConfig()
    quantiles = sorted(float(q) for q in quantiles)
    if any(not 0.0 <= q <= 1.0 for q in quantiles):
        raise DomainError(f"quantile probabilities must lie in [0, 1], got {quantiles}")
    n = spec.n
    m0 = fs_config.checked_m0(n, spec.dim_x)
    probes, skipped = [], []
    for psi in sorted(float(p) for p in psi_probes):
        if not 0.0 < psi < 1.0:
            raise DomainError(f"Probe values must lie in (0, 1), got psi={psi}")
        if int(np.floor(n * psi + 1e-9)) < m0:
            logger.warning(f'Probe psi={psi} lies below m0/n={m0 / n:.4g} and is skipped', extra={'psi': psi})
            skipped.append(psi)
        else:
            probes.append(psi)
    probes = np.array(probes)
    dist = spec.error_dist
    N = normalization(spec)
    N_inverse = np.linalg.inv(N)

    def one(r: int) -> ReplicateOutcome:
        rng = replicate_rng(master_seed, r)
        dataset = generate(spec, rng)
        config = replace(fs_config, seed=int(rng.integers(0, 2 ** 32)))
        try:
            path = run_forward_search(dataset, config)
        except REPLICATE_FAILURES as e:
            logger.warning(f'Replicate {r} failed: {e}', extra={'replicate': r})
            return ReplicateOutcome(index=r, error=str(e))
        raw, beta = _probe_values(path, dataset, dist, probes, N_inverse)
        XN = dataset.X @ N
        return ReplicateOutcome(index=r, raw=raw, beta=beta, Sigma_n=XN.T @ XN)

    results = _map_replicates(one, replicates, threads)
    failed = [res for res in results if res.error is not None]
    succeeded = [res for res in results if res.error is None]
    logger.info(f'{len(succeeded)} of {replicates} replicates succeeded', extra={'n': n})

    config_echo = {
        'dgp': spec.to_dict(),
        'forward_search': {
            'm0': m0,
            'initial': fs_config.initial.value,
            'lms_candidates': fs_config.lms_candidates,
            'dof_correct': fs_config.dof_correct,
            'estimate': fs_config.estimate,
        },
        'psi_probes': [float(p) for p in psi_probes],
        'quantiles': quantiles,
        'level': level,
    }
    probe_records, beta_records = [], []
    if succeeded and probes.size:
        raw = np.stack([res.raw for res in succeeded])
        beta_stats = np.stack([res.beta for res in succeeded])
        bands = {stat.name: band(dist, stat.band_statistic, probes, n, level)
                 for stat in PROBE_STATISTICS if stat.band_statistic is not None}
        Sigma = None
        if spec.regime in STATIONARY_REGIMES:
            Sigma = np.mean([res.Sigma_n for res in succeeded], axis=0)
        for k, psi in enumerate(probes):
            record = {'psi': float(psi), 'm': int(np.floor(n * psi + 1e-9)), 'statistics': {}, 'coverage': {}}
            for j, stat in enumerate(PROBE_STATISTICS):
                sample = raw[:, k, j]
                centre, asymptotic_variance = _centre_and_variance(stat.name, dist, float(psi))
                normalized = np.sqrt(n) * (sample - centre)
                entry = _describe(normalized, quantiles)
                entry.update({
                    'raw_mean': _finite(sample.mean()),
                    'raw_quantiles': {f'{q:g}': _finite(np.quantile(sample, q)) for q in quantiles},
                    'centre': _finite(centre),
                    'asymptotic_variance': _finite(asymptotic_variance),
                    'band_lower': None,
                    'band_upper': None,
                })
                if stat.name in bands:
                    curve = bands[stat.name]
                    entry['band_lower'] = float(curve.lower[k])
                    entry['band_upper'] = float(curve.upper[k])
                    inside = curve.contains(k, sample)
                    record['coverage'][stat.name] = float(inside.mean())
                record['statistics'][stat.name] = entry
            probe_records.append(record)
            limit = None if Sigma is None else beta_asymptotic_variance(dist, float(psi), spec.sigma, Sigma)
            for component in range(spec.dim_x):
                entry = _describe(beta_stats[:, k, component], quantiles)
                entry.update({
                    'psi': float(psi),
                    'm': record['m'],
                    'component': component,
                    'asymptotic_variance': None if limit is None else float(limit[component, component]),
                })
                beta_records.append(entry)

    return SimulationReport(
        config=config_echo,
        replicates=replicates,
        failures=len(failed),
        seed=master_seed,
        probes=probe_records,
        beta=beta_records,
        skipped_probes=skipped,
        failure_messages=[f'replicate {res.index}: {res.error}' for res in failed],
    )


def deletion_gap(path: ForwardPath, dist: ReferenceDistribution, psi1: float) -> float:
    """max over steps with m/n >= psi1 of f(c_{m/n}) n^{1/2} (z(m) - d(m))."""
    if not path.m0 / path.n < psi1 < 1.0:
        raise DomainError(f"psi1 must lie in (m0/n, 1) = ({path.m0 / path.n:.4g}, 1), got psi1={psi1}")
    n = path.n
    gap = 0.0
    for step in path.steps:
        psi = step.m / n
        if psi + 1e-12 < psi1:
            continue
        c = abs_quantile(dist, psi)
        gap = max(gap, float(pdf(dist, c)) * np.sqrt(n) * (step.z - step.d))
    return gap


def bahadur_discrepancy(path: ForwardPath, dataset: Dataset, dist: ReferenceDistribution,
                        psi_min: float = 0.5) -> float:
    """sup over psi = m/n >= psi_min of |2 f(c) n^{1/2}(z_psi / sigma - c) + G_n(c)|.

    Uses the dataset's true beta and sigma for G_n.
    """
    if dataset.true_sigma is None or dataset.true_beta is None:
        raise DomainError("The discrepancy needs a simulated dataset with true_beta and true_sigma")
    n = path.n
    steps = [step for step in path.steps if step.m / n + 1e-12 >= psi_min]
    if not steps:
        raise DomainError(f"No step of the path reaches psi_min={psi_min}")
    grid = np.array([step.m / n for step in steps])
    G = empirical_G(dataset.errors, dist, grid, dataset.true_sigma)
    c = _abs_quantiles(dist, grid)
    f = pdf(dist, c)
    z = np.array([step.z for step in steps])
    return float(np.max(np.abs(2.0 * f * np.sqrt(n) * (z / dataset.true_sigma - c) + G)))


def convergence_study(base_spec: DgpSpec, fs_config: Optional[ForwardSearchConfig] = None,
                      sample_sizes: Sequence[int] = (100, 200, 400, 800), replicates: int = 500,
                      master_seed: int = 0, psi1: float = 0.6, psi_min: float = 0.5,
                      threads: Optional[int] = None) -> list:
    """Replicate medians of the Bahadur discrepancy and the deletion gap for each n."""
    fs_config = fs_config or ForwardSearchConfig()
    dist = base_spec.error_dist
    rows = []
    for index, n in enumerate(sample_sizes):
        spec = replace(base_spec, n=int(n))

        def one(r: int):
            rng = replicate_rng(master_seed, index, r)
            dataset = generate(spec, rng)
            config = replace(fs_config, seed=int(rng.integers(0, 2 ** 32)))
            try:
                path = run_forward_search(dataset, config)
            except REPLICATE_FAILURES as e:
                logger.warning(f'Replicate {r} at n={n} failed: {e}', extra={'replicate': r, 'n': n})
                return None
            return bahadur_discrepancy(path, dataset, dist, psi_min), deletion_gap(path, dist, psi1)

        results = [res for res in _map_replicates(one, replicates, threads) if res is not None]
        values = np.array(results).reshape(-1, 2)
        rows.append({
            'n': int(n),
            'replicates': replicates,
            'failures': replicates - len(results),
            'bahadur_median': _finite(np.median(values[:, 0])) if len(results) else None,
            'deletion_gap_median': _finite(np.median(values[:, 1])) if len(results) else None,
        })
        logger.info(f'convergence study n={n}: {rows[-1]}', extra={'n': int(n)})
    return rows


def tail_product_spread(n_values: Sequence[int] = (100, 400, 1600), replicates: int = 1000, seed: int = 0,
                        dist: Optional[ReferenceDistribution] = None) -> list:
    """Replicate standard deviation of c_psi^2 G_n(c_psi) at psi = 1 - 1/n."""
    dist = dist or ReferenceDistribution.normal()
    rows = []
    for index, n in enumerate(n_values):
        psi = 1.0 - 1.0 / n
        c = abs_quantile(dist, psi)
        rng = replicate_rng(seed, index)
        values = np.array([c ** 2 * empirical_G(dist.sample(rng, n), dist, [psi])[0] for _ in range(replicates)])
        rows.append({'n': int(n), 'psi': psi, 'sd': float(values.std(ddof=1))})
    return rows


def t_order_statistic_probe(m: int, dim_x: int, n: int, replicates: int, seed: int,
                            reference: str = 't', chunk: int = 500) -> dict:
    """Normalized (m+1)-st order statistic of n absolute t_{m - dim_x} draws.

    Returns mean and variance of 2 phi(c) n^{1/2}(v_(m+1) - c), c the normal
    abs-quantile at m/n, next to the limiting variance psi(1 - psi).
    reference='normal' draws standard normals instead.
    """
    dof = m - dim_x
    if not dof > 2:
        raise DomainError(f"m - dim_x must exceed 2, got {dof}")
    if not 0 < m < n:
        raise DomainError(f"m must satisfy 0 < m < n, got m={m}, n={n}")
    if reference not in ('t', 'normal'):
        raise DomainError(f"reference must be 't' or 'normal', got {reference!r}")
    normal = ReferenceDistribution.normal()
    psi = m / n
    c = abs_quantile(normal, psi)
    scale = 2.0 * float(pdf(normal, c)) * np.sqrt(n)
    rng = np.random.default_rng(seed)
    values = []
    remaining = replicates
    while remaining > 0:
        size = min(chunk, remaining)
        draws = rng.standard_t(dof, (size, n)) if reference == 't' else rng.standard_normal((size, n))
        order_statistic = np.partition(np.abs(draws), m, axis=1)[:, m]
        values.append(scale * (order_statistic - c))
        remaining -= size
    values = np.concatenate(values)
    return {
        'm': m,
        'n': n,
        'dof': dof,
        'psi': psi,
        'reference': reference,
        'replicates': replicates,
        'mean': float(values.mean()),
        'variance': float(values.var(ddof=1)),
        'limit_variance': var_G(psi),
    }
