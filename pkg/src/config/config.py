import os
from dataclasses import dataclass, field
from typing import Optional

import jsonschema
import numpy as np
import yaml

from forward_search import ForwardSearchConfig, InitialMethod
from montecarlo import DgpSpec, Regime
from refdist import DomainError, ReferenceDistribution

COMMANDS = ('analyze', 'bands', 'simulate', 'moments')
SCHEMA_PATH = os.path.join(os.path.dirname(__file__), '..', '..', 'schemas', 'config.schema.yml')

# (psi_min, psi_max, psi_points) per command
GRID_DEFAULTS = {
    'bands': (0.05, 0.95, 181),
    'moments': (0.01, 0.99, 99),
}

DEFAULTS = {
    'input': None,
    'dist': 'normal',
    'dof': None,
    'm0': None,
    'initial': 'lms',
    'lms_candidates': 500,
    'seed': 0,
    'dof_correct': False,
    'estimate': True,
    'psi_min': None,
    'psi_max': None,
    'psi_points': None,
    'level': 0.90,
    'format': None,
    'output': None,
    'add_intercept': False,
    'n': 128,
    'replicates': 1000,
    'regime': 'location',
    'ar_coef': 0.5,
    'dim_x': None,
    'sigma': 1.0,
    'beta': None,
    'probes': (0.3, 0.5, 0.7, 0.9),
    'quantiles': (0.05, 0.5, 0.95),
    'statistic': 'z_sigma_hat',
    'threads': None,
    'log_level': 'INFO',
    'metrics_file': None,
}

# config file key -> RunConfig field
_FILE_KEYS = {
    'experiment': {
        'regime': 'regime', 'n': 'n', 'dim_x': 'dim_x', 'beta': 'beta', 'sigma': 'sigma',
        'ar_coef': 'ar_coef', 'dist': 'dist', 'dof': 'dof', 'replicates': 'replicates',
        'psi_probes': 'probes', 'quantiles': 'quantiles', 'level': 'level', 'seed': 'seed',
    },
    'forward_search': {
        'm0': 'm0', 'initial': 'initial', 'lms_candidates': 'lms_candidates',
        'dof_correct': 'dof_correct', 'estimate': 'estimate',
    },
    'settings': {'log_level': 'log_level'},
}


def _get_yaml(file_path: str) -> dict:
    """Load a YAML (or JSON) file and return its contents as a dictionary.

    Args:
        file_path: Path to the YAML file.

    Returns:
        Dictionary containing the YAML file contents.
    """
    if not os.path.exists(file_path):
        raise FileNotFoundError(f"Configuration file not found: {file_path}")

    if os.path.isdir(file_path):
        raise IsADirectoryError(f"Expected a configuration file but found a directory: {file_path}")

    with open(file_path, 'r') as file:
        data = yaml.safe_load(file)
    return data if data is not None else {}


def _validate_schema(config: dict, schema_path: str = SCHEMA_PATH) -> None:
    """Validate the configuration data against the JSON schema.

    Args:
        config: Configuration data to validate.
        schema_path: Path to the JSON schema file.

    Raises:
        jsonschema.ValidationError: If the configuration does not conform to the schema.
    """
    schema_data = _get_yaml(schema_path)
    jsonschema.validate(instance=config, schema=schema_data)


def get_config(config_path: str = 'data/config.yml', schema_path: str = SCHEMA_PATH) -> dict:
    """Load and validate the configuration file.

    Args:
        config_path: Path to the configuration file.
        schema_path: Path to the JSON schema file.

    Returns:
        Dictionary containing the configuration data.

    Raises:
        jsonschema.ValidationError: If the configuration does not conform to the schema.
    """
    config = _get_yaml(config_path)
    _validate_schema(config, schema_path)
    return config


@dataclass(frozen=True)
class RunConfig:
    """Validated settings of one CLI command."""

    command: str
    input: Optional[str] = None
    dist: str = 'normal'
    dof: Optional[float] = None
    m0: Optional[int] = None
    initial: str = 'lms'
    lms_candidates: int = 500
    seed: int = 0
    dof_correct: bool = False
    estimate: bool = True
    psi_min: Optional[float] = None
    psi_max: Optional[float] = None
    psi_points: Optional[int] = None
    level: float = 0.90
    format: str = 'csv'
    output: Optional[str] = None
    add_intercept: bool = False
    n: int = 128
    replicates: int = 1000
    regime: str = 'location'
    ar_coef: float = 0.5
    dim_x: Optional[int] = None
    sigma: float = 1.0
    beta: Optional[tuple] = None
    probes: tuple = (0.3, 0.5, 0.7, 0.9)
    quantiles: tuple = (0.05, 0.5, 0.95)
    statistic: str = 'z_sigma_hat'
    threads: Optional[int] = None
    log_level: str = 'INFO'
    metrics_file: Optional[str] = None
    distribution: ReferenceDistribution = field(init=False, repr=False)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise DomainError(f"Unknown command: {self.command!r}")
        if self.command == 'analyze' and not self.input:
            raise DomainError("Command 'analyze' needs an input CSV file")
        if not 0.0 < self.level < 1.0:
            raise DomainError(f"Parameter level must lie in (0, 1), got {self.level}")
        if self.format not in ('csv', 'json'):
            raise DomainError(f"Parameter format must be 'csv' or 'json', got {self.format!r}")
        if self.initial not in ('lms', 'ols'):
            raise DomainError(f"Parameter initial must be 'lms' or 'ols', got {self.initial!r}")
        if self.replicates < 1:
            raise DomainError(f"Parameter reps must be at least 1, got {self.replicates}")
        if self.threads is not None and self.threads < 1:
            raise DomainError(f"Parameter threads (FS_THREADS) must be at least 1, got {self.threads}")
        if self.psi_points is not None and self.psi_points < 1:
            raise DomainError(f"Parameter psi-points must be at least 1, got {self.psi_points}")
        if self.psi_min is not None and self.psi_max is not None and self.psi_min > self.psi_max:
            raise DomainError(f"Parameter psi-min ({self.psi_min}) exceeds psi-max ({self.psi_max})")
        object.__setattr__(self, 'distribution', ReferenceDistribution.from_name(self.dist, self.dof))

    @property
    def psi_grid(self) -> np.ndarray:
        return np.linspace(self.psi_min, self.psi_max, self.psi_points)

    def forward_search_config(self) -> ForwardSearchConfig:
        return ForwardSearchConfig(
            m0=self.m0,
            initial=InitialMethod(self.initial),
            seed=self.seed,
            dof_correct=self.dof_correct,
            lms_candidates=self.lms_candidates,
            estimate=self.estimate,
        )

    def dgp_spec(self) -> DgpSpec:
        try:
            regime = Regime(self.regime)
        except ValueError as e:
            raise DomainError(f"Parameter regime must be one of {[r.value for r in Regime]}, got {self.regime!r}") from e
        return DgpSpec(
            regime=regime,
            n=self.n,
            dim_x=self.dim_x,
            beta=self.beta,
            sigma=self.sigma,
            error_dist=self.distribution,
            ar_coef=self.ar_coef,
        )


def _file_values(file_config: Optional[dict]) -> dict:
    values = {}
    for section, keys in _FILE_KEYS.items():
        for key, name in keys.items():
            if key in (file_config or {}).get(section, {}):
                values[name] = file_config[section][key]
    return values


def _env_threads() -> Optional[int]:
    raw = os.getenv('FS_THREADS')
    if raw is None or raw.strip() == '':
        return None
    try:
        return int(raw)
    except ValueError as e:
        raise DomainError(f"FS_THREADS must be an integer, got {raw!r}") from e


def build_run_config(command: str, flags: Optional[dict] = None, file_config: Optional[dict] = None) -> RunConfig:
    """Merge defaults, config file values and command-line flags (in that order).

    Args:
        command: One of analyze, bands, simulate, moments.
        flags: Parsed flags; None values count as not given.
        file_config: Validated configuration file contents.

    Returns:
        RunConfig for the command.

    Raises:
        DomainError: If a parameter is missing or out of range.
    """
    values = dict(DEFAULTS)
    values['threads'] = _env_threads()
    values.update(_file_values(file_config))
    values.update({key: value for key, value in (flags or {}).items() if key in DEFAULTS and value is not None})

    grid = GRID_DEFAULTS.get(command, (0.05, 0.95, 181))
    for name, default in zip(('psi_min', 'psi_max', 'psi_points'), grid):
        if values[name] is None:
            values[name] = default
    if values['format'] is None:
        values['format'] = 'json' if command == 'simulate' else 'csv'
    for name in ('probes', 'quantiles', 'beta'):
        if values[name] is not None:
            values[name] = tuple(float(v) for v in values[name])
    return RunConfig(command=command, **values)
