"""
Pytest configuration and shared fixtures.
"""
import sys
import tempfile
import shutil
from pathlib import Path
import numpy as np
import pytest
import yaml

# Add src directory to Python path
src_path = Path(__file__).parent.parent / 'src'
sys.path.insert(0, str(src_path))

from forward_search import Dataset  # noqa: E402
from refdist import ReferenceDistribution  # noqa: E402


@pytest.fixture
def temp_dir():
    """Create a temporary directory for testing."""
    temp_path = tempfile.mkdtemp()
    yield temp_path
    shutil.rmtree(temp_path, ignore_errors=True)


@pytest.fixture
def normal():
    return ReferenceDistribution.normal()


@pytest.fixture
def location_dataset():
    """Six-point location model."""
    y = np.array([1.0, 2.0, 6.0, -0.5, 3.5, 0.2])
    return Dataset(y=y, X=np.ones((6, 1)))


@pytest.fixture
def regression_dataset():
    """Clean two-regressor dataset with known coefficients."""
    rng = np.random.default_rng(7)
    n = 40
    X = np.column_stack([np.ones(n), rng.uniform(-2, 2, n)])
    beta = np.array([1.0, -0.5])
    y = X @ beta + rng.standard_normal(n)
    return Dataset(y=y, X=X, true_beta=beta, true_sigma=1.0)


@pytest.fixture
def location_csv(temp_dir):
    """CSV file of the six-point location model with a regressor-free header."""
    path = Path(temp_dir) / 'location.csv'
    path.write_text('y\n1\n2\n6\n-0.5\n3.5\n0.2\n')
    return str(path)


@pytest.fixture
def regression_csv(temp_dir, regression_dataset):
    """CSV file with a response column and one regressor."""
    path = Path(temp_dir) / 'regression.csv'
    lines = ['y,x1'] + [f'{float(y)!r},{float(x)!r}' for y, x in zip(regression_dataset.y, regression_dataset.X[:, 1])]
    path.write_text('\n'.join(lines) + '\n')
    return str(path)


@pytest.fixture
def sample_config():
    """Sample configuration dictionary."""
    return {
        'experiment': {
            'regime': 'location',
            'n': 60,
            'dist': 'normal',
            'replicates': 3,
            'psi_probes': [0.6, 0.8],
            'level': 0.9,
            'seed': 11,
        },
        'forward_search': {
            'initial': 'ols',
            'dof_correct': False,
        },
        'settings': {
            'log_level': 'INFO'
        }
    }


@pytest.fixture
def sample_config_yaml(temp_dir, sample_config):
    """Create a temporary YAML config file."""
    config_path = Path(temp_dir) / 'config.yml'
    with open(config_path, 'w') as f:
        yaml.dump(sample_config, f)
    return str(config_path)


@pytest.fixture
def sample_schema_yaml(temp_dir):
    """Create a small schema file."""
    schema = {
        'type': 'object',
        'properties': {
            'experiment': {
                'type': 'object',
                'properties': {
                    'n': {'type': 'integer', 'minimum': 2},
                    'dist': {'type': 'string', 'enum': ['normal', 't']},
                },
            },
            'settings': {
                'type': 'object',
                'properties': {
                    'log_level': {'type': 'string'}
                }
            }
        },
        'required': ['experiment']
    }

    schema_path = Path(temp_dir) / 'schema.yml'
    with open(schema_path, 'w') as f:
        yaml.dump(schema, f)
    return str(schema_path)


def pytest_configure(config):
    """Configure pytest with custom markers."""
    config.addinivalue_line(
        "markers", "slow: desk-scale Monte Carlo runs (minutes)"
    )
