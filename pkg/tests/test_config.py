"""
Unit tests for config module.
"""
import os
import pytest
import yaml
import jsonschema
from pathlib import Path

import config.config as config_module
from forward_search import InitialMethod
from montecarlo import Regime
from refdist import DomainError, UnsupportedDofError


class TestGetYaml:
    """Tests for _get_yaml function."""

    def test_load_valid_yaml(self, sample_config_yaml):
        """Test loading a valid YAML file."""
        result = config_module._get_yaml(sample_config_yaml)
        assert isinstance(result, dict)
        assert 'experiment' in result
        assert 'settings' in result

    def test_load_json(self, temp_dir):
        """Test that JSON configuration files load through the YAML parser."""
        json_file = Path(temp_dir) / 'config.json'
        json_file.write_text('{"experiment": {"n": 200, "regime": "trend"}}')
        assert config_module._get_yaml(str(json_file)) == {'experiment': {'n': 200, 'regime': 'trend'}}

    def test_file_not_found(self, temp_dir):
        """Test loading a non-existent file."""
        non_existent = os.path.join(temp_dir, 'does_not_exist.yml')
        with pytest.raises(FileNotFoundError) as exc_info:
            config_module._get_yaml(non_existent)
        assert 'Configuration file not found' in str(exc_info.value)

    def test_directory_instead_of_file(self, temp_dir):
        """Test loading a directory instead of a file."""
        with pytest.raises(IsADirectoryError) as exc_info:
            config_module._get_yaml(temp_dir)
        assert 'found a directory' in str(exc_info.value)

    def test_empty_yaml_file(self, temp_dir):
        """Test loading an empty YAML file."""
        empty_file = Path(temp_dir) / 'empty.yml'
        empty_file.write_text('')
        assert config_module._get_yaml(str(empty_file)) == {}

    def test_invalid_yaml_syntax(self, temp_dir):
        """Test loading a YAML file with invalid syntax."""
        invalid_file = Path(temp_dir) / 'invalid.yml'
        invalid_file.write_text('invalid: yaml: content:\n  - bad indentation')
        with pytest.raises(yaml.YAMLError):
            config_module._get_yaml(str(invalid_file))


class TestValidateSchema:
    """Tests for _validate_schema function."""

    def test_valid_config_against_schema(self, sample_config, sample_schema_yaml):
        """Test validating a valid config against schema."""
        config_module._validate_schema(sample_config, sample_schema_yaml)

    def test_invalid_config_missing_required(self, sample_schema_yaml):
        """Test validating config missing required fields."""
        with pytest.raises(jsonschema.ValidationError):
            config_module._validate_schema({'settings': {'log_level': 'INFO'}}, sample_schema_yaml)

    def test_schema_file_not_found(self, sample_config, temp_dir):
        """Test with non-existent schema file."""
        with pytest.raises(FileNotFoundError):
            config_module._validate_schema(sample_config, os.path.join(temp_dir, 'nonexistent.yml'))

    def test_project_schema_accepts_sample(self, sample_config):
        """Test the shipped schema against the sample configuration."""
        config_module._validate_schema(sample_config)

    @pytest.mark.parametrize('section, key, value', [
        ('experiment', 'regime', 'garch'),
        ('experiment', 'n', 1),
        ('experiment', 'ar_coef', 1.0),
        ('experiment', 'dof', 2),
        ('experiment', 'psi_probes', [0.5, 1.0]),
        ('experiment', 'level', 0.0),
        ('forward_search', 'initial', 'lts'),
        ('settings', 'log_level', 'VERBOSE'),
        ('experiment', 'unknown_key', 1),
    ])
    def test_project_schema_rejects(self, sample_config, section, key, value):
        """Test the shipped schema rejects out-of-range values and unknown keys."""
        sample_config[section][key] = value
        with pytest.raises(jsonschema.ValidationError):
            config_module._validate_schema(sample_config)

    def test_project_schema_rejects_unknown_section(self, sample_config):
        sample_config['libraries'] = []
        with pytest.raises(jsonschema.ValidationError):
            config_module._validate_schema(sample_config)


class TestGetConfig:
    """Tests for get_config function."""

    def test_get_valid_config(self, sample_config_yaml):
        """Test getting a valid configuration."""
        result = config_module.get_config(sample_config_yaml)
        assert result['experiment']['n'] == 60
        assert result['forward_search']['initial'] == 'ols'

    def test_get_config_custom_schema(self, sample_config_yaml, sample_schema_yaml):
        result = config_module.get_config(sample_config_yaml, sample_schema_yaml)
        assert isinstance(result, dict)

    def test_get_config_file_not_found(self):
        """Test getting config from non-existent file."""
        with pytest.raises(FileNotFoundError):
            config_module.get_config('/nonexistent/config.yml')

    def test_get_config_invalid_schema(self, temp_dir):
        """Test getting config that fails schema validation."""
        invalid_file = Path(temp_dir) / 'invalid_config.yml'
        with open(invalid_file, 'w') as f:
            yaml.dump({'experiment': {'n': 'many'}}, f)
        with pytest.raises(jsonschema.ValidationError):
            config_module.get_config(str(invalid_file))

    def test_example_config_is_valid(self):
        """Test the example configuration shipped in data/."""
        example = Path(__file__).parent.parent / 'data' / 'config.example.yml'
        result = config_module.get_config(str(example))
        assert 'experiment' in result


class TestBuildRunConfig:
    """Tests for build_run_config and RunConfig."""

    def test_defaults(self):
        run_config = config_module.build_run_config('bands')
        assert run_config.dist == 'normal'
        assert run_config.level == 0.90
        assert run_config.n == 128
        assert run_config.format == 'csv'
        assert (run_config.psi_min, run_config.psi_max, run_config.psi_points) == (0.05, 0.95, 181)
        assert run_config.distribution.is_normal

    def test_moments_grid_default(self):
        run_config = config_module.build_run_config('moments')
        assert run_config.psi_grid.size == 99
        assert run_config.psi_grid[0] == pytest.approx(0.01)
        assert run_config.psi_grid[-1] == pytest.approx(0.99)

    def test_simulate_defaults_to_json(self):
        assert config_module.build_run_config('simulate').format == 'json'

    def test_precedence(self, sample_config):
        """Test defaults < config file < flags."""
        flags = {'n': 80, 'seed': None, 'level': None}
        run_config = config_module.build_run_config('simulate', flags, sample_config)
        assert run_config.n == 80
        assert run_config.seed == 11
        assert run_config.replicates == 3
        assert run_config.probes == (0.6, 0.8)
        assert run_config.initial == 'ols'
        assert run_config.regime == 'location'

    def test_unknown_flags_ignored(self):
        run_config = config_module.build_run_config('bands', {'config': 'x.yml', 'command': 'bands'})
        assert run_config.command == 'bands'

    def test_forward_search_config(self, sample_config):
        run_config = config_module.build_run_config('simulate', {'m0': 30, 'dof_correct': True}, sample_config)
        fs_config = run_config.forward_search_config()
        assert fs_config.m0 == 30
        assert fs_config.initial is InitialMethod.FULL_LS
        assert fs_config.seed == 11
        assert fs_config.dof_correct is True

    def test_dgp_spec(self):
        run_config = config_module.build_run_config('simulate', {
            'regime': 'ar1', 'dim_x': 2, 'beta': [1, 2], 'ar_coef': 0.3, 'dist': 't', 'dof': 7,
        })
        spec = run_config.dgp_spec()
        assert spec.regime is Regime.STATIONARY_AR1
        assert spec.beta == (1.0, 2.0)
        assert spec.ar_coef == 0.3
        assert spec.error_dist.dof == 7.0

    def test_unknown_regime(self):
        run_config = config_module.build_run_config('simulate', {'regime': 'garch'})
        with pytest.raises(DomainError):
            run_config.dgp_spec()

    def test_threads_from_environment(self, monkeypatch):
        monkeypatch.setenv('FS_THREADS', '8')
        assert config_module.build_run_config('simulate').threads == 8
        assert config_module.build_run_config('simulate', {'threads': 2}).threads == 2

    def test_threads_environment_not_integer(self, monkeypatch):
        monkeypatch.setenv('FS_THREADS', 'many')
        with pytest.raises(DomainError):
            config_module.build_run_config('simulate')

    def test_threads_environment_blank(self, monkeypatch):
        monkeypatch.setenv('FS_THREADS', ' ')
        assert config_module.build_run_config('simulate').threads is None

    @pytest.mark.parametrize('command, flags', [
        ('analyze', {}),
        ('bands', {'level': 1.0}),
        ('bands', {'format': 'xml'}),
        ('simulate', {'initial': 'lts'}),
        ('simulate', {'replicates': 0}),
        ('bands', {'psi_points': 0}),
        ('bands', {'psi_min': 0.9, 'psi_max': 0.1}),
        ('bands', {'dist': 't'}),
        ('bands', {'dist': 'cauchy'}),
        ('plot', {}),
    ])
    def test_invalid(self, command, flags):
        with pytest.raises(DomainError):
            config_module.build_run_config(command, flags)

    def test_scaled_t_without_variance(self):
        with pytest.raises((DomainError, UnsupportedDofError)):
            config_module.build_run_config('bands', {'dist': 't', 'dof': 2})
