# Standard libraries
import argparse
import logging
import os
import sys
from typing import Optional

# Third-party libraries
import jsonschema
import yaml
from dotenv import load_dotenv

# Custom modules
import config
import dataio
from asymptotics import BandStatistic, band
from forward_search import (
    InitializationError,
    LeverageOverflowError,
    RankDeficiencyError,
    run_forward_search,
)
from montecarlo import run_experiment
from observability import setup_logging, MetricsCollector
from refdist import DomainError, QuadratureError, UnsupportedDofError, psi_table

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INPUT = 2
EXIT_NUMERIC = 3
EXIT_DOMAIN = 4

COLUMNS_HELP = """output columns:
  analyze   m, psi, z, d, sigma, sigma_corr, z_scaled, d_scaled, beta_<name>...,
            band_mean, band_lower, band_upper
  bands     psi, mean, lower, upper
  moments   psi, c, tau, kappa, varsigma_sq, rho, f, tau_quadrature, kappa_quadrature
  simulate  psi, m, statistic, mean, variance, raw_mean, centre, asymptotic_variance,
            band_lower, band_upper, coverage, q<p>... (csv); nested report (json)

exit codes: 0 success, 1 configuration error, 2 malformed input,
            3 numeric failure, 4 parameter out of range"""


def run_analyze(run_config: config.RunConfig, logger: logging.Logger,
                metrics_collector: Optional[MetricsCollector] = None) -> list:
    """Forward plot table of a dataset joined with the z/sigma band at each step.

    Args:
        run_config: Settings of the command.
        logger: Logger instance for logging messages.
        metrics_collector: Optional metrics collector for observability.

    Returns:
        Rows of the forward-plot table.
    """
    is_valid, error = dataio.is_valid_input(run_config.input)
    if not is_valid:
        raise dataio.DataFormatError(f'Input "{run_config.input}" is invalid or inaccessible: {error}')
    dataset = dataio.read_dataset(run_config.input, add_intercept=run_config.add_intercept)
    logger.info(f'Running the Forward Search on {dataset.n} observations with {dataset.dim_x} regressors',
                extra={'n': dataset.n})
    path = run_forward_search(dataset, run_config.forward_search_config())
    if metrics_collector:
        metrics_collector.record_steps(len(path.steps))

    rows = path.table(run_config.distribution)
    curve = band(run_config.distribution, BandStatistic.Z_OVER_SIGMA_HAT,
                 [row['psi'] for row in rows], dataset.n, run_config.level)
    for row, mean, lower, upper in zip(rows, curve.mean, curve.lower, curve.upper):
        row['band_mean'] = float(mean)
        row['band_lower'] = float(lower)
        row['band_upper'] = float(upper)
    return rows


def run_bands(run_config: config.RunConfig, logger: logging.Logger) -> list:
    statistic = BandStatistic(run_config.statistic)
    curve = band(run_config.distribution, statistic, run_config.psi_grid, run_config.n, run_config.level)
    logger.info(f'Computed {statistic.value} band for n={run_config.n} on {len(curve.psi_grid)} points',
                extra={'n': run_config.n})
    return curve.rows()


def run_moments(run_config: config.RunConfig, logger: logging.Logger) -> list:
    rows = psi_table(run_config.distribution, run_config.psi_grid)
    logger.info(f'Computed {len(rows)} moment rows for {run_config.distribution.label}')
    return rows


def run_simulate(run_config: config.RunConfig, logger: logging.Logger,
                 metrics_collector: Optional[MetricsCollector] = None):
    spec = run_config.dgp_spec()
    logger.info(f'Simulating {run_config.replicates} replicates of the {spec.regime.value} regime with n={spec.n}',
                extra={'n': spec.n})
    report = run_experiment(
        spec,
        run_config.forward_search_config(),
        replicates=run_config.replicates,
        psi_probes=run_config.probes,
        master_seed=run_config.seed,
        quantiles=run_config.quantiles,
        level=run_config.level,
        threads=run_config.threads,
    )
    if report.failures:
        logger.warning(f'{report.failures} of {report.replicates} replicates failed')
    if metrics_collector:
        metrics_collector.record_replicates(report.replicates, report.failures)
    return report


def main(run_config: config.RunConfig, logger: Optional[logging.Logger] = None,
         metrics_collector: Optional[MetricsCollector] = None) -> int:
    """Run one command and write its output.

    Args:
        run_config: Settings of the command.
        logger: Logger instance for logging messages. If None, uses the module logger.
        metrics_collector: Optional metrics collector for observability.

    Returns:
        Exit code: 0 success, 2 malformed input, 3 numeric failure, 4 parameter out of range.
    """
    if logger is None:
        logger = logging.getLogger(__name__)

    if metrics_collector:
        metrics_collector.start_run(run_config.command)

    exit_code = EXIT_OK
    logger.info(f'Running {run_config.command}', extra={'command': run_config.command})
    try:
        if run_config.command == 'simulate':
            report = run_simulate(run_config, logger, metrics_collector)
            if run_config.format == 'json':
                dataio.write_json(report.to_dict(), run_config.output)
                rows_written = len(report.probes)
            else:
                rows = report.csv_rows()
                dataio.write_table(rows, run_config.output, 'csv')
                rows_written = len(rows)
        else:
            if run_config.command == 'analyze':
                rows = run_analyze(run_config, logger, metrics_collector)
            elif run_config.command == 'bands':
                rows = run_bands(run_config, logger)
            else:
                rows = run_moments(run_config, logger)
            dataio.write_table(rows, run_config.output, run_config.format)
            rows_written = len(rows)
        if metrics_collector:
            metrics_collector.record_rows(rows_written)
    except (dataio.DataFormatError, FileNotFoundError, IsADirectoryError, PermissionError) as e:
        logger.error(f'Malformed input: {e}')
        exit_code = EXIT_INPUT
    except (RankDeficiencyError, InitializationError, LeverageOverflowError, QuadratureError) as e:
        logger.error(f'Numeric failure: {e}')
        exit_code = EXIT_NUMERIC
    except (DomainError, UnsupportedDofError) as e:
        logger.error(f'Invalid parameter: {e}')
        exit_code = EXIT_DOMAIN

    logger.info(f'{run_config.command} finished with exit code {exit_code}', extra={'command': run_config.command})
    if metrics_collector:
        metrics_collector.end_run(exit_code)
        logger.debug(f'Run metrics: {metrics_collector.get_current_metrics()}')
        metrics_collector.save_metrics()

    return exit_code


def _float_list(text: str) -> list:
    try:
        return [float(part) for part in text.split(',') if part.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f'expected comma-separated numbers, got {text!r}') from e


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='YAML or JSON configuration file')
    common.add_argument('--dist', choices=['normal', 't'], help='reference error distribution (default normal)')
    common.add_argument('--dof', type=float, help='degrees of freedom of the scaled t')
    common.add_argument('--level', type=float, help='two-sided pointwise band coverage (default 0.90)')
    common.add_argument('--format', choices=['csv', 'json'], help='output format (json lines for tables)')
    common.add_argument('--output', help='output file (default stdout)')
    common.add_argument('--log-level', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'])
    common.add_argument('--metrics-file', help='append run metrics to this JSON file')

    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument('--psi-min', type=float)
    grid.add_argument('--psi-max', type=float)
    grid.add_argument('--psi-points', type=int)

    search = argparse.ArgumentParser(add_help=False)
    search.add_argument('--m0', type=int, help='initial subset size (default int(n/2))')
    search.add_argument('--initial', choices=['lms', 'ols'], help='initial estimator (default lms)')
    search.add_argument('--lms-candidates', type=int, help='elemental subsets tried by lms (default 500)')
    search.add_argument('--seed', type=int, help='seed (default 0)')
    search.add_argument('--dof-correct', action='store_true', default=None,
                        help='divide subset variances by m - dim x')

    parser = argparse.ArgumentParser(
        prog='forward-search',
        description='Forward Search forward plots, asymptotic bands, moment tables and Monte Carlo checks.',
        epilog=COLUMNS_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    commands = parser.add_subparsers(dest='command', required=True)

    analyze = commands.add_parser('analyze', parents=[common, search], help='forward plot table of a CSV dataset',
                                  epilog=COLUMNS_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    analyze.add_argument('input', help="CSV file with a header and a response column 'y'")
    analyze.add_argument('--add-intercept', action='store_true', default=None, help='prepend a ones column')

    bands = commands.add_parser('bands', parents=[common, grid], help='asymptotic band curves',
                                epilog=COLUMNS_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    bands.add_argument('--n', type=int, help='sample size (default 128)')
    bands.add_argument('--statistic', choices=[s.value for s in BandStatistic if s is not BandStatistic.BETA_COMPONENT],
                       help='forward statistic (default z_sigma_hat)')

    simulate = commands.add_parser('simulate', parents=[common, search], help='Monte Carlo experiment',
                                   epilog=COLUMNS_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    simulate.add_argument('--n', type=int, help='sample size (default 128)')
    simulate.add_argument('--reps', dest='replicates', type=int, help='replicates (default 1000)')
    simulate.add_argument('--regime', choices=['location', 'ar1', 'trend', 'random_walk'])
    simulate.add_argument('--ar-coef', type=float)
    simulate.add_argument('--dim-x', type=int)
    simulate.add_argument('--sigma', type=float)
    simulate.add_argument('--beta', type=_float_list, help='comma-separated true coefficients')
    simulate.add_argument('--probes', type=_float_list, help='comma-separated psi probes (default 0.3,0.5,0.7,0.9)')
    simulate.add_argument('--quantiles', type=_float_list, help='comma-separated probabilities (default 0.05,0.5,0.95)')
    simulate.add_argument('--no-estimate', dest='estimate', action='store_false', default=None,
                          help='use the true beta at every step')

    commands.add_parser('moments', parents=[common, grid], help='table of c, tau, kappa, varsigma^2, rho over psi',
                        epilog=COLUMNS_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    return parser


def cli_main(argv: Optional[list] = None) -> int:
    """CLI entry point - parses flags, loads configuration and runs the command.

    Returns:
        Exit code: 0 success, 1 configuration error, 2 malformed input,
        3 numeric failure, 4 parameter out of range.
    """
    load_dotenv()
    args = build_parser().parse_args(argv)
    flags = vars(args)

    file_config = None
    if args.config:
        try:
            file_config = config.get_config(args.config)
        except (jsonschema.ValidationError, yaml.YAMLError, FileNotFoundError, PermissionError,
                IsADirectoryError) as e:
            print(f'Failed to load configuration: {e}', file=sys.stderr)
            return EXIT_CONFIG

    try:
        run_config = config.build_run_config(args.command, flags, file_config)
    except (DomainError, UnsupportedDofError) as e:
        print(f'Invalid parameter: {e}', file=sys.stderr)
        return EXIT_DOMAIN

    # Tables on stdout keep the console clean for data
    logger = setup_logging(
        log_level=run_config.log_level,
        log_format=os.getenv('LOG_FORMAT', 'standard'),
        log_file=os.getenv('LOG_FILE'),
        stream=sys.stderr if run_config.output in (None, '-') else sys.stdout
    )
    logger.debug(f'Run configuration: {run_config}')

    metrics_collector = MetricsCollector(run_config.metrics_file or os.getenv('FS_METRICS_FILE'))
    return main(run_config, logger, metrics_collector)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(cli_main())
