"""Run metrics collection and persistence."""

import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, Optional

logger = logging.getLogger(__name__)

HISTORY_LIMIT = 100


class MetricsCollector:
    """Collects and persists the metrics of one CLI run."""

    def __init__(self, metrics_file: Optional[str] = None):
        """Initialize metrics collector.

        Args:
            metrics_file: Path of the JSON history file; None keeps metrics in memory only.
        """
        self.metrics_file = Path(metrics_file) if metrics_file else None

        self.current_run = {
            'command': None,
            'start_time': None,
            'end_time': None,
            'duration_seconds': None,
            'exit_code': None,
            'steps_computed': 0,
            'replicates_total': 0,
            'replicates_succeeded': 0,
            'replicates_failed': 0,
            'rows_written': 0,
        }

    def start_run(self, command: Optional[str] = None) -> None:
        """Mark the start of a run."""
        self.current_run['command'] = command
        self.current_run['start_time'] = datetime.now(timezone.utc).isoformat()

    def end_run(self, exit_code: int) -> None:
        """Mark the end of a run.

        Args:
            exit_code: Exit code of the run.
        """
        end_time = datetime.now(timezone.utc)
        self.current_run['end_time'] = end_time.isoformat()
        self.current_run['exit_code'] = exit_code

        if self.current_run['start_time']:
            start_time = datetime.fromisoformat(self.current_run['start_time'])
            duration = (end_time - start_time).total_seconds()
            self.current_run['duration_seconds'] = round(duration, 2)

    def record_steps(self, steps: int) -> None:
        self.current_run['steps_computed'] += steps

    def record_replicates(self, total: int, failed: int) -> None:
        self.current_run['replicates_total'] += total
        self.current_run['replicates_succeeded'] += total - failed
        self.current_run['replicates_failed'] += failed

    def record_rows(self, rows: int) -> None:
        self.current_run['rows_written'] += rows

    def save_metrics(self) -> None:
        """Append the current run to the history file; failures are logged, never raised."""
        if self.metrics_file is None:
            return
        try:
            self.metrics_file.parent.mkdir(parents=True, exist_ok=True)

            historical_metrics = self._load_historical_metrics()
            historical_metrics['runs'].append(self.current_run)
            self._update_summary(historical_metrics)

            with open(self.metrics_file, 'w') as f:
                json.dump(historical_metrics, f, indent=2)
        except (OSError, IOError, PermissionError) as e:
            logger.warning(f'Failed to save metrics: {e}')
            logger.info('Metrics are optional and will not be persisted this run')

    def _load_historical_metrics(self) -> Dict:
        """Load existing metrics or initialize new structure."""
        existing = self.load_latest_metrics(str(self.metrics_file))
        if existing is not None:
            return existing

        return {
            'last_updated': None,
            'summary': {
                'total_runs': 0,
                'successful_runs': 0,
                'failed_runs': 0,
                'total_replicates': 0,
                'total_replicates_failed': 0,
            },
            'runs': []
        }

    def _update_summary(self, metrics: Dict) -> None:
        """Update summary statistics.

        Args:
            metrics: Metrics dictionary to update.
        """
        metrics['last_updated'] = datetime.now(timezone.utc).isoformat()

        summary = metrics['summary']
        summary['total_runs'] += 1
        if self.current_run['exit_code'] == 0:
            summary['successful_runs'] += 1
        else:
            summary['failed_runs'] += 1
        summary['total_replicates'] += self.current_run['replicates_total']
        summary['total_replicates_failed'] += self.current_run['replicates_failed']

        if len(metrics['runs']) > HISTORY_LIMIT:
            metrics['runs'] = metrics['runs'][-HISTORY_LIMIT:]

    def get_current_metrics(self) -> Dict:
        """Get current run metrics.

        Returns:
            Dictionary of current metrics.
        """
        return self.current_run.copy()

    @staticmethod
    def load_latest_metrics(metrics_file: str) -> Optional[Dict]:
        """Load the metrics history from file.

        Args:
            metrics_file: Path to metrics file.

        Returns:
            Metrics dictionary or None if the file doesn't exist or is unreadable.
        """
        path = Path(metrics_file)
        if not path.exists():
            return None

        try:
            with open(path, 'r') as f:
                return json.load(f)
        except (json.JSONDecodeError, IOError):
            return None
