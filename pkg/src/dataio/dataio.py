import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from forward_search import Dataset
from refdist import DomainError

logger = logging.getLogger(__name__)

RESPONSE_COLUMN = 'y'
INTERCEPT_COLUMN = 'const'
FLOAT_FORMAT = '%.17g'


class DataFormatError(ValueError):
    """Raised when an input table cannot be read as numeric regression data."""

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        super().__init__(message)
        self.row = row
        self.column = column


def _validate_file(path: str) -> None:
    """Ensure that the file at the given path exists and is readable.

    Args:
        path: Path to the input file.

    Raises:
        FileNotFoundError: If the file does not exist.
        IsADirectoryError: If the path is a directory.
        PermissionError: If read permission is denied.
    """
    file_path = Path(path)
    if not file_path.exists():
        raise FileNotFoundError(f"Input file does not exist: {path}")
    if file_path.is_dir():
        raise IsADirectoryError(f"Expected a CSV file but found a directory: {path}")
    if not os.access(file_path, os.R_OK):
        raise PermissionError(f"Read permission denied for input file: {path}")


def is_valid_input(path: str) -> tuple[bool, str]:
    """Check if the input file exists and is readable.

    Returns:
        Tuple of (validity, error_message); error_message is empty if valid.
    """
    try:
        _validate_file(path)
        return True, ''
    except (FileNotFoundError, IsADirectoryError, PermissionError) as e:
        return False, str(e)


def read_dataset(path: str, add_intercept: bool = False) -> Dataset:
    """Read a regression dataset from a CSV file with a header row.

    The column named ``y`` is the response, every other column a regressor.

    Args:
        path: Path to the CSV file.
        add_intercept: Prepend a ones column named ``const``.

    Returns:
        Dataset with the regressor names as columns.

    Raises:
        DataFormatError: If the file is empty, lacks ``y``, has no regressors,
            has no more rows than regressors, or holds a missing or non-numeric
            cell (row is the file line number).
    """
    _validate_file(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError as e:
        raise DataFormatError(f"Input file is empty: {path}") from e
    except pd.errors.ParserError as e:
        raise DataFormatError(f"Input file is not valid CSV: {e}") from e

    frame.columns = [str(name).strip() for name in frame.columns]
    if RESPONSE_COLUMN not in frame.columns:
        raise DataFormatError(
            f"Input file has no response column named '{RESPONSE_COLUMN}' (columns: {', '.join(frame.columns)})",
            column=RESPONSE_COLUMN,
        )
    if frame.empty:
        raise DataFormatError(f"Input file has a header but no data rows: {path}")

    numeric = {}
    for column in frame.columns:
        stripped = frame[column].str.strip()
        values = pd.to_numeric(stripped, errors='coerce')
        bad = values.isna() | ~np.isfinite(values.to_numpy(dtype=float))
        if bad.any():
            index = int(np.flatnonzero(bad.to_numpy())[0])
            # header is line 1
            row = index + 2
            raise DataFormatError(
                f"Non-numeric value {frame[column].iloc[index]!r} in row {row}, column '{column}'",
                row=row,
                column=column,
            )
        # to_numeric's fast parser can be one ulp off the shortest repr
        numeric[column] = np.array([float(v) for v in stripped], dtype=float)

    regressors = [column for column in frame.columns if column != RESPONSE_COLUMN]
    X_columns = [numeric[column] for column in regressors]
    if add_intercept:
        X_columns.insert(0, np.ones(len(frame)))
        regressors.insert(0, INTERCEPT_COLUMN)
    if not X_columns:
        raise DataFormatError("Input file has no regressor columns; use --add-intercept for a location model")

    logger.debug(f'Read {len(frame)} rows and {len(regressors)} regressors from "{path}"')
    try:
        return Dataset(y=numeric[RESPONSE_COLUMN], X=np.column_stack(X_columns), columns=tuple(regressors))
    except DomainError as e:
        raise DataFormatError(f"Input file cannot be fitted: {e}") from e


def _json_value(value):
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.ndarray):
        return [_json_value(v) for v in value.tolist()]
    if isinstance(value, dict):
        return {k: _json_value(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_value(v) for v in value]
    return value


def _open_output(output: Optional[str]):
    if output is None or output == '-':
        return sys.stdout, False
    out_path = Path(output)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    return open(out_path, 'w', newline='', encoding='utf-8'), True


def write_table(rows: list, output: Optional[str] = None, fmt: str = 'csv') -> None:
    """Write rows of a table as CSV (17 significant digits) or JSON lines.

    Args:
        rows: Records sharing the same keys; key order fixes the column order.
        output: File path, or None / '-' for stdout.
        fmt: 'csv' or 'json'.
    """
    if fmt not in ('csv', 'json'):
        raise ValueError(f"Unknown output format: {fmt!r}")
    handle, close = _open_output(output)
    try:
        if fmt == 'csv':
            columns = list(rows[0].keys()) if rows else []
            for row in rows[1:]:
                columns.extend(key for key in row if key not in columns)
            frame = pd.DataFrame(rows, columns=columns)
            frame.to_csv(handle, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
        else:
            for row in rows:
                handle.write(json.dumps(_json_value(row)) + '\n')
    finally:
        if close:
            handle.close()
    logger.debug(f'Wrote {len(rows)} rows as {fmt} to {output or "stdout"}')


def write_json(document: dict, output: Optional[str] = None) -> None:
    """Write one JSON document; non-finite floats become null."""
    handle, close = _open_output(output)
    try:
        handle.write(json.dumps(_json_value(document), indent=2) + '\n')
    finally:
        if close:
            handle.close()
