from .dataio import (
    DataFormatError,
    is_valid_input,
    read_dataset,
    write_json,
    write_table
    )

__all__ = [
    'DataFormatError',
    'is_valid_input',
    'read_dataset',
    'write_json',
    'write_table'
    ]
