from .config import (
    COMMANDS,
    RunConfig,
    build_run_config,
    get_config
    )

__all__ = [
    'COMMANDS',
    'RunConfig',
    'build_run_config',
    'get_config'
    ]
