"""Config parsing, task dispatch, trace files and the command line."""

from .config import ConfigError, ExperimentConfig, ParseError, ValidationError, parse_config
from .runner import RunReport, run
from .trace import emit_trace, read_trace

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ParseError",
    "RunReport",
    "ValidationError",
    "emit_trace",
    "parse_config",
    "read_trace",
    "run",
]
