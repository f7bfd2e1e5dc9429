"""
Utility functions and helpers for qmunu.

This package contains:
- exceptions: Custom exception classes
- constants: Constants used throughout the library
- config: Configuration management
- file_ops: JSON and CSV output
- plotting: Deterministic SVG figures
- rng: Reproducible random streams
- text_utils: Command-line value parsing
"""

# Exceptions
from .exceptions import (
    CapacityError,
    ConfigError,
    ConfigurationError,
    ContourInfeasible,
    ConvergenceError,
    DivergenceError,
    DomainError,
    IllConditionedError,
    PoleError,
    PoleProximityError,
    QmunuError,
    RangeError,
    ScheduleError,
    TailBoundError,
    TailTruncationWarning,
    TruncationError,
)

# Constants
from .constants import (
    DEFAULT_STATE_CAP,
    DEFAULT_TOL,
    EXIT_INTERRUPTED,
    EXIT_PASS,
    EXIT_TOLERANCE_FAILURE,
    EXIT_USAGE_ERROR,
)

# Configuration
from .config import RunConfig, apply_overrides, load_config

# File operations
from .file_ops import read_csv_rows, to_jsonable, write_csv_file, write_json_file

# Random streams
from .rng import RngStream

# Text utilities
from .text_utils import parse_int_list, parse_number, parse_number_list

__all__ = [
    # Exceptions
    "QmunuError",
    "ConfigurationError",
    "DomainError",
    "RangeError",
    "DivergenceError",
    "PoleError",
    "PoleProximityError",
    "ScheduleError",
    "CapacityError",
    "TailBoundError",
    "ContourInfeasible",
    "ConvergenceError",
    "ConfigError",
    "TruncationError",
    "IllConditionedError",
    "TailTruncationWarning",
    # Constants
    "DEFAULT_TOL",
    "DEFAULT_STATE_CAP",
    "EXIT_PASS",
    "EXIT_TOLERANCE_FAILURE",
    "EXIT_USAGE_ERROR",
    "EXIT_INTERRUPTED",
    # Configuration
    "RunConfig",
    "load_config",
    "apply_overrides",
    # File operations
    "to_jsonable",
    "write_json_file",
    "write_csv_file",
    "read_csv_rows",
    # Random streams
    "RngStream",
    # Text utilities
    "parse_int_list",
    "parse_number",
    "parse_number_list",
]
