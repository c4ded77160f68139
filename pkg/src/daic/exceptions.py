"""Exception hierarchy.

Every error carries an ``exit_code`` so the command line can report a
category-coded status.
"""


class DaicError(Exception):
    exit_code = 1


class ParameterError(DaicError, ValueError):
    exit_code = 2


class ConfigError(DaicError, ValueError):
    exit_code = 3


class FormatError(DaicError, ValueError):
    """Input file does not follow the expected binary layout."""

    exit_code = 4


class TruncatedFileError(DaicError, OSError):
    exit_code = 4


class ConsistencyError(DaicError):
    """Two artifacts that must agree do not (counts, model identity, ...)."""

    exit_code = 5


class CapacityError(DaicError):
    """Not enough data to satisfy a request."""

    exit_code = 6


class DivergenceError(DaicError, ArithmeticError):
    exit_code = 7


class StateError(DaicError):
    exit_code = 8


class PhaseError(DaicError):
    """Wraps a failure inside one phase of an assessment cycle."""

    exit_code = 9

    def __init__(self, phase, cycle, cause):
        self.phase = phase
        self.cycle = cycle
        self.cause = cause
        super().__init__(f"cycle {cycle}, phase '{phase}': {type(cause).__name__}: {cause}")
