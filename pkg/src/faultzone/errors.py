"""Exception hierarchy. Each class carries the process exit code used by the CLI."""


class FaultZoneError(Exception):
    exit_code = 1


class ConfigError(FaultZoneError, ValueError):
    """Invalid configuration, geometry or argument values."""
    exit_code = 2


class DataError(FaultZoneError, ValueError):
    """Missing cases, malformed files, dimension mismatches."""
    exit_code = 3


class NumericalError(FaultZoneError, ArithmeticError):
    """Singular matrices, non-finite simulation state."""
    exit_code = 4


class ConvergenceError(FaultZoneError, RuntimeError):
    """SMO exhausted its iteration budget."""
    exit_code = 5
