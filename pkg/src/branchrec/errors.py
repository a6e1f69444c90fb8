"""Exception hierarchy shared by the library and the CLI exit-code mapping."""


class BranchRecError(Exception):
    """Base class for all library errors."""

    exit_code = 4


class DomainError(BranchRecError, ValueError):
    """An argument is outside the mathematical domain of an operation."""

    exit_code = 2


class ConfigError(BranchRecError, ValueError):
    """A run configuration or input file is malformed or inconsistent."""

    exit_code = 2


class ResourceError(BranchRecError, MemoryError):
    """A dense object would exceed the configured memory budget."""

    exit_code = 3


class NumericalError(BranchRecError, RuntimeError):
    """An internal numerical procedure failed to converge or to verify."""

    exit_code = 4


class RankAmbiguityWarning(RuntimeWarning):
    """Singular values fell close enough to a rank tolerance to make the rank uncertain."""
