"""Exception hierarchy shared by all modules and mapped to CLI exit codes."""


class UddmagError(Exception):
    """Base class for library errors."""

    exit_code = 1


class DomainError(UddmagError, ValueError):
    """An argument lies outside the domain where an operation is defined."""

    exit_code = 2


class ResolutionError(DomainError):
    """A time grid is too coarse for the requested noise process or sequence."""


class RegimeError(UddmagError):
    """A formula or estimator was asked to operate outside its physical regime."""

    exit_code = 3


class ResourceError(UddmagError):
    """A request would exceed a configured resource cap."""

    exit_code = 4
