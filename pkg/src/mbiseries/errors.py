"""Exception hierarchy shared by the solver modules and mapped to CLI exit codes."""


class MBIError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 5


class ConfigError(MBIError, ValueError):
    """Invalid grid, source or run configuration."""

    exit_code = 2


class SupportError(ConfigError):
    """A source or integrand reaches too close to the edge of the grid box."""


class FieldStrengthError(MBIError):
    """The Born-Infeld radicand is not positive at some nodes.

    ``nodes`` holds the offending ``(i, j, k)`` index triples.
    """

    exit_code = 4

    def __init__(self, message, nodes=()):
        super().__init__(message)
        self.nodes = [tuple(int(c) for c in n) for n in nodes]


class BoundaryTruncationError(MBIError):
    """Too much of a projector integrand sits next to the box boundary."""

    def __init__(self, message, ratio):
        super().__init__(message)
        self.ratio = ratio


class NumericalError(MBIError):
    """Non-finite values or a failed internal consistency check."""


class UncertifiedError(MBIError):
    """The requested beta is outside the certified convergence region."""

    exit_code = 3

    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate
