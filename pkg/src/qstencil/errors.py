"""Exception types raised across the package."""


class MicroKernelError(Exception):
    """Base class for all package errors."""


class ValidationError(MicroKernelError, ValueError):
    """Malformed input: bad index, mismatched lengths, zero shots."""


class ResourceError(MicroKernelError):
    """A circuit exceeds the configured qubit cap."""


class DomainError(MicroKernelError, ValueError):
    """A probability-like value lies outside [0, 1] beyond tolerance."""


class RangeError(MicroKernelError, ValueError):
    """Field values left the normalization window."""

    def __init__(self, message, nodes=()):
        super().__init__(message)
        self.nodes = tuple(nodes)


class StabilityError(MicroKernelError, ValueError):
    """A CFL-type time-step condition is violated."""


class MitigationError(MicroKernelError):
    """Readout mitigation impossible (singular confusion matrix)."""


class DegenerateError(MicroKernelError, ValueError):
    """Input carries no mass to sample from."""
