"""Exception types shared across the package.

Everything derives from NoisyCfmmError so callers (and the CLI) can catch
input-validation failures in one place; most types also derive ValueError
because they signal bad arguments rather than internal faults.
"""

from __future__ import annotations


class NoisyCfmmError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(NoisyCfmmError, ValueError):
    """A reserve amount or price falls outside the represented level-curve domain."""


class NoSolutionError(NoisyCfmmError, ValueError):
    """No reserve point on the curve attains the requested spot price."""


class SpecViolationError(NoisyCfmmError, ValueError):
    """A privacy spec is malformed, or a trade violates its masking interval."""


class InfeasibleBiasError(NoisyCfmmError, ValueError):
    """Requested mean shift exceeds what the two-point atom span can express."""


class DistributionShapeError(NoisyCfmmError, ValueError):
    """Noise distribution does not have the shape an operation requires."""


class NonZeroMeanError(NoisyCfmmError, ValueError):
    """An operation restricted to zero-mean noise received a biased distribution."""


class MisalignedSupportError(NoisyCfmmError, ValueError):
    """Mechanism outputs for two inputs cannot be aligned atom-by-atom."""


class HiddenAccountError(NoisyCfmmError):
    """Trade rejected: the hidden account cannot support the worst-case noise."""


class OptimizationError(NoisyCfmmError):
    """The noise-design program failed to reach a usable optimum."""


class ConfigError(NoisyCfmmError, ValueError):
    """A config file or CLI argument set is malformed."""
