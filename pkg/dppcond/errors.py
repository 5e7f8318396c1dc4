"""Exception hierarchy shared by every dppcond module.

Each family maps onto a CLI exit code: configuration, parse, IO and kernel
validation problems exit with 2, numerical breakdowns with 3.
"""

from __future__ import annotations


class DppError(Exception):
    """Root of every error raised by dppcond."""

    exit_code = 2


# Configuration and argument errors

class ConfigError(DppError):
    pass


class ParseError(ConfigError):
    pass


class DimensionMismatch(ConfigError, ValueError):
    pass


class IndexOutOfRange(ConfigError, IndexError):
    pass


class InvalidGroundSet(ConfigError, ValueError):
    pass


class DuplicatePoint(ConfigError, ValueError):
    pass


class SupportViolation(ConfigError, ValueError):
    """A test vector has mass where it must vanish."""


class WindowsOverlap(ConfigError, ValueError):
    pass


class NotNested(ConfigError, ValueError):
    pass


class ExhaustionNotNested(NotNested):
    pass


class InvalidProjection(ConfigError, ValueError):
    pass


class RangeNotDisjoint(ConfigError, ValueError):
    pass


class NotAProjection(ConfigError, ValueError):
    pass


class TooLarge(ConfigError):
    pass


class IoFailure(DppError, OSError):
    pass


# Kernel and probability errors

class KernelError(DppError, ValueError):
    pass


class NotHermitian(KernelError):
    pass


class SpectrumOutOfRange(KernelError):
    pass


class SquareRootFailure(KernelError):
    pass


class NotContractive(KernelError):
    pass


class ZeroGapProbability(KernelError):
    pass


class DegenerateKernel(KernelError):
    pass


class ZeroProbabilityCondition(KernelError):
    pass


class ZeroCorrelation(KernelError):
    pass


# Numerical breakdowns

class NumericalBreakdown(DppError, ArithmeticError):
    exit_code = 3


class NotADistribution(NumericalBreakdown):
    pass
