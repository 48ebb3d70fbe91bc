"""Exception hierarchy shared by all modules.

Every error raised on purpose by the library derives from ``WeakMomentError``.
The CLI maps the three branches below to its exit codes.
"""


class WeakMomentError(Exception):
    """Base class."""


class ConfigError(WeakMomentError, ValueError):
    """Invalid run configuration (CLI exit code 2)."""


class NumericalError(WeakMomentError, ArithmeticError):
    """A numerical procedure failed to reach its target (exit code 3)."""


class DomainError(WeakMomentError, ValueError):
    """Inputs outside the mathematical domain of an operation (exit code 4)."""


# numerical failures
class NonConvergence(NumericalError):
    pass


class ZeroCrossing(NumericalError):
    """The characteristic function came too close to zero for a logarithm."""


class BranchAmbiguity(ZeroCrossing):
    """Argument jump between grid points too large to unwrap reliably."""


class EnvelopeSearchFailed(NumericalError):
    pass


class NoBracket(NumericalError):
    pass


# domain failures
class InvalidInterval(DomainError):
    pass


class UnsupportedOrder(DomainError):
    pass


class ParameterOutOfDomain(DomainError):
    pass


class ZeroNormalisation(DomainError):
    pass


class KernelNotGaussian(DomainError):
    pass


class KernelNotPositive(DomainError):
    pass


class OrderTooLarge(DomainError):
    pass


class NotSPD(DomainError):
    pass


class NonPositiveVariance(DomainError):
    pass


class NotADensity(DomainError):
    pass


class NonPositiveLambda(DomainError):
    pass


class EmptySample(DomainError):
    pass


class OutOfRange(DomainError):
    pass
