"""Exception hierarchy.

Every error raised by the package derives from :class:`CapaxError`, so the
command line can turn any of them into a machine-readable failure.
"""


class CapaxError(Exception):
    """Base class for all package errors."""


class ValidationError(CapaxError, ValueError):
    """Invalid input to a constructor or operation."""


class NotIrreducible(ValidationError):
    pass


class NegativeRate(ValidationError):
    pass


class NotStationary(ValidationError):
    pass


class SingularSystem(CapaxError, ArithmeticError):
    pass


class EmptySet(ValidationError):
    pass


class NotProperSubset(ValidationError):
    pass


class SetsIntersect(ValidationError):
    pass


class NonLocalRates(ValidationError):
    pass


class BadBoundary(ValidationError):
    pass


class ZeroAtX(ValidationError):
    pass


class ArcOutsideSupport(ValidationError):
    pass


class NotACycle(ValidationError):
    pass


class ArcMissing(ValidationError):
    pass


class InfeasibleFlow(ValidationError):
    pass


class StepCapExceeded(CapaxError, RuntimeError):
    """A simulated trajectory ran past ``max_steps`` without stopping."""


class BadLambda(ValidationError):
    pass


class UnboundedBelowY(ValidationError):
    pass


class BoxTooLarge(ValidationError):
    pass


class BoundViolated(CapaxError, AssertionError):
    """A proven inequality failed numerically beyond its slack."""


class ParseError(ValidationError):
    pass


class UnknownLabel(ValidationError, KeyError):
    pass


class ToleranceExceeded(CapaxError):
    pass
