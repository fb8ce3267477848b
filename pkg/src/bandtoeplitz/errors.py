"""Exception hierarchy.

Validation errors describe bad input (exit code 1 on the command line);
numerical errors describe a computation that could not be completed to the
requested accuracy (exit code 2).
"""

from __future__ import annotations


class ToeplitzError(Exception):
    """Base class for every error raised by the package."""


class ValidationError(ToeplitzError, ValueError):
    """Input violates a documented precondition."""


class NumericalError(ToeplitzError, ArithmeticError):
    """A numerical procedure failed or lost its accuracy guarantee."""


class ExtremeCoefficientZero(ValidationError):
    pass


class GcdViolation(ValidationError):
    pass


class DegenerateRange(ValidationError):
    pass


class ZeroArgument(ValidationError):
    pass


class IndexOutOfRange(ValidationError):
    pass


class AdmissibilityViolation(ValidationError):
    pass


class RootSolverFailure(NumericalError):
    pass


class OnCurve(NumericalError):
    pass


class DegenerateRoots(NumericalError):
    pass


# singular spelling kept as an alias
DegenerateRoot = DegenerateRoots


class SeedingFailure(NumericalError):
    pass


class RefinementFailure(NumericalError):
    pass


class AmbiguousMatching(NumericalError):
    pass


class NearSingularity(NumericalError):
    pass


class NegativeDensity(NumericalError):
    pass


class MassMismatch(NumericalError):
    pass


class SupportCollision(NumericalError):
    pass


class InterpolationConditioning(NumericalError):
    pass


class ProbeOnCurve(NumericalError):
    pass


__all__ = [name for name in dir() if name[0].isupper()]
