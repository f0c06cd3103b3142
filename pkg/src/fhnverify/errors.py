"""Exception types shared across the package."""


class FhnVerifyError(Exception):
    """Base class for all package errors."""


class IntervalError(FhnVerifyError):
    pass


class Overflow(IntervalError):
    """An operation produced a non-finite bound."""


class DivisionByZeroInterval(IntervalError):
    """Denominator interval contains zero."""


class EmptyIntersection(IntervalError):
    """Intersection of disjoint intervals was requested."""


class DimensionMismatch(IntervalError):
    pass


class SingularEnclosure(FhnVerifyError):
    """Every pivot choice in interval elimination contains zero."""


class ComplexOrDegenerate(FhnVerifyError):
    """Eigenvalue discriminant enclosure touches zero."""


class NewtonDiverged(FhnVerifyError):
    pass


class RoughEnclosureFailed(FhnVerifyError):
    """A-priori enclosure could not be validated at the requested step."""


class StepRejected(FhnVerifyError):
    pass


class MaxStepsExceeded(FhnVerifyError):
    pass


class TransversalityLost(FhnVerifyError):
    """Section crossing with <n, f> enclosure containing zero."""


class NoCrossing(FhnVerifyError):
    pass


class CannotFit(FhnVerifyError):
    """Covered-set construction impossible from the given image data."""


class BisectionBracketFailed(FhnVerifyError):
    pass


class ContinuationStalled(FhnVerifyError):
    """Parameter increment underflowed without a successful step."""
