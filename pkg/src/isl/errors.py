"""Exception hierarchy shared by all modules.

Validation failures (bad input, violated data conditions) derive from
:class:`ValidationError`; failures of the numerics themselves derive from
:class:`NumericalError`. The CLI maps the two families to distinct exit codes.
"""


class IslError(Exception):
    """Base class for every error raised by the package."""


class ValidationError(IslError):
    pass


class NumericalError(IslError):
    pass


class FormatError(ValidationError):
    pass


class NonRealError(ValidationError):
    pass


class IndexNonzero(ValidationError):
    pass


class SingularSystem(NumericalError):
    pass


class TailTooLarge(NumericalError):
    pass


class UnderResolvedContour(NumericalError):
    pass


class BoundaryZero(NumericalError):
    pass


class CountMismatch(NumericalError):
    pass


class StepSizeError(NumericalError):
    pass


class ZeroJost(NumericalError):
    pass


class DivisionSingularity(NumericalError):
    pass


class CrossCheckFailure(NumericalError):
    pass


class MatchingSingularity(NumericalError):
    pass


class BranchJump(NumericalError):
    pass


class BudgetExhausted(NumericalError):
    """Raised only when a caller asks for strict budget handling."""
