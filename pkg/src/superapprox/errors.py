"""Exception types shared across the package."""

from __future__ import annotations


class ModulusMismatch(ValueError):
    """Operands live over different rings or have different dimensions."""


class NotInvertible(ArithmeticError):
    """Determinant is not a unit modulo p."""


class NotSpecialLinear(ValueError):
    """Determinant is not 1 where SL_n membership is required."""


class GroupTooLarge(RuntimeError):
    """Enumeration exceeded the configured element cap."""

    def __init__(self, cap: int, reached: int):
        super().__init__(f"group enumeration exceeded cap {cap} (reached {reached})")
        self.cap = cap
        self.reached = reached


class TableMismatch(ValueError):
    """Subsets or measures attached to different group tables."""


class NotSymmetric(ValueError):
    """A measure or set that must be inverse-closed is not."""


class MaxIterations(RuntimeError):
    """Iterative eigen-solver stopped before reaching tolerance.

    The best available estimate is kept on ``report``.
    """

    def __init__(self, report):
        super().__init__(
            f"no convergence after {report.iterations} iterations "
            f"(lambda~{report.lam:.9f}, residual {report.residual:.3e})"
        )
        self.report = report


class Unsupported(ValueError):
    """Operation not available for this input size or ring."""


class HypothesisFailed(ValueError):
    """Input does not satisfy the hypothesis of a regularization statement."""

    def __init__(self, message: str, required: float | None = None, achieved: float | None = None):
        super().__init__(message)
        self.required = required
        self.achieved = achieved


class PostconditionFailed(AssertionError):
    """A guaranteed output property was violated (a bug, or a counterexample)."""


class SearchBudgetExceeded(RuntimeError):
    def __init__(self, tested: int):
        super().__init__(f"search budget exhausted after {tested} candidate points")
        self.tested = tested
