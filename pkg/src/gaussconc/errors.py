"""Exception hierarchy shared across the package."""


class GaussConcError(Exception):
    """Base class for all package errors."""


class ExpressionSyntaxError(GaussConcError):
    """Raised by the parser; carries the character offset of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class EvaluationDomainError(GaussConcError):
    """A sub-expression was evaluated outside its domain (log of a
    non-positive number, division by zero, ...)."""

    def __init__(self, message: str, subexpression: str, point=None):
        detail = f"{message} in sub-expression '{subexpression}'"
        if point is not None:
            detail += f" at point {point}"
        super().__init__(detail)
        self.subexpression = subexpression
        self.point = point


class NonFiniteValueError(GaussConcError):
    """An integrand produced inf/nan at a sampled or quadrature point."""

    def __init__(self, message: str, point=None):
        if point is not None:
            message += f" at point {point}"
        super().__init__(message)
        self.point = point


class MgfOverflowError(GaussConcError):
    """exp(lambda * f) left the double range for some sample."""

    def __init__(self, lam: float, sample: float):
        super().__init__(
            f"exp overflow: lambda={lam!r} with sample deviation {sample!r} "
            f"exceeds the exp(700) ceiling"
        )
        self.lam = lam
        self.sample = sample


class EvalBudgetError(GaussConcError):
    """A nested estimator would exceed its configured evaluation budget."""

    def __init__(self, needed: int, budget: int):
        super().__init__(
            f"nested estimate needs {needed} innermost evaluations, "
            f"budget is {budget}; lower the quadrature orders or switch "
            f"to the monte_carlo strategy"
        )
        self.needed = needed
        self.budget = budget


class AntiderivativeMismatchError(GaussConcError):
    """f' does not reproduce sigma on the sampled points."""

    def __init__(self, worst_point, deviation: float, tolerance: float):
        super().__init__(
            f"antiderivative check failed: |f' - sigma| = {deviation:.3e} "
            f"> {tolerance:.1e} at point {worst_point}"
        )
        self.worst_point = worst_point
        self.deviation = deviation


class SigmaInvariantError(GaussConcError):
    """The supplied sigma violates positivity/boundedness/monotonicity."""
