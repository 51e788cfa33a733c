"""Exception hierarchy. The CLI maps these onto exit codes."""


class ToricQuantError(Exception):
    pass


class PreconditionError(ToricQuantError, ValueError):
    """Input violates a documented precondition (domain, convexity, sizes)."""


class ContractError(ToricQuantError, ValueError):
    """Two objects that must agree (convention tags, frames, flavors) do not."""


class ConfigError(ToricQuantError, ValueError):
    pass


class NumericalFailure(ToricQuantError, ArithmeticError):
    """A solver or quadrature did not reach its tolerance."""

    def __init__(self, message, **context):
        super().__init__(message)
        self.context = context


class OverflowRisk(NumericalFailure):
    pass


class PositivityError(NumericalFailure):
    """A curvature positivity certificate failed; ``suggested`` carries a passing value."""

    def __init__(self, message, suggested=None, **context):
        super().__init__(message, suggested=suggested, **context)
        self.suggested = suggested
