"""Exception hierarchy shared by all modules."""


class PucciLabError(Exception):
    """Base class for every error raised by the package."""


class EmptyInterior(PucciLabError):
    pass


class NonFinite(PucciLabError):
    pass


class EmptyMask(PucciLabError):
    pass


class OutsideDomain(PucciLabError):
    pass


class SpecError(PucciLabError, ValueError):
    """Invalid operator, domain or solver parameters."""


class HypothesisViolation(PucciLabError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class H1Violation(HypothesisViolation):
    pass


class H2Violation(HypothesisViolation):
    pass


class H5Violation(HypothesisViolation):
    pass


class ComparisonViolation(PucciLabError):
    def __init__(self, message, node=None, violation=None):
        super().__init__(message)
        self.node = node
        self.violation = violation


class Diverged(PucciLabError):
    pass


class NotPositive(PucciLabError):
    pass


class NoConvergence(PucciLabError):
    pass


class BracketInvalid(PucciLabError):
    pass


class NotMonotone(PucciLabError):
    pass


class InsufficientNodes(PucciLabError):
    pass


class NonPositive(PucciLabError):
    pass


class ConfigError(PucciLabError):
    pass


class ReplayMismatch(PucciLabError):
    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field
