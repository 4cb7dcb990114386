"""Exception hierarchy shared across the package."""


class DivBarrierError(Exception):
    """Base class for all package errors."""


class ValidationError(DivBarrierError):
    """A parameter violates its admissibility invariant."""


class WeightsError(ValidationError):
    """Line importance weights do not sum to one."""


class ConfigError(DivBarrierError):
    """A configuration document is malformed."""


class NumericalError(DivBarrierError):
    """A numerical routine failed to converge or bracket."""


class SignError(DivBarrierError):
    """A quantity required positive came out nonpositive (misclassification)."""


class BranchError(DivBarrierError):
    """An evaluator was called on a regime branch that does not define it."""


class ClassificationError(DivBarrierError):
    """Regime fixed-point check contradicted itself; both sides reported."""


class HypothesisError(DivBarrierError):
    """Closed-form branch hypothesis (Sharpe-ratio sandwich) does not hold."""
