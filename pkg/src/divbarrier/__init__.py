"""Closed-form optimal dividend, reinsurance, and transfer strategies for
two collaborating insurance lines under model ambiguity."""

from .closed_form import (ClosedFormSolution, Regime, StrategyPoint,
                          Thresholds, benchmark_no_uncertainty, classify,
                          solve, strategy)
from .errors import (BranchError, ClassificationError, ConfigError,
                     DivBarrierError, HypothesisError, NumericalError,
                     SignError, ValidationError, WeightsError)
from .params import (ModelParams, canonicalize, existence_condition,
                     load_config, params_from_config, validate)
from .psi import PsiPoly, PsiVariant, build_psi, find_gamma1

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "ModelParams", "validate", "canonicalize", "existence_condition",
    "params_from_config", "load_config",
    "PsiPoly", "PsiVariant", "build_psi", "find_gamma1",
    "Regime", "Thresholds", "StrategyPoint", "ClosedFormSolution",
    "solve", "classify", "strategy", "benchmark_no_uncertainty",
    "DivBarrierError", "ValidationError", "WeightsError", "ConfigError",
    "NumericalError", "SignError", "BranchError", "ClassificationError",
    "HypothesisError",
]
