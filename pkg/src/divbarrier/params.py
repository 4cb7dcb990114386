"""Model parameters: validation, canonical line ordering, existence condition.

The model describes two collaborating insurance lines with drifts mu_i,
volatilities sigma_i, Brownian correlation rho, discount rate delta, line
importance weights a_1 + a_2 = 1 and per-line robustness preferences
beta_tilde_i >= 0.  All downstream algebra uses the scaled preferences
beta_i = beta_tilde_i / a_i.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Any, Mapping

from .errors import ConfigError, ValidationError, WeightsError

__all__ = [
    "ModelParams",
    "validate",
    "canonicalize",
    "existence_condition",
    "params_from_config",
    "load_config",
]


@dataclass(frozen=True)
class ModelParams:
    """Validated, immutable parameter set.

    beta1/beta2 are derived (beta_tilde_i / a_i) and must not be set
    independently; use :func:`validate` or :func:`params_from_config`.
    """

    mu1: float
    mu2: float
    sigma1: float
    sigma2: float
    rho: float
    delta: float
    a1: float
    a2: float
    beta_tilde1: float
    beta_tilde2: float

    @property
    def beta1(self) -> float:
        return self.beta_tilde1 / self.a1

    @property
    def beta2(self) -> float:
        return self.beta_tilde2 / self.a2

    def as_dict(self) -> dict[str, float]:
        return {
            "mu1": self.mu1,
            "mu2": self.mu2,
            "sigma1": self.sigma1,
            "sigma2": self.sigma2,
            "rho": self.rho,
            "delta": self.delta,
            "a1": self.a1,
            "a2": self.a2,
            "beta1": self.beta1,
            "beta2": self.beta2,
        }


def validate(
    mu1: float,
    mu2: float,
    sigma1: float,
    sigma2: float,
    rho: float,
    delta: float,
    a1: float,
    a2: float,
    beta_tilde1: float,
    beta_tilde2: float,
) -> ModelParams:
    """Check every admissibility invariant and return a frozen ModelParams."""
    vals = dict(
        mu1=mu1, mu2=mu2, sigma1=sigma1, sigma2=sigma2, rho=rho,
        delta=delta, a1=a1, a2=a2,
        beta_tilde1=beta_tilde1, beta_tilde2=beta_tilde2,
    )
    for name, val in vals.items():
        if not isinstance(val, (int, float)) or isinstance(val, bool):
            raise ValidationError(f"{name} must be a real number, got {val!r}")
        if not math.isfinite(val):
            raise ValidationError(f"{name} must be finite, got {val!r}")
    if sigma1 <= 0:
        raise ValidationError("sigma1 must be > 0")
    if sigma2 <= 0:
        raise ValidationError("sigma2 must be > 0")
    if delta <= 0:
        raise ValidationError("delta must be > 0")
    if not -1.0 < rho < 1.0:
        raise ValidationError("rho out of (-1,1)")
    # regime classification divides by Sharpe ratios, so zero drifts are rejected
    if mu1 <= 0:
        raise ValidationError("mu1 must be > 0")
    if mu2 <= 0:
        raise ValidationError("mu2 must be > 0")
    if not 0.0 < a1 < 1.0:
        raise ValidationError("a1 out of (0,1)")
    if not 0.0 < a2 < 1.0:
        raise ValidationError("a2 out of (0,1)")
    if abs(a1 + a2 - 1.0) > 1e-12:
        raise WeightsError(f"a1 + a2 must equal 1 within 1e-12, got {a1 + a2!r}")
    if beta_tilde1 < 0:
        raise ValidationError("beta_tilde1 must be >= 0")
    if beta_tilde2 < 0:
        raise ValidationError("beta_tilde2 must be >= 0")
    return ModelParams(**{k: float(v) for k, v in vals.items()})


def canonicalize(params: ModelParams) -> tuple[ModelParams, bool]:
    """Relabel lines so a1 <= a2 (ties keep the original order).

    Returns (params, swapped).  rho is invariant under the relabeling.
    Reporting layers are responsible for un-swapping outputs.
    """
    if params.a1 <= params.a2:
        return params, False
    swapped = replace(
        params,
        mu1=params.mu2, mu2=params.mu1,
        sigma1=params.sigma2, sigma2=params.sigma1,
        a1=params.a2, a2=params.a1,
        beta_tilde1=params.beta_tilde2, beta_tilde2=params.beta_tilde1,
    )
    return swapped, True


def existence_condition(params: ModelParams) -> bool:
    """True iff delta < mu1^2/(2 beta1 sigma1^2) + mu2^2/(2 beta2 sigma2^2).

    A zero beta makes its term infinite, so the condition holds whenever
    either line carries no robustness preference.
    """
    if params.beta_tilde1 == 0.0 or params.beta_tilde2 == 0.0:
        return True
    rhs = (params.mu1 ** 2 / (2.0 * params.beta1 * params.sigma1 ** 2)
           + params.mu2 ** 2 / (2.0 * params.beta2 * params.sigma2 ** 2))
    return params.delta < rhs


_CONFIG_KEYS = ("mu1", "mu2", "sigma1", "sigma2", "rho", "delta",
                "a1", "a2", "beta1", "beta2")


def params_from_config(doc: Mapping[str, Any]) -> ModelParams:
    """Build ModelParams from a config mapping.

    Keys: mu1, mu2, sigma1, sigma2, rho, delta, a1, a2, beta1, beta2
    (a2 optional, defaults to 1 - a1).  The config carries the scaled
    preferences beta_i as printed in the reference tables; the stored
    beta_tilde_i are back-derived as a_i * beta_i.
    """
    unknown = set(doc) - set(_CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    missing = [k for k in _CONFIG_KEYS if k not in doc and k != "a2"]
    if missing:
        raise ConfigError(f"missing config keys: {missing}")
    vals = {k: doc[k] for k in _CONFIG_KEYS if k in doc}
    for k, v in vals.items():
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise ConfigError(f"config key {k} must be a number, got {v!r}")
    a1 = float(vals["a1"])
    a2 = float(vals.get("a2", 1.0 - a1))
    beta1 = float(vals["beta1"])
    beta2 = float(vals["beta2"])
    if beta1 < 0 or beta2 < 0:
        raise ValidationError("beta must be >= 0")
    return validate(
        mu1=float(vals["mu1"]), mu2=float(vals["mu2"]),
        sigma1=float(vals["sigma1"]), sigma2=float(vals["sigma2"]),
        rho=float(vals["rho"]), delta=float(vals["delta"]),
        a1=a1, a2=a2,
        beta_tilde1=a1 * beta1, beta_tilde2=a2 * beta2,
    )


def load_config(path: str) -> ModelParams:
    """Read a JSON config file and validate it."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    if isinstance(doc.get("params"), dict):
        # a solution document round-trips: its params block is the config
        doc = doc["params"]
    return params_from_config(doc)
