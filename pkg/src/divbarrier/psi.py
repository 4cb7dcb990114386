"""Quartic characteristic polynomial psi(z) and its roots in (0,1).

The region-1 exponent gamma_1 of the value function solves psi(z) = 0 on
(0,1), where psi = A(z) - 2 delta sigma1^2 sigma2^2 B(z).  The General
variant covers the interior regime; Line1Ceded / Line2Ceded cover the
full-cession regimes (one line reinsures everything away).

Assembly uses the basis {z^4, z^3(z-1), (z-1)^4, z(z-1)^3, z^2(z-1)^2},
in which both A and B are naturally expressed, then converts to monomial
coefficients c0..c4.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .params import ModelParams

__all__ = ["PsiVariant", "PsiPoly", "build_psi", "find_gamma1"]


class PsiVariant(enum.Enum):
    General = "General"
    Line1Ceded = "Line1Ceded"
    Line2Ceded = "Line2Ceded"


# basis polynomials as ascending monomial rows: h(z) = sum coeffs[k] z^k
_BASIS = np.array([
    [0.0, 0.0, 0.0, 0.0, 1.0],    # z^4
    [0.0, 0.0, 0.0, -1.0, 1.0],   # z^3 (z-1)
    [1.0, -4.0, 6.0, -4.0, 1.0],  # (z-1)^4
    [0.0, -1.0, 3.0, -3.0, 1.0],  # z (z-1)^3
    [0.0, 0.0, 1.0, -2.0, 1.0],   # z^2 (z-1)^2
])


@dataclass(frozen=True)
class PsiPoly:
    """Monomial coefficients c0..c4 (ascending) of psi for one variant."""

    coeffs: tuple[float, float, float, float, float]
    variant: PsiVariant

    @property
    def scale(self) -> float:
        return max(abs(c) for c in self.coeffs)

    def __call__(self, z):
        c = self.coeffs
        return (((c[4] * z + c[3]) * z + c[2]) * z + c[1]) * z + c[0]

    def at_zero(self) -> float:
        return self.coeffs[0]

    def at_one(self) -> float:
        return float(sum(self.coeffs))


def _a_general(mu1, mu2, s1, s2, rho, b1, b2):
    """A-part basis coefficients (z^4, z^3(z-1), (z-1)^4, z(z-1)^3, z^2(z-1)^2)."""
    m1s, m2s = mu1 ** 2 * s2 ** 2, mu2 ** 2 * s1 ** 2
    cross = mu1 * mu2 * s1 * s2
    return (
        b1 * b2 ** 2 * m1s + b1 ** 2 * b2 * m2s,
        -b2 * m1s * (2.0 * b1 + b2) - b1 * m2s * (b1 + 2.0 * b2) + 2.0 * b1 * b2 * cross,
        0.0,
        (m1s + m2s) * (3.0 * rho + 1.0) * (rho - 1.0)
        + 2.0 * cross * (1.0 - rho) * (2.0 * rho ** 2 + rho + 1.0),
        m1s * (b1 - 3.0 * rho ** 2 * b2 + 2.0 * rho * b2 + 2.0 * b2)
        + m2s * (b2 - 3.0 * rho ** 2 * b1 + 2.0 * rho * b1 + 2.0 * b1)
        - 2.0 * cross * (b1 + b2),
    )


def _a_line1_ceded(mu1, mu2, s1, s2, rho, b1, b2):
    m1s, m2s = mu1 ** 2 * s2 ** 2, mu2 ** 2 * s1 ** 2
    cross = mu1 * mu2 * s1 * s2
    return (
        b1 ** 2 * b2 * m2s,
        -m2s * (b1 ** 2 + 2.0 * b1 * b2),
        0.0,
        rho ** 2 * m1s + m2s * (2.0 * rho ** 2 - 1.0) - 2.0 * rho ** 3 * cross,
        m2s * (2.0 * b1 + b2 - 2.0 * rho ** 2 * b1) - rho ** 2 * b2 * m1s,
    )


def _b_common(rho, b1, b2):
    r2 = 1.0 - rho ** 2
    return (
        b1 ** 2 * b2 ** 2,
        -2.0 * b1 * b2 * (b1 + b2),
        r2 ** 2,
        -2.0 * r2 * (b1 + b2),
        (b1 + b2) ** 2 + 2.0 * r2 * b1 * b2,
    )


def build_psi(params: ModelParams, variant: PsiVariant) -> PsiPoly:
    """Assemble psi = A - 2 delta sigma1^2 sigma2^2 B in monomial form."""
    args = (params.mu1, params.mu2, params.sigma1, params.sigma2, params.rho,
            params.beta1, params.beta2)
    if variant is PsiVariant.General:
        a = _a_general(*args)
    elif variant is PsiVariant.Line1Ceded:
        a = _a_line1_ceded(*args)
    else:
        # index swap 1 <-> 2, rho unchanged
        a = _a_line1_ceded(params.mu2, params.mu1, params.sigma2, params.sigma1,
                           params.rho, params.beta2, params.beta1)
    b = _b_common(params.rho, params.beta1, params.beta2)
    lead = 2.0 * params.delta * params.sigma1 ** 2 * params.sigma2 ** 2
    basis_coeffs = np.array(a) - lead * np.array(b)
    mono = basis_coeffs @ _BASIS
    return PsiPoly(coeffs=tuple(float(c) for c in mono), variant=variant)


_SCAN_POINTS = 4096
_REFINE_CAP = 200


def _bisect(f, lo, hi, flo) -> float:
    for _ in range(_REFINE_CAP):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0 or hi - lo <= 1e-16:
            return mid
        if math.isnan(fm):
            raise NumericalError("psi evaluation produced NaN during bisection")
        if (fm > 0.0) == (flo > 0.0):
            lo, flo = mid, fm
        else:
            hi = mid
    if hi - lo > 1e-13:
        raise NumericalError(
            f"root refinement did not converge in {_REFINE_CAP} bisection steps")
    return 0.5 * (lo + hi)


def _deflate_at_one(coeffs):
    """Synthetic division of sum(c_k z^k) by (z - 1)."""
    c = list(coeffs)
    out = [0.0] * (len(c) - 1)
    acc = c[-1]
    for k in range(len(c) - 2, -1, -1):
        out[k] = acc
        acc = c[k] + acc
    return out  # remainder acc == psi(1), already verified small


def _poly_eval(coeffs, z):
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc * z + c
    return acc


def find_gamma1(params: ModelParams, variant: PsiVariant) -> list[float]:
    """All roots of psi strictly inside (0,1), ascending.

    Sign-change scan on a 4096-point grid plus bisection; a companion-matrix
    pass catches roots the scan cannot see (even multiplicity, near-tangency).
    When psi(1) vanishes against the coefficient scale the (z-1) factor is
    deflated first so z=1 never leaks into the root list.
    """
    poly = build_psi(params, variant)
    scale = poly.scale
    if scale == 0.0:
        return []
    coeffs = list(poly.coeffs)
    while len(coeffs) > 1 and abs(_poly_eval(coeffs, 1.0)) <= 1e-12 * scale:
        coeffs = _deflate_at_one(coeffs)
    f = lambda z: _poly_eval(coeffs, z)

    roots: list[float] = []
    zs = np.linspace(0.0, 1.0, _SCAN_POINTS + 1)[1:-1]
    vals = np.array([f(z) for z in zs]) if len(coeffs) < 3 else None
    if vals is None:
        # vectorized Horner for speed
        vals = np.zeros_like(zs)
        for c in reversed(coeffs):
            vals = vals * zs + c
    prev_z, prev_v = zs[0], vals[0]
    if prev_v == 0.0:
        roots.append(float(prev_z))
    for z, v in zip(zs[1:], vals[1:]):
        if v == 0.0:
            roots.append(float(z))
        elif (v > 0.0) != (prev_v > 0.0):
            roots.append(_bisect(f, float(prev_z), float(z), float(prev_v)))
        prev_z, prev_v = z, v

    # companion-matrix fallback / cross-check for roots the scan missed
    trimmed = np.trim_zeros(np.asarray(coeffs, dtype=float), trim="b")
    if trimmed.size >= 2:
        for r in np.roots(trimmed[::-1]):
            if abs(r.imag) > 1e-9:
                continue
            x = float(r.real)
            if not 1e-12 < x < 1.0 - 1e-12:
                continue
            if abs(f(x)) > 1e-10 * scale:
                continue
            if all(abs(x - known) > 1e-9 for known in roots):
                roots.append(x)

    roots = [r for r in roots if 0.0 < r < 1.0 and abs(poly(r)) <= 1e-10 * scale]
    # final polish so |psi(root)| <= 1e-12 * scale even for merged candidates
    polished = []
    for r in sorted(roots):
        x = r
        for _ in range(4):
            fd = _poly_eval(_derivative(coeffs), x)
            if fd == 0.0:
                break
            step = f(x) / fd
            if abs(step) > 1e-3:
                break
            x -= step
        if 0.0 < x < 1.0 and abs(poly(x)) <= abs(poly(r)):
            r = x
        if abs(poly(r)) > 1e-12 * scale:
            # re-bisect in a tight bracket around the candidate when possible
            eps = 1e-7
            lo, hi = max(r - eps, 1e-15), min(r + eps, 1.0 - 1e-15)
            flo, fhi = f(lo), f(hi)
            if (flo > 0.0) != (fhi > 0.0):
                r = _bisect(f, lo, hi, flo)
        polished.append(r)
    return sorted(polished)


def _derivative(coeffs):
    return [k * c for k, c in enumerate(coeffs)][1:]
