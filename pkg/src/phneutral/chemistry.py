"""Equilibrium chemistry of a sulfuric-acid / sodium-hydroxide mixture.

The mixture state is carried by two reaction invariants:

    alpha = [H2SO4] + [HSO4-] + [SO4--]     (total sulfate, mol/L)
    beta  = [Na+]                            (total sodium, mol/L)

These are unchanged by the fast acid-base equilibria, so the dynamics of a
stirred tank stay linear in (alpha, beta) while all the nonlinearity lives
in the algebraic map from invariants to pH.

That map comes from electroneutrality,

    [Na+] + [H+] = [OH-] + [HSO4-] + 2[SO4--],

combined with the dissociation equilibria

    K1 = [H+][HSO4-]/[H2SO4],  K2 = [H+][SO4--]/[HSO4-],  Kw = [H+][OH-].

Clearing denominators turns the charge balance into a monic quartic in
h = [H+]:

    h^4 + a1 h^3 + a2 h^2 + a3 h + a4 = 0
    a1 = K1 + beta
    a2 = beta K1 + K1 K2 - Kw - K1 alpha
    a3 = beta K1 K2 - K1 Kw - 2 K1 K2 alpha
    a4 = -K1 K2 Kw

Because a4 < 0 and the quartic tends to +inf, a positive real root always
exists; the charge-balance residual is strictly increasing in h, so that
root is unique and bracketed bisection finds it robustly even though the
coefficients span ~16 orders of magnitude (closed-form quartic solvers do
not survive that).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence


class NoRoot(Exception):
    """No sign change of the quartic inside the search bracket.

    Never happens for physically sensible constants; signals corrupted
    configuration (e.g. a negative equilibrium constant sneaking through).
    """


@dataclass(frozen=True)
class EquilibriumConstants:
    """Dissociation constants (mol/L convention, 25 degC)."""

    k1: float = 1.0e3
    k2: float = 1.2e-2
    kw: float = 1.0e-14

    def __post_init__(self) -> None:
        if not (self.k1 > 0 and self.k2 > 0 and self.kw > 0):
            raise ValueError(f"equilibrium constants must be positive: {self}")


DEFAULT_CONSTANTS = EquilibriumConstants()


@dataclass(frozen=True)
class IonInvariants:
    """Reaction-invariant pair (total sulfate, total sodium), mol/L."""

    alpha: float
    beta: float

    def __post_init__(self) -> None:
        # A negative invariant means an integrator bug upstream; reject
        # loudly rather than clamp.
        if not (self.alpha >= 0.0 and self.beta >= 0.0):
            raise ValueError(f"invariants must be non-negative: {self}")


@dataclass(frozen=True)
class QuarticCoeffs:
    """Coefficients of the monic hydrogen-ion quartic."""

    a1: float
    a2: float
    a3: float
    a4: float


@dataclass(frozen=True)
class Speciation:
    """Individual species concentrations at a given [H+], mol/L."""

    h2so4: float
    hso4: float
    so4: float
    na: float
    h: float
    oh: float


def quartic_coeffs(inv: IonInvariants, k: EquilibriumConstants = DEFAULT_CONSTANTS) -> QuarticCoeffs:
    """Coefficients a1..a4 of the hydrogen-ion quartic for given invariants."""
    a1 = k.k1 + inv.beta
    a2 = inv.beta * k.k1 + k.k1 * k.k2 - k.kw - k.k1 * inv.alpha
    a3 = inv.beta * k.k1 * k.k2 - k.k1 * k.kw - 2.0 * k.k1 * k.k2 * inv.alpha
    a4 = -k.k1 * k.k2 * k.kw
    assert a4 < 0.0
    return QuarticCoeffs(a1, a2, a3, a4)


def quartic_value(c: QuarticCoeffs, h: float) -> float:
    """Evaluate the monic quartic at h (Horner form)."""
    return (((h + c.a1) * h + c.a2) * h + c.a3) * h + c.a4


_LOG_H_LO = -16.0
_LOG_H_HI = 2.0
_REL_TOL = 1e-12


def hydrogen_ion(inv: IonInvariants, k: EquilibriumConstants = DEFAULT_CONSTANTS) -> float:
    """Unique positive root of the hydrogen-ion quartic, mol/L.

    Bisection on log10(h) over [1e-16, 1e2], refined until the bracket is
    tighter than 1e-12 relative. Raises NoRoot if the bracket endpoints do
    not straddle a sign change.
    """
    c = quartic_coeffs(inv, k)
    lo, hi = _LOG_H_LO, _LOG_H_HI
    f_lo = quartic_value(c, 10.0 ** lo)
    f_hi = quartic_value(c, 10.0 ** hi)
    if f_lo == 0.0:
        return 10.0 ** lo
    if f_hi == 0.0:
        return 10.0 ** hi
    if (f_lo < 0.0) == (f_hi < 0.0):
        raise NoRoot(f"no sign change of quartic on [1e-16, 1e2] for {inv}, {k}")
    # Each halving shrinks the log-bracket; 64 steps drive the relative
    # width of the h-bracket below 1e-12 with margin.
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        f_mid = quartic_value(c, 10.0 ** mid)
        if f_mid == 0.0:
            return 10.0 ** mid
        if (f_mid < 0.0) == (f_lo < 0.0):
            lo = mid
        else:
            hi = mid
        if (hi - lo) * math.log(10.0) <= _REL_TOL:
            break
    return 10.0 ** (0.5 * (lo + hi))


def ph_of(inv: IonInvariants, k: EquilibriumConstants = DEFAULT_CONSTANTS) -> float:
    """pH = -log10 of the hydrogen-ion concentration."""
    return -math.log10(hydrogen_ion(inv, k))


def speciation(inv: IonInvariants, k: EquilibriumConstants, h: float) -> Speciation:
    """Species concentrations for invariants at a prescribed [H+] > 0."""
    if not h > 0.0:
        raise ValueError(f"h must be positive, got {h}")
    den = h * h + k.k1 * h + k.k1 * k.k2
    hso4 = inv.alpha * k.k1 * h / den
    h2so4 = hso4 * h / k.k1
    so4 = hso4 * k.k2 / h
    return Speciation(h2so4=h2so4, hso4=hso4, so4=so4, na=inv.beta, h=h, oh=k.kw / h)


def charge_balance_residual(inv: IonInvariants, k: EquilibriumConstants, h: float) -> float:
    """Positive minus negative charge at [H+] = h; zero at the physical root.

    Strictly increasing in h: values above the root are positive, below
    are negative, which makes this the natural bisection oracle.
    """
    s = speciation(inv, k, h)
    return (s.na + s.h) - (s.oh + s.hso4 + 2.0 * s.so4)


def titration_curve(
    alpha_fixed: float,
    beta_values: Sequence[float] | Iterable[float],
    k: EquilibriumConstants = DEFAULT_CONSTANTS,
) -> list[tuple[float, float]]:
    """pH versus total sodium at fixed total sulfate.

    `beta_values` must be non-empty, non-negative and ascending; the
    returned pH sequence is then ascending as well (more base, higher pH).
    """
    betas = list(beta_values)
    if not betas:
        raise ValueError("beta_values must be non-empty")
    prev = None
    for b in betas:
        if b < 0.0 or (prev is not None and b < prev):
            raise ValueError("beta_values must be non-negative and ascending")
        prev = b
    return [(b, ph_of(IonInvariants(alpha_fixed, b), k)) for b in betas]
