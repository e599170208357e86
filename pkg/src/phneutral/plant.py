"""Mixer-tank dynamics: invariant mass balances, valve actuators, sensors.

The tank is perfectly mixed, so the state is the invariant pair plus the
two actual stream flows. Mass balances for the non-reacting invariants:

    V d(alpha)/dt = F1*C1 - (F1 + F2)*alpha
    V d(beta)/dt  = F2*C2 - (F1 + F2)*beta

with F1 the acid stream and F2 the base stream. The equations are linear
in (alpha, beta) for fixed flows; a fixed-step classical Runge-Kutta
update is plenty (the stiffness of the problem lives entirely in the
algebraic pH map, not here).

Valves are modelled as first-order lags with direction-dependent time
constants and a small direction-dependent steady-state mismatch
(hysteresis): an opening valve settles slightly under its command, a
closing valve slightly above it. Measured up/down characteristic error
bands of real control valves sit in the 2-6% range; the default mismatch
fraction is 0.04.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .chemistry import DEFAULT_CONSTANTS, EquilibriumConstants, IonInvariants, ph_of


class StateDiverged(Exception):
    """A plant state field became non-finite (time step too large)."""


@dataclass(frozen=True)
class PlantParams:
    """Tank volume, feed concentrations and the per-stream flow ceiling."""

    volume: float = 0.5            # L
    c1: float = 0.052              # acid feed, mol/L
    c2: float = 0.052              # base feed, mol/L
    f_max: float = 0.05            # per-stream maximum flow, L/s
    constants: EquilibriumConstants = field(default_factory=EquilibriumConstants)

    def __post_init__(self) -> None:
        if not self.volume > 0:
            raise ValueError("volume must be positive")
        if self.c1 < 0 or self.c2 < 0:
            raise ValueError("feed concentrations must be non-negative")
        if not self.f_max > 0:
            raise ValueError("f_max must be positive")


@dataclass(frozen=True)
class ValveModel:
    """First-order valve lag with asymmetric response and hysteresis.

    tau_open applies while flow is rising, tau_close while falling.
    hysteresis_eps is the fractional steady-state mismatch between the
    two stroke directions (0 to 0.06).
    """

    tau_open: float = 8.0
    tau_close: float = 5.0
    hysteresis_eps: float = 0.04

    def __post_init__(self) -> None:
        if not (self.tau_open > 0 and self.tau_close > 0):
            raise ValueError("valve time constants must be positive")
        if not 0.0 <= self.hysteresis_eps <= 0.06:
            raise ValueError("hysteresis_eps must lie in [0, 0.06]")


@dataclass(frozen=True)
class PlantState:
    """Tank invariants, actual stream flows and simulation time."""

    inv: IonInvariants
    f1_actual: float
    f2_actual: float
    t: float


@dataclass(frozen=True)
class SensorReadings:
    """One sample of every transmitter on the plant."""

    ph: float
    f1: float
    f2: float
    c1_meas: float
    c2_meas: float


def invariant_derivatives(state: PlantState, params: PlantParams) -> tuple[float, float]:
    """(d alpha/dt, d beta/dt) for the current flows, mol/(L*s)."""
    f1, f2 = state.f1_actual, state.f2_actual
    total = f1 + f2
    d_alpha = (f1 * params.c1 - total * state.inv.alpha) / params.volume
    d_beta = (f2 * params.c2 - total * state.inv.beta) / params.volume
    return d_alpha, d_beta


def valve_step(
    current: float,
    commanded: float,
    model: ValveModel,
    dt: float,
    f_max: float = math.inf,
) -> float:
    """Advance a valve flow one step toward its command.

    The lag target is commanded*(1 - eps) when a command calls for more
    flow and commanded*(1 + eps) (clamped to [0, f_max]) when it calls
    for less, so repeated approaches from opposite directions settle
    ~2*eps apart. The update itself is the exact discrete solution of the
    first-order lag; the output therefore always lies between the current
    flow and the target.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if commanded == current:
        return current
    if commanded > current:
        target = commanded * (1.0 - model.hysteresis_eps)
        tau = model.tau_open
    else:
        target = commanded * (1.0 + model.hysteresis_eps)
        tau = model.tau_close
    target = min(max(target, 0.0), f_max)
    return target + (current - target) * math.exp(-dt / tau)


def plant_step(
    state: PlantState,
    f1_cmd: float,
    f2_cmd: float,
    params: PlantParams,
    valves: tuple[ValveModel, ValveModel],
    dt: float,
) -> PlantState:
    """One fixed step: move valves, then integrate the invariants (RK4).

    Flows are held at their post-step values during the invariant update.
    Raises StateDiverged if anything goes non-finite.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    f1_cmd = min(max(f1_cmd, 0.0), params.f_max)
    f2_cmd = min(max(f2_cmd, 0.0), params.f_max)
    f1 = valve_step(state.f1_actual, f1_cmd, valves[0], dt, params.f_max)
    f2 = valve_step(state.f2_actual, f2_cmd, valves[1], dt, params.f_max)

    total = f1 + f2
    v = params.volume

    def deriv(a: float, b: float) -> tuple[float, float]:
        return (f1 * params.c1 - total * a) / v, (f2 * params.c2 - total * b) / v

    a0, b0 = state.inv.alpha, state.inv.beta
    k1a, k1b = deriv(a0, b0)
    k2a, k2b = deriv(a0 + 0.5 * dt * k1a, b0 + 0.5 * dt * k1b)
    k3a, k3b = deriv(a0 + 0.5 * dt * k2a, b0 + 0.5 * dt * k2b)
    k4a, k4b = deriv(a0 + dt * k3a, b0 + dt * k3b)
    a1 = a0 + dt * (k1a + 2.0 * k2a + 2.0 * k3a + k4a) / 6.0
    b1 = b0 + dt * (k1b + 2.0 * k2b + 2.0 * k3b + k4b) / 6.0

    if not (math.isfinite(a1) and math.isfinite(b1) and math.isfinite(f1) and math.isfinite(f2)):
        raise StateDiverged(f"non-finite state after step at t={state.t}")
    # Flows and feeds are non-negative, so the exact solution never goes
    # below zero; anything past integrator tolerance is a bug.
    assert a1 >= -1e-15 and b1 >= -1e-15
    return PlantState(
        inv=IonInvariants(max(a1, 0.0), max(b1, 0.0)),
        f1_actual=f1,
        f2_actual=f2,
        t=state.t + dt,
    )


def measure(
    state: PlantState,
    params: PlantParams,
    noise_sigma_ph: float = 0.0,
    rng: np.random.Generator | None = None,
) -> SensorReadings:
    """Read every sensor. Noise-free by default; optional Gaussian pH noise."""
    ph = ph_of(state.inv, params.constants)
    if noise_sigma_ph > 0.0:
        if rng is None:
            raise ValueError("rng required when noise is enabled")
        ph += noise_sigma_ph * rng.standard_normal()
    ph = min(max(ph, 0.0), 14.0)
    return SensorReadings(
        ph=ph,
        f1=state.f1_actual,
        f2=state.f2_actual,
        c1_meas=params.c1,
        c2_meas=params.c2,
    )
