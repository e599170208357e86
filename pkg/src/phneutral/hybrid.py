"""Cascade control: fuzzy pH supervisor over per-stream PID flow loops.

The outer loop runs every `fuzzy_period` seconds: the pH error is mapped
by the fuzzy controller to a correction delta in [-100, 100], which
nudges the base/acid flow split r (base fraction of a constant total
flow). The inner loops run every plant step: one PID per stream drives
its control valve to hold the measured flow at the split setpoint.

The split increment is scheduled by the remaining reagent distance.
Near neutrality a strong-acid/strong-base mixture needs absurdly fine
flow-ratio resolution (the titration curve is near-vertical there:
holding pH 7 +- 0.1 means holding the base excess to ~1e-7 mol/L), while
far from neutrality the same pH tolerance spans thousands of times more
reagent. A fixed increment therefore either limit-cycles violently at
the neutral plateau or crawls everywhere else. The supervisor instead
inverts its own titration model twice per update -- the split whose
steady state sits at the setpoint, and the split consistent with the
measured pH -- and moves a bounded fraction of the gap per second:

    rate = clamp(approach_rate * |split(setpoint) - split(measured pH)|,
                 min_rate, full scale)

Both the fuzzy delta and the gap collapse together at the target, so the
approach decelerates smoothly instead of overshooting across the steep
equivalence region; the small floor keeps the last stretch exponential
rather than quadratic so residual offsets are worked off promptly, yet
is sized so one update moves the split by less than the width of the
tightest tolerance band. The cap is the fixed full-scale value used by
`split_from_delta` as its default.

A supervisor-only variant applies the flow setpoints straight to the
valves with no inner correction, for controller comparisons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .chemistry import DEFAULT_CONSTANTS, EquilibriumConstants, IonInvariants, ph_of
from .fuzzy import FuzzyController
from .pid import PidGains, PidState, pid_update
from .plant import SensorReadings

FULL_SCALE_SPLIT_RATE = 0.02   # fraction of full split per second at delta=100


def tuned_flow_gains() -> PidGains:
    """Flow-loop PID gains from the tuned ultimate point (G=18, P=33)."""
    return PidGains(kp=10.8, ki=2.0 * 10.8 / 33.0, kd=10.8 * 33.0 / 8.0)


@dataclass(frozen=True)
class CascadeConfig:
    """Outer/inner loop wiring for one simulation run."""

    fuzzy_period: float = 1.0            # s between supervisor updates
    f_total: float = 0.05                # constant total flow, L/s
    f_max: float = 0.05                  # per-stream command ceiling, L/s
    gains: PidGains = field(default_factory=tuned_flow_gains)
    controller_kind: str = "hybrid"      # "hybrid" | "fuzzy_only"
    approach_rate: float = 0.08          # fraction of the split gap closed per s
    min_rate: float = 1.0e-6             # split-rate floor near the target, 1/s
    d_filter_tau: float = 2.0            # derivative filter for the flow PIDs, s

    def __post_init__(self) -> None:
        if not self.fuzzy_period > 0:
            raise ValueError("fuzzy_period must be positive")
        if not 0.0 < self.f_total <= 2.0 * self.f_max:
            raise ValueError("f_total must lie in (0, 2*f_max]")
        if self.controller_kind not in ("hybrid", "fuzzy_only"):
            raise ValueError(f"unknown controller_kind {self.controller_kind!r}")
        if not self.approach_rate > 0:
            raise ValueError("approach_rate must be positive")
        if not 0.0 <= self.min_rate <= FULL_SCALE_SPLIT_RATE:
            raise ValueError("min_rate must lie in [0, full scale]")


@dataclass(frozen=True)
class ControllerState:
    """Everything the cascade remembers between steps."""

    fuzzy: FuzzyController
    pid_acid: PidState
    pid_base: PidState
    split: float                        # base fraction r in [0, 1]
    last_fuzzy_t: float = -math.inf
    t: float = 0.0
    last_delta: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.split <= 1.0:
            raise ValueError("split must lie in [0, 1]")


def initial_controller_state(
    cfg: CascadeConfig,
    split: float,
    fuzzy: FuzzyController | None = None,
    command_bias: float = 1.0,
) -> ControllerState:
    """Controller state pre-positioned at an operating split.

    The PID integrals are preloaded so the loops start bumplessly with
    their outputs already at the current flow setpoints. `command_bias`
    scales the preloaded command; starting it at 1/(1 - hysteresis_eps)
    parks the valves on their opening characteristic, which is the stable
    operating point the loop would otherwise have to trim its way into.
    """
    fuzzy = fuzzy if fuzzy is not None else FuzzyController()
    ki = cfg.gains.ki
    acid_cmd = command_bias * (1.0 - split) * cfg.f_total / cfg.f_max
    base_cmd = command_bias * split * cfg.f_total / cfg.f_max
    pid_acid = PidState(out_lo=0.0, out_hi=1.0, d_filter_tau=cfg.d_filter_tau,
                        integral=acid_cmd / ki if ki > 0 else 0.0)
    pid_base = PidState(out_lo=0.0, out_hi=1.0, d_filter_tau=cfg.d_filter_tau,
                        integral=base_cmd / ki if ki > 0 else 0.0)
    return ControllerState(fuzzy=fuzzy, pid_acid=pid_acid, pid_base=pid_base, split=split)


def split_for_ph(
    ph_target: float,
    c1: float,
    c2: float,
    constants: EquilibriumConstants = DEFAULT_CONSTANTS,
) -> float:
    """Base-flow fraction whose mixing steady state sits at ph_target.

    At split r the tank settles at alpha = c1*(1-r), beta = c2*r, and the
    resulting pH is increasing in r; bisection inverts that map. Targets
    outside the achievable pH range clamp to the nearest endpoint.
    """
    def ph_at(r: float) -> float:
        return ph_of(IonInvariants(c1 * (1.0 - r), c2 * r), constants)

    lo, hi = 0.0, 1.0
    if ph_target <= ph_at(lo):
        return lo
    if ph_target >= ph_at(hi):
        return hi
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if ph_at(mid) < ph_target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def split_from_delta(
    r: float,
    delta: float,
    fuzzy_period: float,
    rate: float = FULL_SCALE_SPLIT_RATE,
) -> float:
    """Integrate a fuzzy correction into a new base-flow fraction."""
    if not 0.0 <= r <= 1.0:
        raise ValueError("split fraction must lie in [0, 1]")
    return min(max(r + (delta / 100.0) * rate * fuzzy_period, 0.0), 1.0)


def _scheduled_rate(
    cfg: CascadeConfig,
    ph_setpoint: float,
    readings: SensorReadings,
    split: float,
    delta: float,
) -> float:
    """Split rate for the current update, capped at full scale.

    Proportional to the reagent gap between where the loop is and where
    the setpoint needs it to be, measured in split-fraction units via the
    supervisor's titration model. While the correction moves the split
    toward the model equilibrium for the setpoint, one update may not step
    past it; the tank then approaches the target monotonically instead of
    riding an overshoot back across the steep equivalence region.
    Corrections beyond the model point (driven by residual error from
    actuator mismatch) are not capped, which preserves integral action.
    """
    r_sp = split_for_ph(ph_setpoint, readings.c1_meas, readings.c2_meas)
    r_now = split_for_ph(readings.ph, readings.c1_meas, readings.c2_meas)
    rate = min(max(cfg.approach_rate * abs(r_sp - r_now), cfg.min_rate), FULL_SCALE_SPLIT_RATE)
    gap_cmd = r_sp - split
    if delta * gap_cmd > 0.0:
        no_overstep = abs(gap_cmd) / ((abs(delta) / 100.0) * cfg.fuzzy_period)
        rate = min(rate, no_overstep)
    return rate


def _outer_update(
    cs: ControllerState,
    cfg: CascadeConfig,
    ph_setpoint: float,
    readings: SensorReadings,
) -> ControllerState:
    if cs.t - cs.last_fuzzy_t < cfg.fuzzy_period - 1e-9:
        return cs
    e = ph_setpoint - readings.ph
    delta = cs.fuzzy.controller_output(e)
    rate = _scheduled_rate(cfg, ph_setpoint, readings, cs.split, delta)
    split = split_from_delta(cs.split, delta, cfg.fuzzy_period, rate=rate)
    return replace(cs, split=split, last_fuzzy_t=cs.t, last_delta=delta)


def control_step(
    cs: ControllerState,
    cfg: CascadeConfig,
    ph_setpoint: float,
    readings: SensorReadings,
    dt: float,
) -> tuple[float, float, ControllerState]:
    """Hybrid step: fuzzy split update plus PID valve commands.

    Returns (acid command, base command, advanced state); commands are
    confined to [0, f_max]. The flow setpoints always sum to f_total.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    cs = _outer_update(cs, cfg, ph_setpoint, readings)
    f1_sp = (1.0 - cs.split) * cfg.f_total
    f2_sp = cs.split * cfg.f_total
    # Inner loops work in normalized flow so the dimensionless gains apply.
    out1, pid_acid = pid_update(cs.pid_acid, cfg.gains, f1_sp / cfg.f_max,
                                readings.f1 / cfg.f_max, dt)
    out2, pid_base = pid_update(cs.pid_base, cfg.gains, f2_sp / cfg.f_max,
                                readings.f2 / cfg.f_max, dt)
    cs = replace(cs, pid_acid=pid_acid, pid_base=pid_base, t=cs.t + dt)
    return out1 * cfg.f_max, out2 * cfg.f_max, cs


def fuzzy_only_step(
    cs: ControllerState,
    cfg: CascadeConfig,
    ph_setpoint: float,
    readings: SensorReadings,
    dt: float,
) -> tuple[float, float, ControllerState]:
    """Supervisor-only step: flow setpoints go straight to the valves."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    cs = _outer_update(cs, cfg, ph_setpoint, readings)
    f1_cmd = min((1.0 - cs.split) * cfg.f_total, cfg.f_max)
    f2_cmd = min(cs.split * cfg.f_total, cfg.f_max)
    cs = replace(cs, t=cs.t + dt)
    return f1_cmd, f2_cmd, cs
