"""Discrete PID for stream flow, plus closed-loop ultimate-gain tuning.

The update is positional with three standard industrial refinements:

* derivative acts on the measurement (not the error) through a first
  order filter, so setpoint steps produce no derivative kick;
* the accumulated integral is applied before it is advanced, which makes
  the output jump at a setpoint step exactly kp * (setpoint change);
* anti-windup by conditional integration: while the output sits on a
  limit, error of the sign that would deepen saturation is not
  accumulated, and the stored integral is kept inside the actuator span.

Tuning follows the closed-loop ultimate-gain recipe: raise a P-only gain
until the loop oscillation neither grows nor decays, read off the gain G
and period P, then

    kind   kp      ki          kd
    P      0.5 G   -           -
    PI     0.45 G  1.2 kp / P  -
    PID    0.6 G   2 kp / P    kp P / 8
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional


class NoOscillation(Exception):
    """Gain sweep exhausted without sustained oscillation (overdamped loop)."""


@dataclass(frozen=True)
class ZnUltimate:
    """Ultimate proportional gain and the oscillation period it produces."""

    g: float
    p: float

    def __post_init__(self) -> None:
        if not (self.g > 0 and self.p > 0):
            raise ValueError("ultimate gain and period must be positive")


@dataclass(frozen=True)
class PidGains:
    kp: float
    ki: float
    kd: float

    def __post_init__(self) -> None:
        if self.kp < 0 or self.ki < 0 or self.kd < 0:
            raise ValueError("gains must be non-negative")


@dataclass(frozen=True)
class PidState:
    """Controller memory: integral, last measurement, filtered derivative."""

    out_lo: float
    out_hi: float
    integral: float = 0.0
    prev_meas: Optional[float] = None
    d_filter_tau: float = 1.0
    d_state: float = 0.0

    def __post_init__(self) -> None:
        if not self.out_lo < self.out_hi:
            raise ValueError("out_lo must be below out_hi")


def zn_tune(u: ZnUltimate, kind: str = "PID") -> PidGains:
    """Gains from the ultimate gain/period per the closed-loop table."""
    if kind == "P":
        return PidGains(0.5 * u.g, 0.0, 0.0)
    if kind == "PI":
        kp = 0.45 * u.g
        return PidGains(kp, 1.2 * kp / u.p, 0.0)
    if kind == "PID":
        kp = 0.6 * u.g
        return PidGains(kp, 2.0 * kp / u.p, kp * u.p / 8.0)
    raise ValueError(f"unknown controller kind {kind!r}")


def pid_update(
    s: PidState,
    gains: PidGains,
    setpoint: float,
    measurement: float,
    dt: float,
) -> tuple[float, PidState]:
    """One controller step; returns (clamped output, advanced state)."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    e = setpoint - measurement

    # Filtered derivative of the measurement; first call has no history.
    raw = 0.0 if s.prev_meas is None else (measurement - s.prev_meas) / dt
    alpha = dt / (s.d_filter_tau + dt)
    d_state = s.d_state + alpha * (raw - s.d_state)
    d_term = -d_state

    u = gains.kp * e + gains.ki * s.integral + gains.kd * d_term
    out = min(max(u, s.out_lo), s.out_hi)

    # Conditional integration: hold while pushing further into a limit.
    deepening = (out >= s.out_hi and e > 0.0) or (out <= s.out_lo and e < 0.0)
    integral = s.integral if (u != out and deepening) else s.integral + e * dt
    if gains.ki > 0.0:
        integral = min(max(integral, s.out_lo / gains.ki), s.out_hi / gains.ki)

    return out, replace(s, integral=integral, prev_meas=measurement, d_state=d_state)


@dataclass(frozen=True)
class ProbeResult:
    """Outcome of one P-only closed-loop run at a fixed gain."""

    trend: str                     # "growing" | "steady" | "decaying"
    period: Optional[float] = None # s, None when no oscillation was seen

    @property
    def sustained(self) -> bool:
        return self.trend in ("growing", "steady")


Probe = Callable[[float], ProbeResult]


def find_ultimate(
    probe: Probe,
    g0: float = 1.0,
    g_max: float = 256.0,
    resolution: float = 0.05,
) -> ZnUltimate:
    """Smallest gain sustaining oscillation, found by doubling + bisection.

    The probe runs a P-only loop at the requested gain and classifies the
    oscillation envelope. The bracket [decaying, sustained] is tightened
    until its relative width is below `resolution`; the estimate is the
    bracket midpoint and the period is measured on the sustained side.
    """
    lo: Optional[float] = None
    hi: Optional[float] = None
    hi_result: Optional[ProbeResult] = None

    g = g0
    while g <= g_max:
        r = probe(g)
        if r.sustained:
            hi, hi_result = g, r
            break
        lo = g
        g *= 2.0
    if hi is None:
        raise NoOscillation(f"no sustained oscillation up to gain {g_max}")

    if lo is None:
        # First probe already oscillated; walk down to find a stable gain.
        g = hi / 2.0
        for _ in range(20):
            r = probe(g)
            if not r.sustained:
                lo = g
                break
            hi, hi_result = g, r
            g /= 2.0
        if lo is None:
            raise NoOscillation(f"loop oscillates at every gain down to {g}")

    while (hi - lo) / hi > resolution:
        mid = 0.5 * (lo + hi)
        r = probe(mid)
        if r.sustained:
            hi, hi_result = mid, r
        else:
            lo = mid

    assert hi_result is not None
    if hi_result.period is None:
        raise NoOscillation("sustained trend reported without a measurable period")
    return ZnUltimate(g=0.5 * (lo + hi), p=hi_result.period)


def first_order_delay_probe(
    tau: float,
    delay: float,
    gain: float = 1.0,
    dt: float = 0.01,
    duration: float = 600.0,
    y0: float = 1.0,
) -> Probe:
    """Probe around a first-order-plus-dead-time process.

    Simulates y' = (gain*u(t - delay) - y)/tau under u = -g*y from the
    initial offset y0, then classifies the envelope of |y| and measures
    the oscillation period from zero crossings.
    """
    n = int(round(duration / dt))
    n_delay = int(round(delay / dt))

    def probe(g: float) -> ProbeResult:
        y = y0
        buf = [0.0] * max(n_delay, 1)
        peaks: list[tuple[float, float]] = []   # (time, |extremum|)
        crossings: list[float] = []
        prev_y = y
        extremum = abs(y)
        for i in range(n):
            u_delayed = buf[i % n_delay] if n_delay > 0 else -g * y
            y += dt * (gain * u_delayed - y) / tau
            if n_delay > 0:
                buf[i % n_delay] = -g * y
            t = (i + 1) * dt
            if prev_y == 0.0 or (prev_y > 0.0) != (y > 0.0):
                crossings.append(t)
                peaks.append((t, extremum))
                extremum = 0.0
            extremum = max(extremum, abs(y))
            prev_y = y

        if len(peaks) < 6:
            return ProbeResult(trend="decaying", period=None)
        amps = [a for _, a in peaks[2:]]        # drop the startup transient
        half = len(amps) // 2
        early = sum(amps[:half]) / half
        late = sum(amps[half:]) / (len(amps) - half)
        if early <= 0.0 or late <= 0.0:
            return ProbeResult(trend="decaying", period=None)
        gaps = [b - a for a, b in zip(crossings[2:], crossings[3:])]
        period = 2.0 * sum(gaps) / len(gaps) if gaps else None
        ratio = late / early
        if ratio > 1.05:
            return ProbeResult(trend="growing", period=period)
        if ratio < 0.95:
            return ProbeResult(trend="decaying", period=period)
        return ProbeResult(trend="steady", period=period)

    return probe


def reference_flow_loop(g_target: float = 18.0, p_target: float = 33.0) -> tuple[float, float]:
    """(tau, delay) of the first-order-plus-dead-time loop whose analytic
    ultimate gain and period equal the requested targets."""
    omega = 2.0 * math.pi / p_target
    tau = math.sqrt(g_target * g_target - 1.0) / omega
    delay = (math.pi - math.atan(omega * tau)) / omega
    return tau, delay
