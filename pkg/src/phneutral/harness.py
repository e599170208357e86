"""Closed-loop experiments: schedules, configs, traces and metrics.

Three stock scenarios are provided:

1. steps 7 -> 10 -> 7 with the hybrid controller (rise/fall timing);
2. a 7 <-> 10 square wave (tracking robustness);
3. one shared 6 <-> 10 staircase run twice, hybrid vs supervisor-only.

Configs serialize to JSON with field names mirroring the dataclasses;
unknown keys are rejected. Traces serialize to CSV at 17 significant
digits so a write/read round trip is exact.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .chemistry import EquilibriumConstants, IonInvariants, ph_of
from .hybrid import CascadeConfig, control_step, fuzzy_only_step, initial_controller_state, split_for_ph
from .pid import PidGains
from .plant import PlantParams, PlantState, StateDiverged, ValveModel, measure, plant_step


class ConfigError(Exception):
    """Invalid or unparseable experiment configuration."""


class TraceFormatError(Exception):
    """Malformed trace CSV."""


class SegmentTooShort(Exception):
    """A schedule segment holds fewer than the minimum usable samples."""


# ---------------------------------------------------------------------------
# setpoint schedules


@dataclass(frozen=True)
class PiecewiseConstant:
    """Setpoint held at each value from its start time onward."""

    points: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if not self.points:
            raise ConfigError("piecewise schedule needs at least one point")
        times = [t for t, _ in self.points]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigError("schedule times must be strictly ascending")
        if any(not 0.0 <= v <= 14.0 for _, v in self.points):
            raise ConfigError("setpoints must lie in [0, 14]")

    def value(self, t: float) -> float:
        out = self.points[0][1]
        for t_start, v in self.points:
            if t >= t_start:
                out = v
            else:
                break
        return out

    def segments(self, duration: float) -> list[tuple[float, float, float]]:
        segs = []
        first_t, first_v = self.points[0]
        if first_t > 0.0:
            segs.append((0.0, min(first_t, duration), first_v))
        for i, (t_start, v) in enumerate(self.points):
            if t_start >= duration:
                break
            t_end = self.points[i + 1][0] if i + 1 < len(self.points) else duration
            segs.append((t_start, min(t_end, duration), v))
        return segs

    def to_dict(self) -> dict:
        return {"kind": "piecewise_constant", "points": [[t, v] for t, v in self.points]}


@dataclass(frozen=True)
class SquareWave:
    """Square wave starting on its low phase at t_start."""

    center: float
    amplitude: float
    period: float
    t_start: float = 0.0

    def __post_init__(self) -> None:
        if not self.period > 0:
            raise ConfigError("square wave period must be positive")
        lo, hi = self.center - self.amplitude, self.center + self.amplitude
        if not (0.0 <= lo and hi <= 14.0):
            raise ConfigError("square wave must stay within [0, 14]")

    def value(self, t: float) -> float:
        if t < self.t_start:
            return self.center - self.amplitude
        phase = (t - self.t_start) % self.period
        return self.center - self.amplitude if phase < 0.5 * self.period else self.center + self.amplitude

    def segments(self, duration: float) -> list[tuple[float, float, float]]:
        segs: list[tuple[float, float, float]] = []
        half = 0.5 * self.period
        t = 0.0
        if self.t_start > 0.0:
            t_end = min(self.t_start, duration)
            segs.append((0.0, t_end, self.center - self.amplitude))
            t = t_end
        k = 0
        while t < duration:
            t_end = min(self.t_start + (k + 1) * half, duration)
            if t_end > t:
                low = (k % 2 == 0)
                segs.append((t, t_end, self.center - self.amplitude if low else self.center + self.amplitude))
                t = t_end
            k += 1
        return segs

    def to_dict(self) -> dict:
        return {
            "kind": "square_wave",
            "center": self.center,
            "amplitude": self.amplitude,
            "period": self.period,
            "t_start": self.t_start,
        }


SetpointSchedule = PiecewiseConstant | SquareWave


def schedule_from_dict(d: Mapping) -> SetpointSchedule:
    d = dict(d)
    kind = d.pop("kind", None)
    try:
        if kind == "piecewise_constant":
            points = tuple((float(t), float(v)) for t, v in d.pop("points"))
            _reject_unknown(d, "schedule")
            return PiecewiseConstant(points)
        if kind == "square_wave":
            sched = SquareWave(
                center=float(d.pop("center")),
                amplitude=float(d.pop("amplitude")),
                period=float(d.pop("period")),
                t_start=float(d.pop("t_start", 0.0)),
            )
            _reject_unknown(d, "schedule")
            return sched
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad schedule: {exc}") from exc
    raise ConfigError(f"unknown schedule kind {kind!r}")


# ---------------------------------------------------------------------------
# experiment configuration


@dataclass(frozen=True)
class ExperimentConfig:
    plant: PlantParams
    valves: tuple[ValveModel, ValveModel]
    cascade: CascadeConfig
    schedule: SetpointSchedule
    duration: float
    dt: float = 0.1
    initial_ph: float = 7.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.duration > 0:
            raise ConfigError("duration must be positive")
        if not self.dt > 0:
            raise ConfigError("dt must be positive")

    def to_dict(self) -> dict:
        p, c = self.plant, self.cascade
        return {
            "plant": {
                "volume": p.volume,
                "c1": p.c1,
                "c2": p.c2,
                "f_max": p.f_max,
                "constants": {"k1": p.constants.k1, "k2": p.constants.k2, "kw": p.constants.kw},
            },
            "valves": [
                {"tau_open": v.tau_open, "tau_close": v.tau_close, "hysteresis_eps": v.hysteresis_eps}
                for v in self.valves
            ],
            "cascade": {
                "fuzzy_period": c.fuzzy_period,
                "f_total": c.f_total,
                "f_max": c.f_max,
                "gains": {"kp": c.gains.kp, "ki": c.gains.ki, "kd": c.gains.kd},
                "controller_kind": c.controller_kind,
                "approach_rate": c.approach_rate,
                "min_rate": c.min_rate,
                "d_filter_tau": c.d_filter_tau,
            },
            "schedule": self.schedule.to_dict(),
            "duration": self.duration,
            "dt": self.dt,
            "initial_ph": self.initial_ph,
            "seed": self.seed,
        }


def _reject_unknown(d: Mapping, where: str) -> None:
    if d:
        raise ConfigError(f"unknown keys in {where}: {sorted(d)}")


def _take(d: dict, key: str, where: str):
    try:
        return d.pop(key)
    except KeyError:
        raise ConfigError(f"missing key {key!r} in {where}") from None


def config_from_dict(raw: Mapping) -> ExperimentConfig:
    d = dict(raw)
    try:
        pd = dict(_take(d, "plant", "config"))
        kd = dict(pd.pop("constants", {}))
        constants = EquilibriumConstants(
            k1=float(kd.pop("k1", 1.0e3)),
            k2=float(kd.pop("k2", 1.2e-2)),
            kw=float(kd.pop("kw", 1.0e-14)),
        )
        _reject_unknown(kd, "plant.constants")
        plant = PlantParams(
            volume=float(_take(pd, "volume", "plant")),
            c1=float(_take(pd, "c1", "plant")),
            c2=float(_take(pd, "c2", "plant")),
            f_max=float(_take(pd, "f_max", "plant")),
            constants=constants,
        )
        _reject_unknown(pd, "plant")

        vs = _take(d, "valves", "config")
        if not isinstance(vs, Sequence) or len(vs) != 2:
            raise ConfigError("valves must be a two-element list")
        valves = []
        for v in vs:
            vd = dict(v)
            valves.append(
                ValveModel(
                    tau_open=float(_take(vd, "tau_open", "valve")),
                    tau_close=float(_take(vd, "tau_close", "valve")),
                    hysteresis_eps=float(_take(vd, "hysteresis_eps", "valve")),
                )
            )
            _reject_unknown(vd, "valve")

        cd = dict(_take(d, "cascade", "config"))
        gd = dict(_take(cd, "gains", "cascade"))
        gains = PidGains(
            kp=float(_take(gd, "kp", "gains")),
            ki=float(_take(gd, "ki", "gains")),
            kd=float(_take(gd, "kd", "gains")),
        )
        _reject_unknown(gd, "cascade.gains")
        cascade = CascadeConfig(
            fuzzy_period=float(_take(cd, "fuzzy_period", "cascade")),
            f_total=float(_take(cd, "f_total", "cascade")),
            f_max=float(_take(cd, "f_max", "cascade")),
            gains=gains,
            controller_kind=str(_take(cd, "controller_kind", "cascade")),
            approach_rate=float(_take(cd, "approach_rate", "cascade")),
            min_rate=float(cd.pop("min_rate", 1.0e-6)),
            d_filter_tau=float(cd.pop("d_filter_tau", 2.0)),
        )
        _reject_unknown(cd, "cascade")

        schedule = schedule_from_dict(_take(d, "schedule", "config"))
        cfg = ExperimentConfig(
            plant=plant,
            valves=(valves[0], valves[1]),
            cascade=cascade,
            schedule=schedule,
            duration=float(_take(d, "duration", "config")),
            dt=float(d.pop("dt", 0.1)),
            initial_ph=float(d.pop("initial_ph", 7.0)),
            seed=int(d.pop("seed", 0)),
        )
        _reject_unknown(d, "config")
        return cfg
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad config value: {exc}") from exc


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(raw)


def save_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")


# ---------------------------------------------------------------------------
# trace


_CSV_HEADER = "t,ph_sp,ph,f1_cmd,f2_cmd,f1,f2,alpha,beta,delta"
_COLUMNS = _CSV_HEADER.split(",")


@dataclass(frozen=True)
class SimTrace:
    """Column-major record of one run, uniformly sampled in time."""

    t: np.ndarray
    ph_sp: np.ndarray
    ph: np.ndarray
    f1_cmd: np.ndarray
    f2_cmd: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    delta: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    def column(self, name: str) -> np.ndarray:
        return getattr(self, name)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SimTrace):
            return NotImplemented
        return all(np.array_equal(self.column(c), other.column(c)) for c in _COLUMNS)


def write_csv(trace: SimTrace, path) -> None:
    cols = [trace.column(c) for c in _COLUMNS]
    with open(path, "w") as fh:
        fh.write(_CSV_HEADER + "\n")
        for i in range(len(trace)):
            fh.write(",".join(f"{col[i]:.17g}" for col in cols) + "\n")


def read_csv(path) -> SimTrace:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _CSV_HEADER:
        raise TraceFormatError(f"line 1: expected header {_CSV_HEADER!r}")
    data: list[list[float]] = [[] for _ in _COLUMNS]
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != len(_COLUMNS):
            raise TraceFormatError(f"line {lineno}: expected {len(_COLUMNS)} fields, got {len(parts)}")
        try:
            values = [float(p) for p in parts]
        except ValueError as exc:
            raise TraceFormatError(f"line {lineno}: {exc}") from exc
        for col, v in zip(data, values):
            col.append(v)
    return SimTrace(*(np.asarray(col, dtype=float) for col in data))


# ---------------------------------------------------------------------------
# running


def solve_initial_state(cfg: ExperimentConfig) -> tuple[IonInvariants, float]:
    """Invariants and flow split whose steady state sits at initial_ph.

    At a split r the tank settles at alpha = C1*(1-r), beta = C2*r; pH is
    increasing in r, so bisection on r inverts the titration relation.
    """
    p = cfg.plant
    ph_lo = ph_of(IonInvariants(p.c1, 0.0), p.constants)
    ph_hi = ph_of(IonInvariants(0.0, p.c2), p.constants)
    if not ph_lo <= cfg.initial_ph <= ph_hi:
        raise ConfigError(
            f"initial_ph {cfg.initial_ph} unreachable with these feeds "
            f"(achievable range [{ph_lo:.2f}, {ph_hi:.2f}])"
        )
    r = split_for_ph(cfg.initial_ph, p.c1, p.c2, p.constants)
    return IonInvariants(p.c1 * (1.0 - r), p.c2 * r), r


def run_experiment(cfg: ExperimentConfig, noise_sigma_ph: float = 0.0) -> SimTrace:
    """Deterministic closed-loop simulation of one configured scenario."""
    inv0, split0 = solve_initial_state(cfg)
    f1_0 = (1.0 - split0) * cfg.cascade.f_total
    f2_0 = split0 * cfg.cascade.f_total
    state = PlantState(inv=inv0, f1_actual=f1_0, f2_actual=f2_0, t=0.0)
    # Start the flow loops parked on the valves' opening characteristic
    # (commands a shade above the delivered flows); that is the stable
    # fixed point of PID + hysteresis, so the run begins at equilibrium.
    bias = 1.0 / (1.0 - cfg.valves[0].hysteresis_eps)
    cs = initial_controller_state(cfg.cascade, split0, command_bias=bias)
    step = control_step if cfg.cascade.controller_kind == "hybrid" else fuzzy_only_step
    rng = np.random.default_rng(cfg.seed) if noise_sigma_ph > 0.0 else None

    n = int(round(cfg.duration / cfg.dt))
    cols = {name: np.empty(n) for name in _COLUMNS}
    for i in range(n):
        t = i * cfg.dt
        sp = cfg.schedule.value(t)
        readings = measure(state, cfg.plant, noise_sigma_ph, rng)
        f1_cmd, f2_cmd, cs = step(cs, cfg.cascade, sp, readings, cfg.dt)
        cols["t"][i] = t
        cols["ph_sp"][i] = sp
        cols["ph"][i] = readings.ph
        cols["f1_cmd"][i] = f1_cmd
        cols["f2_cmd"][i] = f2_cmd
        cols["f1"][i] = state.f1_actual
        cols["f2"][i] = state.f2_actual
        cols["alpha"][i] = state.inv.alpha
        cols["beta"][i] = state.inv.beta
        cols["delta"][i] = cs.last_delta
        try:
            state = plant_step(state, f1_cmd, f2_cmd, cfg.plant, cfg.valves, cfg.dt)
        except StateDiverged as exc:
            raise StateDiverged(f"{exc} (step {i}, t={t:.3f})") from exc
    return SimTrace(**cols)


# ---------------------------------------------------------------------------
# stock experiments


def _default_valves() -> tuple[ValveModel, ValveModel]:
    return (ValveModel(), ValveModel())


def experiment_1() -> ExperimentConfig:
    """Step response: hold pH 7, step to 10 at 300 s, back to 7 at 600 s."""
    return ExperimentConfig(
        plant=PlantParams(c1=0.052, c2=0.052),
        valves=_default_valves(),
        cascade=CascadeConfig(controller_kind="hybrid"),
        schedule=PiecewiseConstant(((0.0, 7.0), (300.0, 10.0), (600.0, 7.0))),
        duration=900.0,
        initial_ph=7.0,
    )


def experiment_2() -> ExperimentConfig:
    """Tracking: 7 <-> 10 square wave, 600 s period, unbalanced feeds."""
    return ExperimentConfig(
        plant=PlantParams(c1=0.051, c2=0.0489),
        valves=_default_valves(),
        cascade=CascadeConfig(controller_kind="hybrid"),
        schedule=SquareWave(center=8.5, amplitude=1.5, period=600.0),
        duration=2400.0,
        initial_ph=7.0,
    )


def experiment_3() -> tuple[ExperimentConfig, ExperimentConfig]:
    """Comparison: one 6 <-> 10 staircase, hybrid vs supervisor-only."""
    schedule = PiecewiseConstant(
        tuple((250.0 * i, 6.0 if i % 2 == 0 else 10.0) for i in range(8))
    )
    common = dict(
        plant=PlantParams(c1=0.052, c2=0.052),
        valves=_default_valves(),
        schedule=schedule,
        duration=2000.0,
        initial_ph=6.0,
    )
    hybrid = ExperimentConfig(cascade=CascadeConfig(controller_kind="hybrid"), **common)
    fuzzy_only = ExperimentConfig(cascade=CascadeConfig(controller_kind="fuzzy_only"), **common)
    return hybrid, fuzzy_only


# ---------------------------------------------------------------------------
# metrics


@dataclass(frozen=True)
class Metrics:
    """Per-segment step response figures; nan marks "not defined"."""

    rise_time_s: float
    settling_time_s: float
    overshoot_ph: float
    rmse_ph: float
    iae_ph_s: float


@dataclass(frozen=True)
class SegmentMetrics:
    t_start: float
    t_end: float
    setpoint: float
    metrics: Metrics


@dataclass(frozen=True)
class MetricsReport:
    segments: tuple[SegmentMetrics, ...]
    rmse_ph: float
    iae_ph_s: float

    def to_dict(self) -> dict:
        def clean(x: float):
            return None if math.isnan(x) else x

        return {
            "rmse_ph": self.rmse_ph,
            "iae_ph_s": self.iae_ph_s,
            "segments": [
                {
                    "t_start": s.t_start,
                    "t_end": s.t_end,
                    "setpoint": s.setpoint,
                    "rise_time_s": clean(s.metrics.rise_time_s),
                    "settling_time_s": clean(s.metrics.settling_time_s),
                    "overshoot_ph": clean(s.metrics.overshoot_ph),
                    "rmse_ph": s.metrics.rmse_ph,
                    "iae_ph_s": s.metrics.iae_ph_s,
                }
                for s in self.segments
            ],
        }


SETTLING_BAND_PH = 0.1
MIN_SEGMENT_SAMPLES = 5


def _segment_metrics(t: np.ndarray, y: np.ndarray, sp: float, y_start: float) -> Metrics:
    dt = t[1] - t[0] if len(t) > 1 else 0.0
    err = y - sp

    rise = math.nan
    span = sp - y_start
    # spans below a milli-pH are numerical noise, not steps
    stepped = abs(span) > 1e-3
    if stepped:
        y10 = y_start + 0.1 * span
        y90 = y_start + 0.9 * span
        if span > 0:
            idx10 = np.nonzero(y >= y10)[0]
            idx90 = np.nonzero(y >= y90)[0]
        else:
            idx10 = np.nonzero(y <= y10)[0]
            idx90 = np.nonzero(y <= y90)[0]
        if len(idx10) and len(idx90):
            rise = max(t[idx90[0]] - t[idx10[0]], 0.0)

    inside = np.abs(err) <= SETTLING_BAND_PH
    settling = math.nan
    if inside[-1]:
        outside = np.nonzero(~inside)[0]
        first_stay = 0 if len(outside) == 0 else outside[-1] + 1
        settling = t[first_stay] - t[0]

    # Overshoot is a step-response figure; a segment without a step has none.
    if stepped:
        overshoot = max(float(np.max(err)) if span > 0 else float(-np.min(err)), 0.0)
    else:
        overshoot = 0.0

    rmse = float(np.sqrt(np.mean(err * err)))
    iae = float(np.sum(np.abs(err)) * dt)
    return Metrics(rise_time_s=rise, settling_time_s=settling, overshoot_ph=overshoot,
                   rmse_ph=rmse, iae_ph_s=iae)


def compute_metrics(trace: SimTrace, schedule: SetpointSchedule) -> MetricsReport:
    """Step-response figures per schedule segment plus whole-run error norms."""
    if len(trace) == 0:
        raise ValueError("trace is empty")
    duration = float(trace.t[-1]) + float(trace.t[1] - trace.t[0] if len(trace) > 1 else 0.0)
    segments = []
    for t_start, t_end, sp in schedule.segments(duration):
        mask = (trace.t >= t_start - 1e-9) & (trace.t < t_end - 1e-9)
        idx = np.nonzero(mask)[0]
        if len(idx) < MIN_SEGMENT_SAMPLES:
            raise SegmentTooShort(
                f"segment [{t_start}, {t_end}) holds {len(idx)} < {MIN_SEGMENT_SAMPLES} samples"
            )
        y = trace.ph[idx]
        y_start = float(trace.ph[idx[0] - 1]) if idx[0] > 0 else float(y[0])
        segments.append(
            SegmentMetrics(t_start=t_start, t_end=t_end, setpoint=sp,
                           metrics=_segment_metrics(trace.t[idx], y, sp, y_start))
        )
    err = trace.ph - trace.ph_sp
    dt = float(trace.t[1] - trace.t[0]) if len(trace) > 1 else 0.0
    rmse = float(np.sqrt(np.mean(err * err)))
    iae = float(np.sum(np.abs(err)) * dt)
    return MetricsReport(segments=tuple(segments), rmse_ph=rmse, iae_ph_s=iae)


def format_metrics(report: MetricsReport) -> str:
    """Aligned plain-text metrics table."""
    lines = [
        f"{'segment':>16}  {'setpoint':>8}  {'rise_s':>8}  {'settle_s':>8}  "
        f"{'overshoot':>9}  {'rmse':>8}  {'iae':>10}"
    ]

    def fmt(x: float, width: int) -> str:
        return f"{'-':>{width}}" if math.isnan(x) else f"{x:>{width}.2f}"

    for s in report.segments:
        m = s.metrics
        lines.append(
            f"{f'{s.t_start:.0f}-{s.t_end:.0f}s':>16}  {s.setpoint:>8.2f}  "
            f"{fmt(m.rise_time_s, 8)}  {fmt(m.settling_time_s, 8)}  "
            f"{fmt(m.overshoot_ph, 9)}  {m.rmse_ph:>8.3f}  {m.iae_ph_s:>10.2f}"
        )
    lines.append(f"{'whole run':>16}  {'':>8}  {'':>8}  {'':>8}  {'':>9}  "
                 f"{report.rmse_ph:>8.3f}  {report.iae_ph_s:>10.2f}")
    return "\n".join(lines)
