"""Acceptance suite: one test per criterion, one PASS line per criterion.

Run with `pytest tests/test_acceptance.py -v -s` to see the lines.
"""

import math

import numpy as np
import pytest

from phneutral.chemistry import IonInvariants, hydrogen_ion, ph_of, titration_curve
from phneutral.fuzzy import FuzzyController
from phneutral.harness import (
    compute_metrics,
    experiment_1,
    experiment_2,
    experiment_3,
    run_experiment,
)
from phneutral.pid import ZnUltimate, zn_tune
from phneutral.plant import PlantParams, PlantState, ValveModel, plant_step

from .test_chemistry import bisect_residual


def report(name: str, ok: bool, detail: str) -> None:
    print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def trace_exp1():
    return run_experiment(experiment_1())


@pytest.fixture(scope="module")
def trace_exp2():
    return run_experiment(experiment_2())


@pytest.fixture(scope="module")
def traces_exp3():
    cfg_h, cfg_f = experiment_3()
    return run_experiment(cfg_h), run_experiment(cfg_f), cfg_h, cfg_f


def test_a1_neutral_water():
    ph = ph_of(IonInvariants(0.0, 0.0))
    report("A1 neutral water", abs(ph - 7.0) <= 1e-6, f"ph(0,0) = {ph:.9f}")


def test_a2_oracle_equivalence():
    worst = 0.0
    for alpha in np.linspace(0.0, 0.1, 21):
        for beta in np.linspace(0.0, 0.1, 21):
            inv = IonInvariants(float(alpha), float(beta))
            h = hydrogen_ion(inv)
            h_oracle = bisect_residual(inv)
            worst = max(worst, abs(h - h_oracle) / h_oracle)
    report("A2 oracle equivalence", worst <= 1e-9,
           f"worst relative gap on 21x21 grid = {worst:.2e}")


def test_a3_titration_shape():
    alpha = 0.026
    betas = np.linspace(0.0, 0.078, 521)
    curve = titration_curve(alpha, [float(b) for b in betas])
    phs = np.array([p for _, p in curve])
    increasing = bool(np.all(np.diff(phs) > 0))
    slopes = np.gradient(phs, betas)
    beta_steepest = float(betas[int(np.argmax(slopes))])
    in_window = 1.9 * alpha <= beta_steepest <= 2.1 * alpha
    # acid level chosen so the curve starts near pH 3
    alpha_start3 = 5.2e-4
    ph0 = ph_of(IonInvariants(alpha_start3, 0.0))
    starts_near_3 = abs(ph0 - 3.0) <= 0.5
    report(
        "A3 titration shape",
        increasing and in_window and starts_near_3,
        f"monotone={increasing}, steepest at beta/alpha={beta_steepest / alpha:.3f}, "
        f"start pH={ph0:.3f}",
    )


def test_a4_ziegler_nichols_numbers():
    g = zn_tune(ZnUltimate(18.0, 33.0), "PID")
    exact = (
        g.kp == pytest.approx(10.8, abs=1e-12)
        and g.ki == pytest.approx(2.0 * 10.8 / 33.0, abs=1e-12)
        and g.kd == pytest.approx(10.8 * 33.0 / 8.0, abs=1e-12)
    )
    rounded = (
        abs(g.kp - 10.8) <= 0.05 and abs(g.ki - 0.65) <= 0.05 and abs(g.kd - 44.5) <= 0.05
    )
    report("A4 Ziegler-Nichols numbers", exact and rounded,
           f"kp={g.kp}, ki={g.ki:.6f}, kd={g.kd}")


def test_a5_step_timing(trace_exp1):
    cfg = experiment_1()
    t, ph = trace_exp1.t, trace_exp1.ph
    up = (t >= 300.0) & (t < 600.0)
    in_band = np.abs(ph - 10.0) <= 0.1
    hits = np.nonzero(up & in_band)[0]
    entry = float(t[hits[0]] - 300.0) if len(hits) else math.nan
    rep = compute_metrics(trace_exp1, cfg.schedule)
    settle_up = rep.segments[1].metrics.settling_time_s
    settle_down = rep.segments[2].metrics.settling_time_s
    ok = (
        not math.isnan(entry)
        and 40.0 <= entry <= 160.0
        and not math.isnan(settle_up)
        and not math.isnan(settle_down)
        and settle_down < settle_up
    )
    report("A5 step timing", ok,
           f"band entry {entry:.1f}s after step (need 40-160), "
           f"settle up {settle_up:.1f}s vs down {settle_down:.1f}s (down faster)")


def test_a6_square_wave_tracking(trace_exp2):
    t, ph, sp = trace_exp2.t, trace_exp2.ph, trace_exp2.ph_sp
    dt = float(t[1] - t[0])
    toggles = [300.0 * k for k in range(1, 9)]   # includes the end-of-run edge
    worst_pre = 0.0
    for tg in toggles:
        i = int(round(tg / dt)) - 1
        worst_pre = max(worst_pre, abs(float(ph[i] - sp[i])))
    worst_pp = 0.0
    for tg in toggles:
        w = (t >= tg - 60.0) & (t < tg)
        worst_pp = max(worst_pp, float(ph[w].max() - ph[w].min()))
    ok = worst_pre <= 0.1 and worst_pp < 0.2
    report("A6 square-wave tracking", ok,
           f"worst pre-toggle error {worst_pre:.3f} (<= 0.1), "
           f"worst post-settling peak-to-peak {worst_pp:.3f} (< 0.2)")


def test_a7_controller_comparison(traces_exp3):
    trace_h, trace_f, cfg_h, cfg_f = traces_exp3
    assert cfg_h.valves[0].hysteresis_eps == 0.04
    rmse_h = compute_metrics(trace_h, cfg_h.schedule).rmse_ph
    rmse_f = compute_metrics(trace_f, cfg_f.schedule).rmse_ph
    report("A7 controller comparison", rmse_h <= rmse_f,
           f"rmse hybrid {rmse_h:.3f} <= rmse supervisor-only {rmse_f:.3f}")


def test_a8_fuzzy_crisp_map():
    fc = FuzzyController()
    at_zero = fc.controller_output(0.0)
    at_plus2 = fc.controller_output(2.0)
    at_minus2 = fc.controller_output(-2.0)
    ok_points = (
        abs(at_zero) <= 0.05
        and abs(at_plus2 - 40.0) <= 0.5
        and abs(at_minus2 + 40.0) <= 0.5
    )
    es = np.arange(0.0, 5.0 + 1e-9, 0.01)
    worst_asym = 0.0
    outs_pos = []
    for e in es:
        f_pos = fc.controller_output(float(e))
        f_neg = fc.controller_output(float(-e))
        worst_asym = max(worst_asym, abs(f_pos + f_neg))
        outs_pos.append(f_pos)
    full = [-o for o in outs_pos[::-1]] + outs_pos[1:]
    monotone = bool(np.all(np.diff(full) >= -1e-9))
    ok = ok_points and worst_asym <= 0.05 and monotone
    report("A8 fuzzy crisp map", ok,
           f"f(0)={at_zero:.4f}, f(2)={at_plus2:.3f}, f(-2)={at_minus2:.3f}, "
           f"max |f(e)+f(-e)|={worst_asym:.4f}, monotone={monotone}")


def test_a9_integrator_checks():
    # RK4 order on the washout ODE against the exact exponential.
    p = PlantParams(volume=1.0, c1=0.052, c2=0.052)
    valves = (ValveModel(hysteresis_eps=0.0), ValveModel(hysteresis_eps=0.0))
    f1, f2 = 0.05, 0.05
    lam = (f1 + f2) / p.volume
    alpha0, horizon = 0.05, 20.0
    alpha_inf = p.c1 * f1 / (f1 + f2)

    def rk4_error(dt):
        s = PlantState(IonInvariants(alpha0, 0.0), f1, f2, 0.0)
        for _ in range(int(horizon / dt)):
            s = plant_step(s, f1, f2, p, valves, dt)
        exact = alpha_inf + (alpha0 - alpha_inf) * math.exp(-lam * horizon)
        return abs(s.inv.alpha - exact)

    ratio = rk4_error(2.0) / rk4_error(1.0)
    ratio_ok = 8.0 <= ratio <= 32.0

    # Analytic steady state after 20 residence times.
    s = PlantState(IonInvariants(0.0, 0.0), 0.0, 0.0, 0.0)
    dt = 0.1
    residence = p.volume / (f1 + f2)
    for _ in range(int(20.0 * residence / dt)):
        s = plant_step(s, f1, f2, p, valves, dt)
    rel = abs(s.inv.alpha - alpha_inf) / alpha_inf
    steady_ok = rel <= 1e-6
    report("A9 integrator checks", ratio_ok and steady_ok,
           f"step-halving error ratio {ratio:.1f} (in [8, 32]), "
           f"steady-state relative error {rel:.2e} (<= 1e-6)")
