"""Schedules, config serialization, trace IO, metrics, stock experiments."""

import json
import math

import numpy as np
import pytest

from phneutral.harness import (
    ConfigError,
    ExperimentConfig,
    PiecewiseConstant,
    SegmentTooShort,
    SimTrace,
    SquareWave,
    TraceFormatError,
    compute_metrics,
    config_from_dict,
    experiment_1,
    experiment_2,
    experiment_3,
    format_metrics,
    load_config,
    read_csv,
    run_experiment,
    save_config,
    solve_initial_state,
    write_csv,
)


def synthetic_trace(t, ph, sp):
    n = len(t)
    z = np.zeros(n)
    return SimTrace(t=np.asarray(t, float), ph_sp=np.asarray(sp, float),
                    ph=np.asarray(ph, float), f1_cmd=z, f2_cmd=z.copy(),
                    f1=z.copy(), f2=z.copy(), alpha=z.copy(), beta=z.copy(),
                    delta=z.copy())


class TestSchedules:
    def test_piecewise_values(self):
        s = PiecewiseConstant(((0.0, 7.0), (300.0, 10.0), (600.0, 7.0)))
        assert s.value(0.0) == 7.0
        assert s.value(299.9) == 7.0
        assert s.value(450.0) == 10.0
        assert s.value(700.0) == 7.0

    def test_piecewise_segments(self):
        s = PiecewiseConstant(((0.0, 7.0), (300.0, 10.0), (600.0, 7.0)))
        assert s.segments(900.0) == [(0.0, 300.0, 7.0), (300.0, 600.0, 10.0), (600.0, 900.0, 7.0)]

    def test_piecewise_validation(self):
        with pytest.raises(ConfigError):
            PiecewiseConstant(())
        with pytest.raises(ConfigError):
            PiecewiseConstant(((0.0, 7.0), (0.0, 8.0)))
        with pytest.raises(ConfigError):
            PiecewiseConstant(((0.0, 15.0),))

    def test_square_wave_low_first(self):
        s = SquareWave(center=8.5, amplitude=1.5, period=600.0)
        assert s.value(0.0) == 7.0
        assert s.value(299.9) == 7.0
        assert s.value(300.1) == 10.0
        assert s.value(599.9) == 10.0
        assert s.value(600.1) == 7.0

    def test_square_wave_periodicity(self):
        s = SquareWave(center=8.5, amplitude=1.5, period=600.0)
        for t in np.linspace(0.0, 1800.0, 400):
            assert s.value(float(t)) == s.value(float(t) + 600.0)

    def test_square_wave_segments_cover_duration(self):
        s = SquareWave(center=8.5, amplitude=1.5, period=600.0)
        segs = s.segments(2400.0)
        assert segs[0] == (0.0, 300.0, 7.0)
        assert segs[1] == (300.0, 600.0, 10.0)
        assert segs[-1][1] == 2400.0
        assert len(segs) == 8

    def test_square_wave_validation(self):
        with pytest.raises(ConfigError):
            SquareWave(center=8.5, amplitude=1.5, period=0.0)
        with pytest.raises(ConfigError):
            SquareWave(center=13.5, amplitude=1.5, period=10.0)


class TestExperimentPresets:
    def test_experiment_1_schedule_and_feeds(self):
        cfg = experiment_1()
        assert cfg.plant.c1 == 0.052 and cfg.plant.c2 == 0.052
        assert cfg.schedule.value(450.0) == 10.0
        assert cfg.schedule.value(700.0) == 7.0
        assert cfg.duration == 900.0
        assert cfg.cascade.controller_kind == "hybrid"

    def test_experiment_1_round_trips_through_loader(self, tmp_path):
        cfg = experiment_1()
        path = tmp_path / "exp1.json"
        save_config(cfg, path)
        again = load_config(path)
        assert again.to_dict() == cfg.to_dict()

    def test_experiment_2_wave_and_feeds(self):
        cfg = experiment_2()
        assert cfg.plant.c1 == 0.051 and cfg.plant.c2 == 0.0489
        assert cfg.duration == 2400.0
        first_toggle = 300.0
        assert cfg.schedule.value(first_toggle + 0.1) == 10.0
        for t in (100.0, 500.0, 1000.0, 1700.0):
            assert cfg.schedule.value(t) == cfg.schedule.value(t + 600.0)

    def test_experiment_3_pair(self):
        hybrid, fuzzy_only = experiment_3()
        dh, df = hybrid.to_dict(), fuzzy_only.to_dict()

        def leaves(d, prefix=""):
            out = {}
            for k, v in d.items():
                key = f"{prefix}.{k}"
                if isinstance(v, dict):
                    out.update(leaves(v, key))
                else:
                    out[key] = json.dumps(v)
            return out

        lh, lf = leaves(dh), leaves(df)
        assert lh.keys() == lf.keys()
        differing = [k for k in lh if lh[k] != lf[k]]
        assert differing == [".cascade.controller_kind"]
        values = [v for _, v in hybrid.schedule.points]
        assert min(values) == 6.0 and max(values) == 10.0
        assert hybrid.duration == 2000.0

    def test_config_round_trip_idempotent(self):
        cfg = experiment_2()
        d1 = cfg.to_dict()
        d2 = config_from_dict(d1).to_dict()
        assert d1 == d2


class TestConfigLoader:
    def test_unknown_top_level_key_rejected(self):
        d = experiment_1().to_dict()
        d["extra"] = 1
        with pytest.raises(ConfigError):
            config_from_dict(d)

    def test_unknown_nested_key_rejected(self):
        d = experiment_1().to_dict()
        d["plant"]["colour"] = "blue"
        with pytest.raises(ConfigError):
            config_from_dict(d)
        d = experiment_1().to_dict()
        d["cascade"]["gains"]["kq"] = 1.0
        with pytest.raises(ConfigError):
            config_from_dict(d)

    def test_missing_key_rejected(self):
        d = experiment_1().to_dict()
        del d["plant"]["volume"]
        with pytest.raises(ConfigError):
            config_from_dict(d)

    def test_bad_json_file(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        with pytest.raises(ConfigError):
            load_config(p)

    def test_unreachable_initial_ph(self):
        d = experiment_1().to_dict()
        d["initial_ph"] = 13.9
        cfg = config_from_dict(d)
        with pytest.raises(ConfigError):
            solve_initial_state(cfg)


class TestRunExperiment:
    def test_row_count(self):
        cfg = experiment_1()
        cfg = ExperimentConfig(plant=cfg.plant, valves=cfg.valves, cascade=cfg.cascade,
                               schedule=PiecewiseConstant(((0.0, 7.0),)),
                               duration=1.0, dt=0.1, initial_ph=7.0)
        trace = run_experiment(cfg)
        assert len(trace) == 10

    def test_constant_schedule_holds_initial_ph(self):
        base = experiment_1()
        cfg = ExperimentConfig(plant=base.plant, valves=base.valves, cascade=base.cascade,
                               schedule=PiecewiseConstant(((0.0, 7.0),)),
                               duration=120.0, dt=0.1, initial_ph=7.0)
        trace = run_experiment(cfg)
        assert np.all(np.abs(trace.ph - 7.0) <= 0.05)

    def test_time_axis_uniform(self):
        base = experiment_1()
        cfg = ExperimentConfig(plant=base.plant, valves=base.valves, cascade=base.cascade,
                               schedule=PiecewiseConstant(((0.0, 8.0),)),
                               duration=5.0, dt=0.1, initial_ph=8.0)
        trace = run_experiment(cfg)
        assert np.allclose(np.diff(trace.t), 0.1)
        assert np.all(np.diff(trace.t) > 0)

    def test_reproducible(self):
        base = experiment_1()
        cfg = ExperimentConfig(plant=base.plant, valves=base.valves, cascade=base.cascade,
                               schedule=PiecewiseConstant(((0.0, 7.0), (10.0, 8.0))),
                               duration=30.0, dt=0.1, initial_ph=7.0)
        t1 = run_experiment(cfg)
        t2 = run_experiment(cfg)
        assert t1 == t2

    def test_byte_identical_csv_from_same_config(self, tmp_path):
        base = experiment_1()
        cfg = ExperimentConfig(plant=base.plant, valves=base.valves, cascade=base.cascade,
                               schedule=PiecewiseConstant(((0.0, 7.0), (5.0, 8.5))),
                               duration=15.0, dt=0.1, initial_ph=7.0)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_csv(run_experiment(cfg), p1)
        write_csv(run_experiment(cfg), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_noise_reproducible_with_seed(self):
        base = experiment_1()
        cfg = ExperimentConfig(plant=base.plant, valves=base.valves, cascade=base.cascade,
                               schedule=PiecewiseConstant(((0.0, 7.0),)),
                               duration=5.0, dt=0.1, initial_ph=7.0, seed=42)
        t1 = run_experiment(cfg, noise_sigma_ph=0.01)
        t2 = run_experiment(cfg, noise_sigma_ph=0.01)
        assert t1 == t2
        t3 = run_experiment(cfg, noise_sigma_ph=0.0)
        assert not (t1 == t3)

    def test_segments_cover_gap_before_first_point(self):
        s = PiecewiseConstant(((100.0, 8.0), (200.0, 9.0)))
        assert s.segments(300.0) == [(0.0, 100.0, 8.0), (100.0, 200.0, 8.0), (200.0, 300.0, 9.0)]


class TestTraceCsv:
    def test_round_trip(self, tmp_path):
        base = experiment_1()
        cfg = ExperimentConfig(plant=base.plant, valves=base.valves, cascade=base.cascade,
                               schedule=PiecewiseConstant(((0.0, 7.0), (5.0, 9.0))),
                               duration=20.0, dt=0.1, initial_ph=7.0)
        trace = run_experiment(cfg)
        path = tmp_path / "trace.csv"
        write_csv(trace, path)
        again = read_csv(path)
        assert again == trace

    def test_header(self, tmp_path):
        trace = synthetic_trace([0.0], [7.0], [7.0])
        path = tmp_path / "t.csv"
        write_csv(trace, path)
        assert path.read_text().splitlines()[0] == "t,ph_sp,ph,f1_cmd,f2_cmd,f1,f2,alpha,beta,delta"

    def test_empty_trace_header_only(self, tmp_path):
        trace = synthetic_trace([], [], [])
        path = tmp_path / "empty.csv"
        write_csv(trace, path)
        lines = path.read_text().splitlines()
        assert len(lines) == 1
        assert len(read_csv(path)) == 0

    def test_malformed_row_names_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("t,ph_sp,ph,f1_cmd,f2_cmd,f1,f2,alpha,beta,delta\n"
                        "0,7,7,0,0,0,0,0,0,0\n"
                        "1,7,oops,0,0,0,0,0,0,0\n")
        with pytest.raises(TraceFormatError, match="line 3"):
            read_csv(path)

    def test_wrong_field_count_names_line(self, tmp_path):
        path = tmp_path / "short.csv"
        path.write_text("t,ph_sp,ph,f1_cmd,f2_cmd,f1,f2,alpha,beta,delta\n1,2,3\n")
        with pytest.raises(TraceFormatError, match="line 2"):
            read_csv(path)

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "hdr.csv"
        path.write_text("time,ph\n")
        with pytest.raises(TraceFormatError, match="line 1"):
            read_csv(path)


@pytest.fixture(scope="module")
def exp1_run():
    cfg = experiment_1()
    return cfg, run_experiment(cfg)


class TestMetrics:
    def test_perfect_tracking_zero_error(self):
        t = np.arange(0.0, 100.0, 0.1)
        sched = PiecewiseConstant(((0.0, 7.0), (50.0, 9.0)))
        sp = np.array([sched.value(x) for x in t])
        trace = synthetic_trace(t, sp.copy(), sp)
        rep = compute_metrics(trace, sched)
        assert rep.rmse_ph == 0.0
        assert rep.iae_ph_s == 0.0
        for seg in rep.segments:
            assert seg.metrics.rmse_ph == 0.0

    def test_first_order_rise_time(self):
        # y = 10 - 3 exp(-t/30): 10-90% rise of the 7 -> 10 step is
        # 30 * ln(9) =~ 65.9 s.
        dt = 0.01
        t_pre = np.arange(0.0, 10.0, dt)
        t_step = np.arange(10.0, 400.0, dt)
        y_pre = np.full_like(t_pre, 7.0)
        y_step = 10.0 - 3.0 * np.exp(-(t_step - 10.0) / 30.0)
        t = np.concatenate([t_pre, t_step])
        y = np.concatenate([y_pre, y_step])
        sched = PiecewiseConstant(((0.0, 7.0), (10.0, 10.0)))
        sp = np.array([sched.value(x) for x in t])
        rep = compute_metrics(synthetic_trace(t, y, sp), sched)
        rise = rep.segments[1].metrics.rise_time_s
        assert rise == pytest.approx(30.0 * math.log(9.0), abs=0.05)

    def test_settling_time_definition(self):
        dt = 0.1
        t = np.arange(0.0, 50.0, dt)
        y = np.full_like(t, 8.0)
        y[t < 20.0] = 8.5       # outside the 0.1 band until t = 20
        sched = PiecewiseConstant(((0.0, 8.0),))
        sp = np.full_like(t, 8.0)
        rep = compute_metrics(synthetic_trace(t, y, sp), sched)
        assert rep.segments[0].metrics.settling_time_s == pytest.approx(20.0, abs=dt)

    def test_settling_undefined_when_never_inside(self):
        t = np.arange(0.0, 10.0, 0.1)
        y = np.full_like(t, 9.0)
        sched = PiecewiseConstant(((0.0, 7.0),))
        rep = compute_metrics(synthetic_trace(t, y, np.full_like(t, 7.0)), sched)
        assert math.isnan(rep.segments[0].metrics.settling_time_s)

    def test_settling_not_before_rise(self, exp1_run):
        cfg, trace = exp1_run
        rep = compute_metrics(trace, cfg.schedule)
        for seg in rep.segments:
            m = seg.metrics
            if not (math.isnan(m.rise_time_s) or math.isnan(m.settling_time_s)):
                assert m.settling_time_s >= m.rise_time_s

    def test_overshoot_measured_beyond_setpoint(self):
        dt = 0.1
        t = np.arange(0.0, 40.0, dt)
        y = np.where(t < 20.0, 7.0, np.where(t < 25.0, 10.5, 10.0))
        sched = PiecewiseConstant(((0.0, 7.0), (20.0, 10.0)))
        sp = np.array([sched.value(x) for x in t])
        rep = compute_metrics(synthetic_trace(t, y, sp), sched)
        assert rep.segments[1].metrics.overshoot_ph == pytest.approx(0.5)

    def test_rmse_bounded_by_largest_step(self, exp1_run):
        cfg, trace = exp1_run
        rep = compute_metrics(trace, cfg.schedule)
        assert rep.rmse_ph <= 3.0

    def test_segment_too_short(self):
        t = np.arange(0.0, 1.0, 0.1)
        sched = PiecewiseConstant(((0.0, 7.0), (0.9, 8.0)))
        with pytest.raises(SegmentTooShort):
            compute_metrics(synthetic_trace(t, np.full_like(t, 7.0), np.full_like(t, 7.0)), sched)

    def test_format_is_aligned_text(self, exp1_run):
        cfg, trace = exp1_run
        rep = compute_metrics(trace, cfg.schedule)
        text = format_metrics(rep)
        lines = text.splitlines()
        assert "rise_s" in lines[0] and "rmse" in lines[0]
        assert len(lines) == 1 + len(rep.segments) + 1

    def test_report_dict_json_safe(self, exp1_run):
        cfg, trace = exp1_run
        rep = compute_metrics(trace, cfg.schedule)
        payload = json.dumps(rep.to_dict())
        assert "rmse_ph" in payload
