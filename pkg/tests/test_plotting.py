"""Figure emission: well-formed SVG, axis conventions, comparison overlay."""

import numpy as np
import pytest

from phneutral.harness import PiecewiseConstant, SimTrace
from phneutral.plotting import plot


def trace_of(t, ph, sp):
    n = len(t)
    z = np.zeros(n)
    return SimTrace(t=np.asarray(t, float), ph_sp=np.asarray(sp, float),
                    ph=np.asarray(ph, float), f1_cmd=z, f2_cmd=z.copy(),
                    f1=z.copy(), f2=z.copy(), alpha=z.copy(), beta=z.copy(),
                    delta=z.copy())


@pytest.fixture
def simple_trace():
    t = np.arange(0.0, 50.0, 0.1)
    sp = np.where(t < 20.0, 7.0, 9.0)
    ph = sp + 0.2 * np.sin(t / 3.0)
    return trace_of(t, ph, sp)


def test_emits_wellformed_svg(tmp_path, simple_trace):
    sched = PiecewiseConstant(((0.0, 7.0), (20.0, 9.0)))
    path = tmp_path / "fig.svg"
    plot(simple_trace, sched, path)
    text = path.read_text()
    assert text.lstrip().startswith("<?xml")
    assert "<svg" in text and "</svg>" in text


def test_comparison_mode_has_two_series(tmp_path, simple_trace):
    sched = PiecewiseConstant(((0.0, 7.0), (20.0, 9.0)))
    other = trace_of(simple_trace.t, simple_trace.ph + 0.3, simple_trace.ph_sp)
    path = tmp_path / "cmp.svg"
    plot(simple_trace, sched, path, compare_with=other, labels=("loop a", "loop b"))
    text = path.read_text()
    assert "loop a" in text and "loop b" in text


def test_axis_conventions(tmp_path, simple_trace, monkeypatch):
    import matplotlib.pyplot as plt

    captured = {}
    orig_savefig = plt.Figure.savefig

    def grab(fig, *args, **kwargs):
        ax = fig.axes[0]
        captured["xlim"] = ax.get_xlim()
        captured["ylim"] = ax.get_ylim()
        return orig_savefig(fig, *args, **kwargs)

    monkeypatch.setattr(plt.Figure, "savefig", grab)
    sched = PiecewiseConstant(((0.0, 7.0), (20.0, 9.0)))
    plot(simple_trace, sched, tmp_path / "ax.svg")
    assert captured["xlim"] == pytest.approx((0.0, 50.0))
    lo = float(min(simple_trace.ph.min(), simple_trace.ph_sp.min())) - 0.5
    hi = float(max(simple_trace.ph.max(), simple_trace.ph_sp.max())) + 0.5
    assert captured["ylim"] == pytest.approx((lo, hi))


def test_empty_trace_rejected(tmp_path):
    empty = trace_of([], [], [])
    with pytest.raises(ValueError):
        plot(empty, PiecewiseConstant(((0.0, 7.0),)), tmp_path / "x.svg")
