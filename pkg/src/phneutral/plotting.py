"""Render simulation traces to figure files (SVG by default).

One panel: time on x, pH setpoint and measurement overlaid. Comparison
mode adds a second run's measurement for side-by-side controller studies.
Axes follow a fixed convention: x spans [0, duration], y spans the
plotted pH range padded by 0.5 on each side.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .harness import SetpointSchedule, SimTrace


class IoError(Exception):
    """Figure file could not be written."""


def plot(
    trace: SimTrace,
    schedule: SetpointSchedule,
    path,
    compare_with: SimTrace | None = None,
    labels: tuple[str, str] = ("measured", "comparison"),
) -> None:
    if len(trace) == 0:
        raise ValueError("cannot plot an empty trace")
    dt = float(trace.t[1] - trace.t[0]) if len(trace) > 1 else 0.0
    duration = float(trace.t[-1]) + dt

    fig, ax = plt.subplots(figsize=(9, 4.5))
    ax.plot(trace.t, trace.ph_sp, drawstyle="steps-post", color="0.4",
            linestyle="--", linewidth=1.2, label="setpoint")
    ax.plot(trace.t, trace.ph, color="tab:blue", linewidth=1.4, label=labels[0])
    plotted = [trace.ph_sp, trace.ph]
    if compare_with is not None:
        ax.plot(compare_with.t, compare_with.ph, color="tab:red",
                linewidth=1.2, alpha=0.85, label=labels[1])
        plotted.append(compare_with.ph)

    lo = min(float(np.min(p)) for p in plotted)
    hi = max(float(np.max(p)) for p in plotted)
    ax.set_xlim(0.0, duration)
    ax.set_ylim(lo - 0.5, hi + 0.5)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("pH")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best")
    fig.tight_layout()
    try:
        fig.savefig(path)
    except OSError as exc:
        raise IoError(f"cannot write figure {path}: {exc}") from exc
    finally:
        plt.close(fig)
