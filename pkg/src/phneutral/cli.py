"""Command-line front end.

Subcommands:

    titrate   emit a (beta, pH) titration curve as CSV
    tune      closed-loop ultimate-gain search and the resulting PID gains
    run       simulate a JSON-configured scenario; CSV out, optional SVG
    exp1/2/3  run the stock scenarios into an output directory
    compare   run two configs on their shared schedule and overlay them

Exit codes: 0 success, 2 configuration error, 3 simulation divergence.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import harness, plotting
from .chemistry import EquilibriumConstants, NoRoot, titration_curve
from .pid import NoOscillation, find_ultimate, first_order_delay_probe, reference_flow_loop, zn_tune
from .plant import StateDiverged

EXIT_CONFIG = 2
EXIT_DIVERGED = 3


def _fail(code: int, message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@click.group()
def main() -> None:
    """pH neutralization plant simulator and controller toolkit."""


@main.command()
@click.option("--alpha", type=float, required=True, help="Fixed total sulfate, mol/L.")
@click.option("--beta-max", type=float, required=True, help="Largest total sodium, mol/L.")
@click.option("--steps", type=int, default=200, show_default=True, help="Number of curve points.")
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Output CSV path.")
@click.option("--k1", type=float, default=1.0e3, show_default=True)
@click.option("--k2", type=float, default=1.2e-2, show_default=True)
@click.option("--kw", type=float, default=1.0e-14, show_default=True)
def titrate(alpha: float, beta_max: float, steps: int, out: str, k1: float, k2: float, kw: float) -> None:
    """Sweep base against a fixed acid and emit the titration curve."""
    if steps < 1 or beta_max < 0 or alpha < 0:
        _fail(EXIT_CONFIG, "alpha, beta-max must be non-negative and steps >= 1")
    try:
        constants = EquilibriumConstants(k1=k1, k2=k2, kw=kw)
        betas = np.linspace(0.0, beta_max, steps)
        curve = titration_curve(alpha, [float(b) for b in betas], constants)
    except (ValueError, NoRoot) as exc:
        _fail(EXIT_CONFIG, str(exc))
    with open(out, "w") as fh:
        fh.write("beta_mol_per_l,ph\n")
        for beta, ph in curve:
            fh.write(f"{beta:.17g},{ph:.17g}\n")
    click.echo(f"wrote {len(curve)} points to {out}")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Experiment config; echoed context only.")
@click.option("--probe-tau", type=float, default=None,
              help="Flow-loop lag for the tuning probe, s (default: anchored).")
@click.option("--probe-delay", type=float, default=None,
              help="Flow-loop dead time for the tuning probe, s (default: anchored).")
@click.option("--kind", type=click.Choice(["P", "PI", "PID"]), default="PID", show_default=True)
def tune(config_path, probe_tau, probe_delay, kind) -> None:
    """Find the ultimate gain of the flow loop and print tuned PID gains."""
    if config_path is not None:
        try:
            harness.load_config(config_path)
        except harness.ConfigError as exc:
            _fail(EXIT_CONFIG, str(exc))
    tau_ref, delay_ref = reference_flow_loop()
    tau = probe_tau if probe_tau is not None else tau_ref
    delay = probe_delay if probe_delay is not None else delay_ref
    probe = first_order_delay_probe(tau=tau, delay=delay, dt=0.02, duration=20.0 * tau)
    try:
        ultimate = find_ultimate(probe)
    except NoOscillation as exc:
        _fail(EXIT_CONFIG, f"tuning failed: {exc}")
    gains = zn_tune(ultimate, kind)
    click.echo(f"ultimate gain G = {ultimate.g:.4g}")
    click.echo(f"oscillation period P = {ultimate.p:.4g} s")
    click.echo(f"{kind} gains: kp = {gains.kp:.4g}, ki = {gains.ki:.4g}, kd = {gains.kd:.4g}")


def _run_and_report(cfg: harness.ExperimentConfig, out_csv: Path, out_svg: Path | None) -> harness.SimTrace:
    try:
        trace = harness.run_experiment(cfg)
    except harness.ConfigError as exc:
        _fail(EXIT_CONFIG, str(exc))
    except StateDiverged as exc:
        _fail(EXIT_DIVERGED, f"simulation diverged: {exc}")
    harness.write_csv(trace, out_csv)
    if out_svg is not None:
        plotting.plot(trace, cfg.schedule, out_svg)
    return trace


def _emit_metrics(report: harness.MetricsReport, json_path: Path) -> None:
    click.echo(harness.format_metrics(report))
    json_path.write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    click.echo(f"metrics written to {json_path}")


@main.command(name="run")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Trace CSV path.")
@click.option("--plot", "plot_path", type=click.Path(dir_okay=False), default=None,
              help="Optional figure (SVG) path.")
def run_cmd(config_path, out, plot_path) -> None:
    """Run one configured experiment."""
    try:
        cfg = harness.load_config(config_path)
    except harness.ConfigError as exc:
        _fail(EXIT_CONFIG, str(exc))
    out_csv = Path(out)
    trace = _run_and_report(cfg, out_csv, Path(plot_path) if plot_path else None)
    report = harness.compute_metrics(trace, cfg.schedule)
    _emit_metrics(report, out_csv.parent / "metrics.json")
    click.echo(f"trace written to {out_csv}")


def _experiment_command(name: str, make_cfg) -> None:
    @main.command(name=name)
    @click.option("--out-dir", type=click.Path(file_okay=False), default=name, show_default=True)
    def cmd(out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        cfg = make_cfg()
        harness.save_config(cfg, out / "config.json")
        trace = _run_and_report(cfg, out / "trace.csv", out / "trace.svg")
        report = harness.compute_metrics(trace, cfg.schedule)
        _emit_metrics(report, out / "metrics.json")
        click.echo(f"outputs in {out}/")

    cmd.__doc__ = make_cfg.__doc__


_experiment_command("exp1", harness.experiment_1)
_experiment_command("exp2", harness.experiment_2)


@main.command(name="exp3")
@click.option("--out-dir", type=click.Path(file_okay=False), default="exp3", show_default=True)
def exp3_cmd(out_dir) -> None:
    """Run the hybrid vs supervisor-only comparison scenario."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg_hybrid, cfg_fuzzy = harness.experiment_3()
    harness.save_config(cfg_hybrid, out / "config_hybrid.json")
    harness.save_config(cfg_fuzzy, out / "config_fuzzy_only.json")
    trace_h = _run_and_report(cfg_hybrid, out / "hybrid.csv", None)
    trace_f = _run_and_report(cfg_fuzzy, out / "fuzzy_only.csv", None)
    plotting.plot(trace_h, cfg_hybrid.schedule, out / "comparison.svg",
                  compare_with=trace_f, labels=("hybrid", "fuzzy only"))
    rep_h = harness.compute_metrics(trace_h, cfg_hybrid.schedule)
    rep_f = harness.compute_metrics(trace_f, cfg_fuzzy.schedule)
    click.echo("hybrid:")
    click.echo(harness.format_metrics(rep_h))
    click.echo("fuzzy only:")
    click.echo(harness.format_metrics(rep_f))
    payload = {"hybrid": rep_h.to_dict(), "fuzzy_only": rep_f.to_dict()}
    (out / "metrics.json").write_text(json.dumps(payload, indent=2) + "\n")
    click.echo(f"outputs in {out}/")


@main.command()
@click.option("--config-a", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--config-b", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out-dir", type=click.Path(file_okay=False), required=True)
def compare(config_a, config_b, out_dir) -> None:
    """Run two configs and overlay their responses."""
    try:
        cfg_a = harness.load_config(config_a)
        cfg_b = harness.load_config(config_b)
    except harness.ConfigError as exc:
        _fail(EXIT_CONFIG, str(exc))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    name_a = Path(config_a).stem
    name_b = Path(config_b).stem
    if name_a == name_b:
        name_a, name_b = name_a + "_a", name_b + "_b"
    trace_a = _run_and_report(cfg_a, out / f"{name_a}.csv", None)
    trace_b = _run_and_report(cfg_b, out / f"{name_b}.csv", None)
    plotting.plot(trace_a, cfg_a.schedule, out / "comparison.svg",
                  compare_with=trace_b, labels=(name_a, name_b))
    rep_a = harness.compute_metrics(trace_a, cfg_a.schedule)
    rep_b = harness.compute_metrics(trace_b, cfg_b.schedule)
    click.echo(f"{name_a}:")
    click.echo(harness.format_metrics(rep_a))
    click.echo(f"{name_b}:")
    click.echo(harness.format_metrics(rep_b))
    payload = {name_a: rep_a.to_dict(), name_b: rep_b.to_dict()}
    (out / "metrics.json").write_text(json.dumps(payload, indent=2) + "\n")
    click.echo(f"outputs in {out}/")


if __name__ == "__main__":
    main()
