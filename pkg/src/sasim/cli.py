"""Command-line interface: simulate, compare, sweep, report."""

from __future__ import annotations

import csv
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click

from .engine import EngineConfig, paired_run, run
from .logs import read_run, write_run
from .metrics import build_report
from .scenario import AccelMode, ScenarioError, load_scenario

DEFAULT_OUT = "sasim-out"
PENETRATIONS = (0.0, 0.2, 0.5, 0.6, 1.0)


def _out_dir(value):
    return Path(value or os.environ.get("SASIM_OUT") or DEFAULT_OUT)


def _rate(text: str) -> float:
    if "/" in text:
        num, den = text.split("/", 1)
        return float(num) / float(den)
    return float(text)


def _floats(text: str) -> list[float]:
    return [_rate(x) for x in text.split(",") if x.strip()]


def _network(scenario, penetration, accel_mode, demand):
    try:
        net = load_scenario(scenario)
    except (ScenarioError, OSError) as exc:
        raise click.ClickException(f"cannot load scenario {scenario}: {exc}") from exc
    return net.with_overrides(sas_penetration=penetration, accel_mode=accel_mode, arrival_rate=demand)


def _config(predictor, trace_stride=0):
    try:
        return EngineConfig(predictor=predictor, trace_stride=trace_stride)
    except ValueError as exc:
        raise click.BadParameter(str(exc), param_hint="--predictor") from exc


def scenario_options(f):
    opts = [
        click.option("--scenario", required=True, help="Scenario file (bundled names such as simple.scn work too)."),
        click.option("--seed", type=int, default=0, show_default=True),
        click.option("--horizon", type=float, default=3600.0, show_default=True, help="Simulated seconds."),
        click.option("--sas-penetration", type=click.FloatRange(0, 1), default=None,
                     help="Override the share of SAS-equipped vehicles on every demand."),
        click.option("--accel-mode", type=click.Choice([m.value for m in AccelMode]), default=None),
        click.option("--demand", type=_rate, default=None, help="Override every arrival rate, e.g. 1/10."),
        click.option("--predictor", default="realtime", show_default=True,
                     help="realtime, quantile:ETA or none."),
    ]
    for opt in reversed(opts):
        f = opt(f)
    return f


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Actuated-corridor simulator with real-time green prediction and speed advisory."""


@main.command()
@scenario_options
@click.option("--trace-stride", type=click.IntRange(0), default=0, help="Write a vehicle trace every N steps.")
@click.option("--out", default=None, help="Output directory (default $SASIM_OUT or ./sasim-out).")
def simulate(scenario, seed, horizon, sas_penetration, accel_mode, demand, predictor, trace_stride, out):
    """Run one simulation and write its logs."""
    net = _network(scenario, sas_penetration, accel_mode, demand)
    result = run(net, horizon, seed, _config(predictor, trace_stride))
    path = write_run(result, _out_dir(out))
    click.echo(f"wrote {path} ({result.stats.get('spawned', 0)} vehicles)")


def _compare(net, seed, horizon, config, out: Path):
    base, sas = paired_run(net, seed, horizon, config)
    write_run(base, out / "baseline")
    write_run(sas, out / "sas")
    # the report is always computed from the stored logs so it can be regenerated exactly
    report = build_report(read_run(out / "baseline"), read_run(out / "sas"))
    (out / "report.json").write_text(report.to_json(), encoding="utf-8")
    (out / "report.csv").write_text(report.to_csv(), encoding="utf-8")
    return report


@main.command()
@scenario_options
@click.option("--out", default=None, help="Output directory (default $SASIM_OUT or ./sasim-out).")
def compare(scenario, seed, horizon, sas_penetration, accel_mode, demand, predictor, out):
    """Paired baseline/SAS run plus the full metrics report."""
    net = _network(scenario, sas_penetration, accel_mode, demand)
    out = _out_dir(out)
    report = _compare(net, seed, horizon, _config(predictor), out)
    m = report.mismatch
    click.echo(f"mismatches {m['count']}/{m['total']}; "
               f"SAS fuel reduction {report.fuel['sas']['reduction_pct']:.2f}%; report in {out}")


SWEEP_COLUMNS = (
    "demand", "accel_mode", "penetration", "seed", "vehicles", "mismatches", "mismatch_rate",
    "fuel_sas_pct", "fuel_ordinary_pct", "fuel_other_pct", "pog_baseline", "pog_sas",
    "pred_abs_error", "omit", "gap_out", "max_out",
)


def _sweep_cell(args):
    scenario, demand, mode, pen, seed, horizon, predictor = args
    net = load_scenario(scenario).with_overrides(sas_penetration=pen, accel_mode=mode, arrival_rate=demand)
    base, sas = paired_run(net, seed, horizon, EngineConfig(predictor=predictor))
    r = build_report(base, sas)
    term = {"Omit": 0, "GapOut": 0, "MaxOut": 0}
    for hist in r.terminations.values():
        for k, v in hist.items():
            term[k] += v
    pred = r.prediction_errors.get("realtime", {})
    return (
        f"{demand:.6f}", mode, f"{pen:.2f}", seed, len(sas.vehicle_rows), r.mismatch["count"],
        f"{r.mismatch['rate']:.6f}", f"{r.fuel['sas']['reduction_pct']:.4f}",
        f"{r.fuel['ordinary']['reduction_pct']:.4f}", f"{r.fuel['other']['reduction_pct']:.4f}",
        f"{r.pog['mean_baseline']:.6f}", f"{r.pog['mean_sas']:.6f}",
        f"{pred.get('mean_abs', float('nan')):.6f}", term["Omit"], term["GapOut"], term["MaxOut"],
    )


@main.command()
@click.option("--scenario", required=True)
@click.option("--seeds", type=click.IntRange(1), default=1, show_default=True, help="Seeds 0..N-1 per cell.")
@click.option("--horizon", type=float, default=3600.0, show_default=True)
@click.option("--penetrations", default=",".join(f"{p:g}" for p in PENETRATIONS), show_default=True)
@click.option("--demands", default="1/40,1/10,1/3", show_default=True)
@click.option("--accel-modes", default=",".join(m.value for m in AccelMode), show_default=True)
@click.option("--predictor", default="realtime", show_default=True)
@click.option("--jobs", type=click.IntRange(1), default=1, show_default=True, help="Worker processes.")
@click.option("--out", default=None, help="Output directory (default $SASIM_OUT or ./sasim-out).")
def sweep(scenario, seeds, horizon, penetrations, demands, accel_modes, predictor, jobs, out):
    """Cartesian sweep of demand x acceleration mode x penetration, one CSV row per paired run."""
    modes = [m.strip() for m in accel_modes.split(",") if m.strip()]
    for m in modes:
        if m not in {a.value for a in AccelMode}:
            raise click.BadParameter(f"unknown acceleration mode {m!r}", param_hint="--accel-modes")
    _network(scenario, None, None, None)  # fail fast on a bad scenario
    _config(predictor)
    cells = [
        (scenario, d, m, p, s, horizon, predictor)
        for d in _floats(demands) for m in modes for p in _floats(penetrations) for s in range(seeds)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            rows = list(pool.map(_sweep_cell, cells))
    else:
        rows = [_sweep_cell(c) for c in cells]
    out = _out_dir(out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "sweep.csv"
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write("# sasim-sweep v1\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        w.writerows(rows)
    click.echo(f"wrote {path} ({len(rows)} paired runs)")


@main.command()
@click.argument("run_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Write here instead of stdout.")
def report(run_dir, fmt, out):
    """Render the metrics report of a stored `compare` directory."""
    d = Path(run_dir)
    try:
        rep = build_report(read_run(d / "baseline"), read_run(d / "sas"))
    except (FileNotFoundError, ValueError) as exc:
        raise click.ClickException(str(exc)) from exc
    text = rep.to_json() if fmt == "json" else rep.to_csv()
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)


if __name__ == "__main__":
    main()
