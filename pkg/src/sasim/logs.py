"""CSV/JSON persistence of run logs.

Every CSV starts with a ``# sasim-<kind> v1`` schema line followed by a
header row. Numbers are written with a fixed number of decimals so files are
byte-stable across runs and platforms.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .engine import RunResult

SCHEMA_VERSION = 1

EVENT_COLUMNS = ("time", "kind", "vehicle", "intersection", "detail")
SIGNAL_COLUMNS = ("intersection", "cycle_index", "green_duration", "reason", "cycle_start")
PREDICTION_COLUMNS = (
    "intersection", "cycle_index", "algorithm", "predicted_green", "actual_green", "error_seconds",
)
VEHICLE_COLUMNS = (
    "id", "demand", "equipped", "group", "accel", "spawn", "exit", "fuel_ml", "distance", "route",
)
TRACE_COLUMNS = ("time", "vehicle", "link", "pos", "speed", "accel", "mode", "label")


def _f(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        s = f"{x:.4f}"
        return "0.0000" if s == "-0.0000" else s
    return str(x)


def _write_csv(path: Path, kind: str, columns, rows):
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write(f"# sasim-{kind} v{SCHEMA_VERSION}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_f(x) for x in row])


def _read_csv(path: Path, kind: str) -> list[dict]:
    with path.open(encoding="utf-8", newline="") as fh:
        first = fh.readline().strip()
        if first != f"# sasim-{kind} v{SCHEMA_VERSION}":
            raise ValueError(f"{path}: expected sasim-{kind} v{SCHEMA_VERSION} header, got {first!r}")
        return list(csv.DictReader(fh))


def write_run(result: RunResult, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "events.csv", "events", EVENT_COLUMNS, result.events)
    _write_csv(out / "signals.csv", "signals", SIGNAL_COLUMNS, result.signal_rows)
    _write_csv(
        out / "predictions.csv", "predictions", PREDICTION_COLUMNS,
        (r[:5] + (r[3] - r[4],) for r in result.prediction_rows),
    )
    _write_csv(out / "vehicles.csv", "vehicles", VEHICLE_COLUMNS, result.vehicle_rows)
    if result.trace_rows:
        _write_csv(out / "trace.csv", "trace", TRACE_COLUMNS, result.trace_rows)
    summary = {"schema": f"sasim-run v{SCHEMA_VERSION}", "meta": result.meta, "stats": result.stats}
    (out / "run.json").write_text(json.dumps(summary, indent=2, sort_keys=True, default=str) + "\n",
                                  encoding="utf-8")
    return out


def _num(s: str):
    return float(s) if s != "" else None


def read_run(run_dir: str | Path) -> RunResult:
    d = Path(run_dir)
    if not (d / "events.csv").exists():
        raise FileNotFoundError(f"{d} does not contain run logs")
    res = RunResult()
    res.events = [
        (float(r["time"]), r["kind"], r["vehicle"], r["intersection"], r["detail"])
        for r in _read_csv(d / "events.csv", "events")
    ]
    res.signal_rows = [
        (r["intersection"], int(r["cycle_index"]), float(r["green_duration"]), r["reason"],
         float(r["cycle_start"]))
        for r in _read_csv(d / "signals.csv", "signals")
    ]
    res.prediction_rows = [
        (r["intersection"], int(r["cycle_index"]), r["algorithm"], float(r["predicted_green"]),
         float(r["actual_green"]))
        for r in _read_csv(d / "predictions.csv", "predictions")
    ]
    res.vehicle_rows = [
        (r["id"], int(r["demand"]), int(r["equipped"]), r["group"], float(r["accel"]),
         float(r["spawn"]), _num(r["exit"]), float(r["fuel_ml"]), float(r["distance"]), r["route"])
        for r in _read_csv(d / "vehicles.csv", "vehicles")
    ]
    if (d / "trace.csv").exists():
        res.trace_rows = [
            (float(r["time"]), r["vehicle"], r["link"], float(r["pos"]), float(r["speed"]),
             float(r["accel"]), r["mode"], r["label"])
            for r in _read_csv(d / "trace.csv", "trace")
        ]
    if (d / "run.json").exists():
        summary = json.loads((d / "run.json").read_text(encoding="utf-8"))
        res.meta, res.stats = summary.get("meta", {}), summary.get("stats", {})
    return res


def parse_detail(detail: str) -> dict[str, str]:
    """``k=v;k=v`` payload of an event row as a dict."""
    if not detail:
        return {}
    return dict(item.split("=", 1) for item in detail.split(";"))
