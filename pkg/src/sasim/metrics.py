"""Evaluation metrics over run logs: mismatches, fuel, POG, terminations, prediction errors."""

from __future__ import annotations

import csv
import io
import json
import math
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field
from typing import Iterable

from .engine import RunResult
from .fuel import FuelParams, fuel_consumed
from .logs import parse_detail

REPORT_SCHEMA = "sasim-report v1"
INSIGNIFICANT_ERROR = 3.0  # seconds


class UnmatchedVehicle(Exception):
    def __init__(self, vehicles):
        self.vehicles = sorted(vehicles)
        super().__init__(f"{len(self.vehicles)} vehicle(s) exited in only one run")


@dataclass(frozen=True)
class Crossing:
    vehicle: str
    intersection: str
    time: float
    cycle: int
    color: str
    arrival: float
    arrival_cycle: int
    link: str
    actuated: bool
    equipped: bool
    label: str


def crossings(events: Iterable[tuple]) -> list[Crossing]:
    out = []
    for t, kind, vid, iid, detail in events:
        if kind != "StopBarCross":
            continue
        d = parse_detail(detail)
        out.append(Crossing(
            vid, iid, float(t), int(d["cycle"]), d["color"], float(d["arrival"]),
            int(d["arrival_cycle"]), d.get("link", ""), d.get("actuated", "1") == "1",
            d.get("sas", "0") == "1", d.get("label", ""),
        ))
    return out


def exited(events: Iterable[tuple]) -> set[str]:
    return {e[2] for e in events if e[1] == "Exit"}


# ---------------------------------------------------------------- mismatches


@dataclass
class MismatchResult:
    count: int
    total: int
    vehicles: list[tuple[str, str]]
    per_intersection: dict[str, dict[str, float]]
    unmatched: list[str] = field(default_factory=list)

    @property
    def rate(self) -> float:
        return self.count / self.total if self.total else 0.0


def mismatches(baseline_events, sas_events, *, equipped_only: bool = True, strict: bool = False) -> MismatchResult:
    """Count (vehicle, intersection) pairs crossing in a later cycle with SAS than without.

    Only vehicles that exit in both runs are compared. Vehicles exiting in a
    single run are reported in ``unmatched`` (or raised with ``strict``).
    """
    base_events, sas_events = list(baseline_events), list(sas_events)
    base_exit, sas_exit = exited(base_events), exited(sas_events)
    unmatched = base_exit ^ sas_exit
    if strict and unmatched:
        raise UnmatchedVehicle(unmatched)
    both = base_exit & sas_exit
    base = {(c.vehicle, c.intersection): c for c in crossings(base_events) if c.vehicle in both}
    pairs = []
    per = defaultdict(lambda: [0, 0])
    count = 0
    for c in crossings(sas_events):
        if c.vehicle not in both or (equipped_only and not c.equipped):
            continue
        b = base.get((c.vehicle, c.intersection))
        if b is None:
            continue
        stats = per[c.intersection]
        stats[1] += 1
        if c.cycle > b.cycle:
            count += 1
            stats[0] += 1
            pairs.append((c.vehicle, c.intersection))
    total = sum(v[1] for v in per.values())
    per_int = {
        iid: {"mismatches": m, "vehicles": n, "accuracy": 1.0 - m / n if n else 1.0}
        for iid, (m, n) in sorted(per.items())
    }
    return MismatchResult(count, total, sorted(pairs), per_int, sorted(unmatched))


# ---------------------------------------------------------------- fuel


def fuel_by_group(baseline_vehicles, sas_vehicles) -> dict[str, dict[str, float]]:
    """Fuel totals of vehicles that exited in both runs, grouped by their SAS-run role."""
    base = {r[0]: r for r in baseline_vehicles if r[6] is not None}
    out = {}
    groups = defaultdict(lambda: [0.0, 0.0, 0])
    for r in sas_vehicles:
        if r[6] is None or r[0] not in base:
            continue
        g = groups[r[3]]
        g[0] += base[r[0]][7]
        g[1] += r[7]
        g[2] += 1
    for name in ("sas", "ordinary", "other"):
        b, s, n = groups.get(name, (0.0, 0.0, 0))
        out[name] = {
            "vehicles": n,
            "baseline_ml": round(b, 4),
            "sas_ml": round(s, 4),
            "reduction_pct": round(reduction_pct(b, s), 4),
        }
    return out


def reduction_pct(baseline: float, treated: float) -> float:
    if baseline <= 0:
        return 0.0
    return max(-100.0, min(100.0, 100.0 * (baseline - treated) / baseline))


def trace_fuel(trace, params: FuelParams = FuelParams()) -> float:
    return fuel_consumed(trace, params)


# ---------------------------------------------------------------- POG


def pog(arrivals, signal_rows, *, actuated_only: bool = True) -> dict[str, list[tuple[int, float]]]:
    """Per intersection, [(cycle, share of arrivals inside the actuated green)].

    ``arrivals`` are ``Crossing`` records (or anything with ``intersection``,
    ``arrival``, ``arrival_cycle`` and ``actuated``). Cycles without arrivals
    or without a closed signal record are left out.
    """
    greens = {(r[0], r[1]): (r[4], r[2]) for r in signal_rows}
    tally = defaultdict(lambda: [0, 0])
    for a in arrivals:
        if actuated_only and not a.actuated:
            continue
        key = (a.intersection, a.arrival_cycle)
        if key not in greens:
            continue
        start, green = greens[key]
        t = tally[key]
        t[1] += 1
        if start - 1e-6 <= a.arrival <= start + green + 1e-6:
            t[0] += 1
    out = defaultdict(list)
    for (iid, cyc), (g, n) in sorted(tally.items()):
        out[iid].append((cyc, g / n))
    return dict(out)


def mean_pog(series: dict[str, list[tuple[int, float]]]) -> float:
    vals = [p for s in series.values() for _, p in s]
    return sum(vals) / len(vals) if vals else math.nan


# ---------------------------------------------------------------- terminations and predictions


def termination_histogram(signal_rows) -> dict[str, dict[str, int]]:
    out = defaultdict(lambda: {"Omit": 0, "GapOut": 0, "MaxOut": 0})
    for r in signal_rows:
        out[r[0]][r[3]] += 1
    return {k: v for k, v in sorted(out.items())}


@dataclass
class ErrorSummary:
    histogram: dict[int, int]
    count: int
    mean_abs: float
    share_insignificant: float


def prediction_errors(prediction_rows, *, intersection: str | None = None) -> dict[str, ErrorSummary]:
    """Signed errors (predicted - actual) per algorithm, bucketed to whole seconds."""
    errs = defaultdict(list)
    for iid, _cycle, alg, predicted, actual in prediction_rows:
        if intersection is None or iid == intersection:
            errs[alg].append(predicted - actual)
    out = {}
    for alg, es in sorted(errs.items()):
        hist = Counter(int(math.floor(e + 0.5)) for e in es)
        out[alg] = ErrorSummary(
            dict(sorted(hist.items())),
            len(es),
            sum(abs(e) for e in es) / len(es),
            sum(1 for e in es if abs(e) < INSIGNIFICANT_ERROR) / len(es),
        )
    return out


# ---------------------------------------------------------------- report


@dataclass
class MetricsReport:
    fuel: dict
    mismatch: dict
    terminations: dict
    pog: dict
    prediction_errors: dict
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schema"] = REPORT_SCHEMA
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        """Long-format rows: section, key, subkey, value."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        buf.write(f"# {REPORT_SCHEMA}\n")
        w.writerow(("section", "key", "subkey", "value"))
        for group, vals in self.fuel.items():
            for k, v in vals.items():
                w.writerow(("fuel", group, k, _cell(v)))
        for k in ("count", "total", "rate"):
            w.writerow(("mismatch", "all", k, _cell(self.mismatch[k])))
        for iid, vals in self.mismatch["per_intersection"].items():
            for k, v in vals.items():
                w.writerow(("mismatch", iid, k, _cell(v)))
        for iid, hist in self.terminations.items():
            for reason, n in hist.items():
                w.writerow(("termination", iid, reason, n))
        for run in ("baseline", "sas"):
            for iid, series in self.pog[run].items():
                for cycle, p in series:
                    w.writerow((f"pog_{run}", iid, cycle, _cell(p)))
            w.writerow((f"pog_{run}", "all", "mean", _cell(self.pog[f"mean_{run}"])))
        for alg, s in self.prediction_errors.items():
            for bucket, n in s["histogram"].items():
                w.writerow(("prediction_error", alg, bucket, n))
            w.writerow(("prediction_error", alg, "mean_abs", _cell(s["mean_abs"])))
            w.writerow(("prediction_error", alg, "share_insignificant", _cell(s["share_insignificant"])))
        return buf.getvalue()


def _cell(v):
    return f"{v:.6f}" if isinstance(v, float) else v


def _r(x: float) -> float:
    return round(x, 6) if not math.isnan(x) else x


def build_report(baseline: RunResult, sas: RunResult) -> MetricsReport:
    mm = mismatches(baseline.events, sas.events)
    pog_base = pog(crossings(baseline.events), baseline.signal_rows)
    pog_sas = pog(crossings(sas.events), sas.signal_rows)
    errs = prediction_errors(sas.prediction_rows)
    return MetricsReport(
        fuel=fuel_by_group(baseline.vehicle_rows, sas.vehicle_rows),
        mismatch={
            "count": mm.count, "total": mm.total, "rate": _r(mm.rate),
            "vehicles": [list(p) for p in mm.vehicles],
            "per_intersection": {
                k: {kk: (_r(vv) if isinstance(vv, float) else vv) for kk, vv in v.items()}
                for k, v in mm.per_intersection.items()
            },
            "unmatched": mm.unmatched,
        },
        terminations=termination_histogram(sas.signal_rows),
        pog={
            "baseline": {k: [[c, _r(p)] for c, p in v] for k, v in pog_base.items()},
            "sas": {k: [[c, _r(p)] for c, p in v] for k, v in pog_sas.items()},
            "mean_baseline": _r(mean_pog(pog_base)),
            "mean_sas": _r(mean_pog(pog_sas)),
        },
        prediction_errors={
            alg: {
                "histogram": {str(b): n for b, n in s.histogram.items()},
                "count": s.count,
                "mean_abs": _r(s.mean_abs),
                "share_insignificant": _r(s.share_insignificant),
            }
            for alg, s in errs.items()
        },
        meta={"baseline": baseline.meta, "sas": sas.meta},
    )
