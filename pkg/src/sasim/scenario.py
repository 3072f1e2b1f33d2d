"""Static world description: links, detectors, signal tables and demand.

Scenario files are plain UTF-8 text made of repeated sections::

    [link]
    id = w_in
    length = 500
    speed_limit = 15
    downstream_intersection = J
    approach_heading = W

Recognised sections are ``[link]``, ``[detector]``, ``[signal]``, ``[phase]``
and ``[demand]``. ``#`` starts a comment. Times are seconds, distances meters,
speeds m/s.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

HEADINGS = ("N", "S", "E", "W")


class DetectorKind(str, Enum):
    COUNTER = "Counter"
    ACTUATOR = "Actuator"
    STOPBAR = "StopBar"


class AccelMode(str, Enum):
    FIXED_KNOWN = "FixedKnown"
    RANDOM_KNOWN = "RandomKnown"
    RANDOM_UNKNOWN = "RandomUnknown"


class ScenarioError(Exception):
    """Base class for everything that can go wrong while loading a scenario."""


class ScenarioSyntaxError(ScenarioError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class DanglingReference(ScenarioError):
    pass


class InvariantViolation(ScenarioError):
    def __init__(self, violations: list[Violation]):
        self.violations = violations
        super().__init__("; ".join(f"{v.rule}: {v.message}" for v in violations))


class ScenarioWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Violation:
    rule: str
    message: str


@dataclass(frozen=True)
class LinkSpec:
    id: str
    length: float
    speed_limit: float
    approach_heading: str
    downstream_intersection: str | None = None
    upstream_intersection: str | None = None


@dataclass(frozen=True)
class DetectorSpec:
    kind: DetectorKind
    link: str
    distance_to_stopline: float


@dataclass(frozen=True)
class PhaseSpec:
    state_string: str
    min_duration: float
    max_duration: float
    actuated: bool = False

    @property
    def is_yellow(self) -> bool:
        return "y" in self.state_string.lower()


@dataclass(frozen=True)
class SignalSpec:
    intersection: str
    cycle_length: float
    phases: tuple[PhaseSpec, ...]
    approaches: tuple[str, ...]
    complementary_phase_index: int
    min_gap: float = 3.0
    offset: float = 0.0

    @property
    def actuated_phase_index(self) -> int:
        for i, p in enumerate(self.phases):
            if p.actuated:
                return i
        raise ValueError(f"signal {self.intersection} has no actuated phase")

    @property
    def actuated_phase(self) -> PhaseSpec:
        return self.phases[self.actuated_phase_index]

    def color(self, phase_index: int, approach: str) -> str:
        """Color character ('G', 'y' or 'r') shown to ``approach`` in a phase."""
        state = self.phases[phase_index].state_string
        group = len(state) // len(self.approaches)
        return state[self.approaches.index(approach) * group]


@dataclass(frozen=True)
class DemandSpec:
    route: tuple[str, ...]
    arrival_rate: float
    sas_penetration: float = 0.0
    accel_mode: AccelMode = AccelMode.FIXED_KNOWN
    accel_range: tuple[float, float] = (2.0, 3.5)
    assumed_accel: float = 2.75
    fixed_accel: float = 2.5
    seed: int = 0
    start: float = 0.0
    end: float = math.inf


@dataclass(frozen=True)
class NetworkSpec:
    links: dict[str, LinkSpec]
    detectors: tuple[DetectorSpec, ...]
    signals: dict[str, SignalSpec]
    demands: tuple[DemandSpec, ...] = ()
    name: str = ""

    def detectors_on(self, link_id: str) -> dict[DetectorKind, DetectorSpec]:
        return {d.kind: d for d in self.detectors if d.link == link_id}

    def actuated_approaches(self, intersection: str) -> list[str]:
        sig = self.signals[intersection]
        return [
            a
            for a in sig.approaches
            if any(d.kind is DetectorKind.ACTUATOR for d in self.detectors if d.link == a)
        ]

    def with_overrides(
        self,
        *,
        sas_penetration: float | None = None,
        accel_mode: AccelMode | None = None,
        arrival_rate: float | None = None,
    ) -> NetworkSpec:
        """Copy of the network with every demand entry overridden."""
        changes = {}
        if sas_penetration is not None:
            changes["sas_penetration"] = sas_penetration
        if accel_mode is not None:
            changes["accel_mode"] = AccelMode(accel_mode)
        if arrival_rate is not None:
            changes["arrival_rate"] = arrival_rate
        return replace(self, demands=tuple(replace(d, **changes) for d in self.demands))


# ---------------------------------------------------------------- actuation


def actuation_params(network: NetworkSpec, intersection: str) -> tuple[int, float]:
    """(t_a_i, t_th) for an intersection, shared by all its actuated approaches.

    ``t_a_i`` is the ceiling of actuator-to-stop-line travel time at the speed
    limit; ``t_th`` is the actuated minimum green minus ``t_a_i``, clamped at 0.
    """
    sig = network.signals[intersection]
    values = set()
    for a in network.actuated_approaches(intersection):
        act = network.detectors_on(a)[DetectorKind.ACTUATOR]
        values.add(travel_ceiling(act.distance_to_stopline, network.links[a].speed_limit))
    t_a_i = max(values) if values else 1
    t_th = sig.actuated_phase.min_duration - t_a_i
    if t_th < 0:
        warnings.warn(
            f"signal {intersection}: actuation threshold {t_th} < 0, clamped to 0",
            ScenarioWarning,
            stacklevel=2,
        )
        t_th = 0.0
    return t_a_i, float(t_th)


def travel_ceiling(distance: float, speed: float) -> int:
    # guard against 60/15 -> 4.000000000001 style noise
    return max(1, math.ceil(distance / speed - 1e-9))


# ---------------------------------------------------------------- validation


def validate(network: NetworkSpec) -> list[Violation]:
    out: list[Violation] = []

    def bad(rule, msg):
        out.append(Violation(rule, msg))

    for link in network.links.values():
        if not link.length > 0:
            bad("LinkLength", f"link {link.id}: length must be > 0")
        if not link.speed_limit > 0:
            bad("SpeedLimit", f"link {link.id}: speed_limit must be > 0")
        if link.approach_heading not in HEADINGS:
            bad("Heading", f"link {link.id}: heading {link.approach_heading!r}")

    for det in network.detectors:
        link = network.links.get(det.link)
        if link is None:
            continue
        if not 0 <= det.distance_to_stopline < link.length:
            bad("DetectorPlacement", f"{det.kind.value} on {det.link} lies outside the link")

    for sig in network.signals.values():
        out.extend(_validate_signal(network, sig))

    for i, dem in enumerate(network.demands):
        if not dem.arrival_rate > 0:
            bad("ArrivalRate", f"demand {i}: arrival_rate must be > 0")
        if not 0 <= dem.sas_penetration <= 1:
            bad("Penetration", f"demand {i}: sas_penetration outside [0, 1]")
        lo, hi = dem.accel_range
        if lo > hi:
            bad("AccelRange", f"demand {i}: accel_range min > max")
        if lo <= 0 or dem.assumed_accel <= 0 or dem.fixed_accel <= 0:
            bad("AccelRange", f"demand {i}: accelerations must be positive")
        if dem.end <= dem.start:
            bad("DemandWindow", f"demand {i}: end must be after start")
        for a, b in zip(dem.route, dem.route[1:]):
            la, lb = network.links.get(a), network.links.get(b)
            if la and lb and (
                la.downstream_intersection is None
                or la.downstream_intersection != lb.upstream_intersection
            ):
                bad("RouteConnectivity", f"demand {i}: {a} does not lead into {b}")
    return out


def _validate_signal(network: NetworkSpec, sig: SignalSpec) -> list[Violation]:
    out = []
    name = sig.intersection

    def bad(rule, msg):
        out.append(Violation(rule, f"signal {name}: {msg}"))

    if not 90 <= sig.cycle_length <= 120:
        bad("CycleLength", f"cycle_length {sig.cycle_length} outside [90, 120]")
    if sig.min_gap <= 0:
        bad("MinGap", "min_gap must be positive")
    for i, p in enumerate(sig.phases):
        if p.min_duration > p.max_duration:
            bad("PhaseBounds", f"phase {i} min_duration > max_duration")
        if p.min_duration <= 0:
            bad("PhaseBounds", f"phase {i} has non-positive duration")
        if p.is_yellow and p.min_duration != p.max_duration:
            bad("YellowFixed", f"yellow phase {i} must have min == max")
        if len(p.state_string) % len(sig.approaches):
            bad("StateString", f"phase {i} state length does not split over approaches")

    actuated = [i for i, p in enumerate(sig.phases) if p.actuated]
    if len(actuated) != 1:
        bad("ActuatedPhase", f"expected exactly one actuated phase, found {len(actuated)}")
        return out
    if actuated[0] != 0:
        bad("ActuatedPhase", "the actuated green must be the first phase of the cycle")
    act = sig.phases[actuated[0]]
    if "G" not in act.state_string:
        bad("ActuatedPhase", "actuated phase shows no green")

    ci = sig.complementary_phase_index
    if not 0 <= ci < len(sig.phases) or ci == actuated[0]:
        bad("Complementary", f"complementary_phase_index {ci} invalid")
        return out
    comp = sig.phases[ci]
    extension = act.max_duration - act.min_duration
    if not math.isclose(comp.max_duration - comp.min_duration, extension):
        bad(
            "CycleBudget",
            f"complementary range {comp.max_duration - comp.min_duration:g} "
            f"!= actuated range {extension:g}",
        )
    budget = sum(p.min_duration for p in sig.phases) + extension
    if not math.isclose(budget, sig.cycle_length):
        bad("CycleBudget", f"minimums plus extension give {budget:g}, cycle is {sig.cycle_length:g}")
    for i, p in enumerate(sig.phases):
        if i not in (actuated[0], ci) and p.min_duration != p.max_duration:
            bad("FixedPhase", f"phase {i} is neither actuated nor complementary but min != max")

    acts = network.actuated_approaches(name)
    t_a_values = set()
    for a in sig.approaches:
        link = network.links[a]
        if link.downstream_intersection != name:
            bad("Approach", f"approach {a} does not end at this intersection")
        dets = [d for d in network.detectors if d.link == a]
        counters = [d for d in dets if d.kind is DetectorKind.COUNTER]
        actuators = [d for d in dets if d.kind is DetectorKind.ACTUATOR]
        if not actuators and not counters:
            continue
        if len(counters) != 1 or len(actuators) != 1:
            bad("DetectorPairing", f"approach {a} needs exactly one Counter and one Actuator")
            continue
        c, u = counters[0], actuators[0]
        if c.distance_to_stopline <= u.distance_to_stopline:
            bad("DetectorOrdering", f"approach {a}: counter is not upstream of the actuator")
        elif c.distance_to_stopline - u.distance_to_stopline < 50:
            bad("CounterSpacing", f"approach {a}: counter less than 50 m upstream of actuator")
        if not 40 <= u.distance_to_stopline <= 100:
            bad("ActuatorPlacement", f"approach {a}: actuator outside 40-100 m")
        if sig.color(0, a) != "G":
            bad("ActuatedApproach", f"approach {a} is not green in the actuated phase")
        t_a_values.add(travel_ceiling(u.distance_to_stopline, link.speed_limit))
    if not acts:
        bad("DetectorPairing", "no actuated approach")
    if len(t_a_values) > 1:
        bad("ActuationSymmetry", f"actuated approaches disagree on t_a_i: {sorted(t_a_values)}")
    if t_a_values and max(t_a_values) <= sig.min_gap:
        bad("ActuationWindow", "actuator travel time must exceed min_gap")
    return out


# ---------------------------------------------------------------- parsing

_SECTIONS = ("link", "detector", "signal", "phase", "demand")


def _split(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def _as_bool(value: str, line: int) -> bool:
    v = value.strip().lower()
    if v in ("true", "yes", "1"):
        return True
    if v in ("false", "no", "0"):
        return False
    raise ScenarioSyntaxError(line, f"expected boolean, got {value!r}")


class _Section:
    def __init__(self, kind: str, line: int):
        self.kind = kind
        self.line = line
        self.values: dict[str, tuple[str, int]] = {}

    def take(self, key, conv=str, default=None, required=True):
        if key not in self.values:
            if required and default is None:
                raise ScenarioSyntaxError(self.line, f"[{self.kind}] missing key {key!r}")
            return default
        raw, line = self.values.pop(key)
        try:
            return conv(raw) if conv is not _as_bool else _as_bool(raw, line)
        except ScenarioError:
            raise
        except (TypeError, ValueError) as exc:
            raise ScenarioSyntaxError(line, f"bad value for {key!r}: {raw!r} ({exc})") from None

    def finish(self):
        if self.values:
            key, (_, line) = next(iter(self.values.items()))
            raise ScenarioSyntaxError(line, f"unknown key {key!r} in [{self.kind}]")


def _tokenize(text: str) -> list[_Section]:
    sections: list[_Section] = []
    current = None
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ScenarioSyntaxError(n, f"malformed section header {raw.strip()!r}")
            kind = line[1:-1].strip().lower()
            if kind not in _SECTIONS:
                raise ScenarioSyntaxError(n, f"unknown section [{kind}]")
            current = _Section(kind, n)
            sections.append(current)
            continue
        if "=" not in line:
            raise ScenarioSyntaxError(n, f"expected 'key = value', got {raw.strip()!r}")
        if current is None:
            raise ScenarioSyntaxError(n, "key outside of any section")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in current.values:
            raise ScenarioSyntaxError(n, f"duplicate key {key!r}")
        current.values[key] = (value, n)
    return sections


def parse_scenario(text: str, name: str = "") -> NetworkSpec:
    links: dict[str, LinkSpec] = {}
    detectors: list[DetectorSpec] = []
    signal_rows: dict[str, tuple[_Section, dict]] = {}
    phases: dict[str, list[PhaseSpec]] = {}
    phase_lines: list[tuple[str, int]] = []
    demands: list[DemandSpec] = []
    refs: list[tuple[str, str, int]] = []  # (kind, id, line)

    for sec in _tokenize(text):
        if sec.kind == "link":
            link = LinkSpec(
                id=sec.take("id"),
                length=sec.take("length", float),
                speed_limit=sec.take("speed_limit", float),
                approach_heading=sec.take("approach_heading").upper(),
                downstream_intersection=sec.take("downstream_intersection", required=False),
                upstream_intersection=sec.take("upstream_intersection", required=False),
            )
            if link.id in links:
                raise ScenarioSyntaxError(sec.line, f"duplicate link id {link.id!r}")
            links[link.id] = link
            for key in ("downstream_intersection", "upstream_intersection"):
                if getattr(link, key):
                    refs.append(("intersection", getattr(link, key), sec.line))
        elif sec.kind == "detector":
            kind = sec.take("kind")
            try:
                kind = DetectorKind(kind)
            except ValueError:
                raise ScenarioSyntaxError(sec.line, f"unknown detector kind {kind!r}") from None
            det = DetectorSpec(kind, sec.take("link"), sec.take("distance_to_stopline", float))
            detectors.append(det)
            refs.append(("link", det.link, sec.line))
        elif sec.kind == "signal":
            iid = sec.take("intersection")
            if iid in signal_rows:
                raise ScenarioSyntaxError(sec.line, f"duplicate signal {iid!r}")
            row = dict(
                cycle_length=sec.take("cycle_length", float),
                approaches=tuple(sec.take("approaches", _split)),
                complementary_phase_index=sec.take("complementary_phase_index", int),
                min_gap=sec.take("min_gap", float, default=3.0),
                offset=sec.take("offset", float, default=0.0),
            )
            signal_rows[iid] = (sec, row)
            for a in row["approaches"]:
                refs.append(("link", a, sec.line))
        elif sec.kind == "phase":
            iid = sec.take("intersection")
            phase = PhaseSpec(
                state_string=sec.take("state"),
                min_duration=sec.take("min_duration", float),
                max_duration=sec.take("max_duration", float),
                actuated=sec.take("actuated", _as_bool, default=False),
            )
            phases.setdefault(iid, []).append(phase)
            phase_lines.append((iid, sec.line))
        elif sec.kind == "demand":
            mode = sec.take("accel_mode", default="FixedKnown")
            try:
                mode = AccelMode(mode)
            except ValueError:
                raise ScenarioSyntaxError(sec.line, f"unknown accel_mode {mode!r}") from None
            rng = sec.take("accel_range", lambda v: tuple(float(x) for x in _split(v)), default=(2.0, 3.5))
            if len(rng) != 2:
                raise ScenarioSyntaxError(sec.line, "accel_range needs two values")
            dem = DemandSpec(
                route=tuple(sec.take("route", _split)),
                arrival_rate=sec.take("arrival_rate", _rate),
                sas_penetration=sec.take("sas_penetration", float, default=0.0),
                accel_mode=mode,
                accel_range=rng,
                assumed_accel=sec.take("assumed_accel", float, default=2.75),
                fixed_accel=sec.take("fixed_accel", float, default=2.5),
                seed=sec.take("seed", int, default=0),
                start=sec.take("start", float, default=0.0),
                end=sec.take("end", float, default=math.inf),
            )
            demands.append(dem)
            for link_id in dem.route:
                refs.append(("link", link_id, sec.line))
        sec.finish()

    for iid, line in phase_lines:
        if iid not in signal_rows:
            raise DanglingReference(f"line {line}: phase refers to unknown signal {iid!r}")
    signals = {}
    for iid, (sec, row) in signal_rows.items():
        if not phases.get(iid):
            raise ScenarioSyntaxError(sec.line, f"signal {iid!r} has no phases")
        signals[iid] = SignalSpec(intersection=iid, phases=tuple(phases[iid]), **row)

    for kind, ident, line in refs:
        if kind == "link" and ident not in links:
            raise DanglingReference(f"line {line}: unknown link {ident!r}")
        if kind == "intersection" and ident not in signals:
            raise DanglingReference(f"line {line}: unknown intersection {ident!r}")

    network = NetworkSpec(links, tuple(detectors), signals, tuple(demands), name=name)
    violations = validate(network)
    if violations:
        raise InvariantViolation(violations)
    for iid in signals:
        actuation_params(network, iid)  # surfaces clamp warnings at load time
    return network


def _rate(value: str) -> float:
    # allow "1/40" as well as plain decimals
    if "/" in value:
        num, den = value.split("/", 1)
        return float(num) / float(den)
    return float(value)


def load_scenario(path: str | Path) -> NetworkSpec:
    path = Path(path)
    if not path.exists():
        bundled = Path(__file__).parent / "scenarios" / path.name
        if bundled.exists():
            path = bundled
    return parse_scenario(path.read_text(encoding="utf-8"), name=path.stem)


def _num(x: float) -> str:
    return repr(float(x)) if not float(x).is_integer() else str(int(x))


def serialize(network: NetworkSpec) -> str:
    """Render a network back to scenario-file text (``parse_scenario`` inverse)."""
    lines: list[str] = []
    for link in network.links.values():
        lines += ["[link]", f"id = {link.id}", f"length = {_num(link.length)}",
                  f"speed_limit = {_num(link.speed_limit)}",
                  f"approach_heading = {link.approach_heading}"]
        if link.downstream_intersection:
            lines.append(f"downstream_intersection = {link.downstream_intersection}")
        if link.upstream_intersection:
            lines.append(f"upstream_intersection = {link.upstream_intersection}")
        lines.append("")
    for det in network.detectors:
        lines += ["[detector]", f"kind = {det.kind.value}", f"link = {det.link}",
                  f"distance_to_stopline = {_num(det.distance_to_stopline)}", ""]
    for sig in network.signals.values():
        lines += ["[signal]", f"intersection = {sig.intersection}",
                  f"cycle_length = {_num(sig.cycle_length)}",
                  f"approaches = {', '.join(sig.approaches)}",
                  f"complementary_phase_index = {sig.complementary_phase_index}",
                  f"min_gap = {_num(sig.min_gap)}", f"offset = {_num(sig.offset)}", ""]
        for p in sig.phases:
            lines += ["[phase]", f"intersection = {sig.intersection}", f"state = {p.state_string}",
                      f"min_duration = {_num(p.min_duration)}",
                      f"max_duration = {_num(p.max_duration)}",
                      f"actuated = {'true' if p.actuated else 'false'}", ""]
    for d in network.demands:
        lines += ["[demand]", f"route = {', '.join(d.route)}",
                  f"arrival_rate = {d.arrival_rate!r}",
                  f"sas_penetration = {d.sas_penetration!r}",
                  f"accel_mode = {d.accel_mode.value}",
                  f"accel_range = {d.accel_range[0]!r}, {d.accel_range[1]!r}",
                  f"assumed_accel = {d.assumed_accel!r}", f"fixed_accel = {d.fixed_accel!r}",
                  f"seed = {d.seed}", f"start = {d.start!r}"]
        if math.isfinite(d.end):
            lines.append(f"end = {d.end!r}")
        lines.append("")
    return "\n".join(lines)


__all__ = [
    "AccelMode", "DanglingReference", "DemandSpec", "DetectorKind", "DetectorSpec",
    "InvariantViolation", "LinkSpec", "NetworkSpec", "PhaseSpec", "ScenarioError",
    "ScenarioSyntaxError", "ScenarioWarning", "SignalSpec", "Violation", "actuation_params",
    "load_scenario", "parse_scenario", "serialize", "validate",
]
