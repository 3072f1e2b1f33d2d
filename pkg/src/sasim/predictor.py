"""Real-time PASS/WAIT prediction for the actuated green, plus a quantile baseline.

Counter crossings are turned into estimated actuator-arrival times on the
phase clock. Walking those estimates in order reproduces the controller's
actuation chain, which decides whether each vehicle clears the stop line
before the green ends and how long the green will last.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .dynamics import Label
from .signal import TIME_EPS


class DomainError(ValueError):
    pass


class EmptyHistory(ValueError):
    pass


@dataclass(frozen=True)
class PredictorConfig:
    t_a_i: float
    t_th: float
    min_gap: float
    min_duration: float
    max_duration: float
    assumed_accel: float = 2.75

    @classmethod
    def for_signal(cls, spec, t_a_i, t_th, assumed_accel=2.75):
        act = spec.actuated_phase
        return cls(t_a_i, t_th, spec.min_gap, act.min_duration, act.max_duration, assumed_accel)


@dataclass(frozen=True)
class CounterRecord:
    vehicle: str
    crossing_speed: float
    t_count: float
    t_est: float


ArrivalEstimate = CounterRecord


def estimate_travel_time(v: float, d: float, sl: float, a: float) -> float:
    """Counter-to-actuator time: accelerate at ``a`` up to ``sl``, then cruise."""
    if v > sl + 1e-6:
        raise DomainError(f"speed {v} exceeds the limit {sl}")
    if d <= 0 or a <= 0:
        raise DomainError("distance and acceleration must be positive")
    v = min(v, sl)
    accel_dist = (sl * sl - v * v) / (2 * a)
    if accel_dist <= d:
        return (sl - v) / a + (d - accel_dist) / sl
    # the limit is never reached before the actuator
    return (-v + math.sqrt(v * v + 2 * a * d)) / a


class CounterStore:
    """Current-cycle counter records of one intersection, ordered by t_est."""

    def __init__(self):
        self.cycle_index: int | None = None
        self._keys: list[tuple[float, int]] = []
        self.records: list[CounterRecord] = []
        self._seq = 0

    def roll(self, cycle_index: int) -> None:
        if cycle_index != self.cycle_index:
            self.cycle_index = cycle_index
            self.clear()

    def clear(self) -> None:
        self._keys.clear()
        self.records.clear()

    def insert(self, rec: CounterRecord) -> None:
        key = (rec.t_est, self._seq)
        self._seq += 1
        i = bisect.bisect(self._keys, key)
        self._keys.insert(i, key)
        self.records.insert(i, rec)

    @property
    def estimates(self) -> list[float]:
        return [k[0] for k in self._keys]

    def __len__(self):
        return len(self.records)


def record_crossing(
    store: CounterStore,
    vehicle: str,
    speed: float,
    phase_clock: float,
    config: PredictorConfig,
    *,
    distance: float,
    speed_limit: float,
    accel: float | None = None,
    cycle_index: int | None = None,
) -> ArrivalEstimate:
    if cycle_index is not None:
        store.roll(cycle_index)
    a = config.assumed_accel if accel is None else accel
    t_est = phase_clock + estimate_travel_time(min(speed, speed_limit), distance, speed_limit, a)
    rec = CounterRecord(vehicle, speed, phase_clock, t_est)
    store.insert(rec)
    return rec


def _estimates(store_or_list) -> Sequence[float]:
    if isinstance(store_or_list, CounterStore):
        return store_or_list.estimates
    return sorted(getattr(r, "t_est", r) for r in store_or_list)


def label_vehicle(store, t_est_i: float, config: PredictorConfig) -> Label:
    """PASS if the vehicle arriving at ``t_est_i`` clears the current green."""
    c = config
    if t_est_i < c.t_th - TIME_EPS:
        return Label.PASS
    window_hi = c.t_th + c.min_gap
    prev = None
    for t in _estimates(store):
        if t > t_est_i + TIME_EPS:
            break
        if prev is None:
            if t >= c.t_th - TIME_EPS and t <= window_hi + TIME_EPS and t < c.max_duration - TIME_EPS:
                prev = t
            continue
        if t - prev > c.min_gap + TIME_EPS or t >= c.max_duration - TIME_EPS:
            return Label.WAIT
        prev = t
    if prev is None:
        return Label.WAIT
    # the chain reached the vehicle: it passes if it can still clear before max-out
    return Label.PASS if t_est_i + c.t_a_i <= c.max_duration + TIME_EPS else Label.WAIT


def actuation_chain(store, config: PredictorConfig) -> list[float]:
    """Estimates expected to be granted as actuations, in order."""
    c = config
    chain: list[float] = []
    for t in _estimates(store):
        if not chain:
            if c.t_th - TIME_EPS <= t <= c.t_th + c.min_gap + TIME_EPS and t < c.max_duration - TIME_EPS:
                chain.append(t)
            elif t > c.t_th + c.min_gap + TIME_EPS:
                break
            continue
        if t - chain[-1] > c.min_gap + TIME_EPS or t >= c.max_duration - TIME_EPS:
            break
        chain.append(t)
    return chain


def label_all(store, config: PredictorConfig) -> list[Label]:
    ests = _estimates(store)
    chain = actuation_chain(ests, config)
    last = chain[-1] if chain else -math.inf
    out = []
    for t in ests:
        if t < config.t_th - TIME_EPS:
            out.append(Label.PASS)
        elif chain and chain[0] - TIME_EPS <= t <= last + TIME_EPS and t < config.max_duration - TIME_EPS:
            ok = t + config.t_a_i <= config.max_duration + TIME_EPS
            out.append(Label.PASS if ok else Label.WAIT)
        else:
            out.append(Label.WAIT)
    return out


def estimate_green(store, config: PredictorConfig) -> float:
    """Predicted duration of the current actuated green.

    The light holds until the last actuating vehicle can reach the stop line,
    never shorter than the minimum and never longer than the maximum.
    """
    chain = actuation_chain(store, config)
    if not chain:
        return config.min_duration
    return min(max(chain[-1] + config.t_a_i, config.min_duration), config.max_duration)


# ---------------------------------------------------------------- quantile baseline


@dataclass
class QuantileHistory:
    eta: float
    samples: list[float] = field(default_factory=list)
    c_r: float = 0.0

    def __post_init__(self):
        if not 0 < self.eta < 1:
            raise ValueError("eta must lie in (0, 1)")

    def update(self, green_duration: float) -> None:
        self.samples.append(float(green_duration))

    def extend(self, values: Iterable[float]) -> None:
        self.samples.extend(float(v) for v in values)


def quantile_predict(history: QuantileHistory) -> float:
    """Empirical eta-quantile of past green durations, interpolating order statistics."""
    if not history.samples:
        raise EmptyHistory("no green durations recorded yet")
    xs = sorted(history.samples)
    pos = history.eta * (len(xs) - 1)
    lo = math.floor(pos)
    hi = min(lo + 1, len(xs) - 1)
    return xs[lo] + (pos - lo) * (xs[hi] - xs[lo])
