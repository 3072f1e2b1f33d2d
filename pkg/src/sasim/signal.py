"""Actuated traffic light: fixed cycle, one time-gap actuated green.

Every cycle starts with the actuated green. The green runs between its
minimum and maximum duration; every second of extension is taken from the
complementary green so the cycle length never changes. Phase transitions
happen at their exact scheduled instants, independently of how often
``tick`` is called.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Iterable

from .scenario import SignalSpec

# tolerance for comparing phase-clock instants
TIME_EPS = 1e-9


class TerminationReason(str, Enum):
    OMIT = "Omit"
    GAP_OUT = "GapOut"
    MAX_OUT = "MaxOut"


@dataclass(frozen=True)
class ActuationParams:
    t_a_i: float
    t_th: float

    def __post_init__(self):
        if self.t_a_i < 1 or self.t_th < 0:
            raise ValueError(f"invalid actuation params {self}")


@dataclass(frozen=True)
class TerminationRecord:
    cycle_index: int
    reason: TerminationReason
    green_duration: float
    cycle_start: float


@dataclass(frozen=True)
class PhaseChange:
    time: float
    phase_from: int
    phase_to: int
    cycle_index: int


class SignalController:
    """Runtime state of one actuated light."""

    def __init__(self, spec: SignalSpec, params: ActuationParams, start_time: float = 0.0):
        self.spec = spec
        self.params = params
        self.act_index = spec.actuated_phase_index
        self.act_phase = spec.phases[self.act_index]
        self._colors = {
            a: tuple(spec.color(i, a) for i in range(len(spec.phases))) for a in spec.approaches
        }
        k = math.floor((start_time - spec.offset) / spec.cycle_length)
        self.cycle_index = k
        self.cycle_start = spec.offset + k * spec.cycle_length
        self.records: list[TerminationRecord] = []
        self.changes: list[PhaseChange] = []
        self._begin_cycle()
        self.tick(start_time)

    # -- state

    def _begin_cycle(self):
        self.phase_index = 0
        self.phase_start = self.cycle_start
        self.last_actuation: float | None = None
        self.actuated_this_cycle = False
        self.green_end_committed = self.act_phase.min_duration
        self.phase_end = self.cycle_start + self.green_end_committed

    @property
    def cycle_length(self) -> float:
        return self.spec.cycle_length

    def phase_clock(self, now: float) -> float:
        return now - self.phase_start

    def cycle_clock(self, now: float) -> float:
        return now - self.cycle_start

    def is_actuated_green(self) -> bool:
        return self.phase_index == self.act_index

    def color(self, approach: str) -> str:
        return self._colors[approach][self.phase_index]

    # -- dynamics

    def tick(self, now: float) -> dict[str, str]:
        """Advance through every transition scheduled at or before ``now``."""
        while now >= self.phase_end - TIME_EPS:
            self._advance()
        return {a: c[self.phase_index] for a, c in self._colors.items()}

    def _advance(self):
        spec = self.spec
        ended = self.phase_index
        end = self.phase_end
        if ended == self.act_index:
            green = end - self.phase_start
            if not self.actuated_this_cycle:
                reason = TerminationReason.OMIT
            elif green >= self.act_phase.max_duration - TIME_EPS:
                reason = TerminationReason.MAX_OUT
            else:
                reason = TerminationReason.GAP_OUT
            self.records.append(TerminationRecord(self.cycle_index, reason, green, self.cycle_start))
            self._extension = green - self.act_phase.min_duration
        nxt = ended + 1
        if nxt == len(spec.phases):
            self.changes.append(PhaseChange(end, ended, 0, self.cycle_index + 1))
            self.cycle_index += 1
            self.cycle_start += spec.cycle_length
            self._begin_cycle()
            return
        self.changes.append(PhaseChange(end, ended, nxt, self.cycle_index))
        self.phase_index = nxt
        self.phase_start = end
        if nxt == len(spec.phases) - 1:
            # the last phase closes the cycle exactly
            self.phase_end = self.cycle_start + spec.cycle_length
        elif nxt == spec.complementary_phase_index:
            self.phase_end = end + spec.phases[nxt].max_duration - self._extension
        else:
            self.phase_end = end + spec.phases[nxt].min_duration

    def actuate(self, now: float) -> bool:
        """A vehicle crossed an actuator; returns True if the green was extended."""
        self.tick(now)
        if self.phase_index != self.act_index:
            return False
        clock = now - self.phase_start
        p = self.params
        mg = self.spec.min_gap
        if clock < p.t_th - TIME_EPS or clock >= self.act_phase.max_duration - TIME_EPS:
            return False
        if self.last_actuation is None:
            if clock > p.t_th + mg + TIME_EPS:
                return False
        elif clock - self.last_actuation > mg + TIME_EPS:
            return False
        self.last_actuation = clock
        self.actuated_this_cycle = True
        self.green_end_committed = min(
            max(clock + p.t_a_i, self.act_phase.min_duration), self.act_phase.max_duration
        )
        self.phase_end = self.phase_start + self.green_end_committed
        return True

    def residual_to_next_green(self, now: float) -> float:
        """Seconds until the next actuated-green onset (0 exactly at an onset)."""
        self.tick(now)
        clock = now - self.cycle_start
        if clock <= TIME_EPS:
            return 0.0
        return self.spec.cycle_length - clock

    def next_green_onset(self, now: float) -> float:
        return now + self.residual_to_next_green(now)

    def drain_changes(self) -> list[PhaseChange]:
        out, self.changes = self.changes, []
        return out


def classify_termination(records: Iterable[TerminationRecord]) -> dict[str, int]:
    counts = Counter(r.reason.value for r in records)
    return {reason.value: counts.get(reason.value, 0) for reason in TerminationReason}
