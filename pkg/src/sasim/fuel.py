"""Surrogate fuel-rate model (mL/s) and trace integration."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable


@dataclass(frozen=True)
class FuelParams:
    idle_rate: float = 0.40
    b0: float = 0.20
    b1: float = 0.025
    b2: float = 0.0009
    b3: float = 0.00004
    c0: float = 0.09
    c1: float = 0.004

    def __post_init__(self):
        if self.idle_rate < 0:
            raise ValueError("idle_rate must be non-negative")

    def rate(self, v: float, a: float) -> float:
        base = self.b0 + v * (self.b1 + v * (self.b2 + v * self.b3))
        if a > 0:
            base += a * v * (self.c0 + self.c1 * v)
        return base if base > self.idle_rate else self.idle_rate


def fuel_consumed(trace: Iterable[tuple[float, float, float]], params: FuelParams = FuelParams()) -> float:
    """Trapezoidal integral of the fuel rate over (time, speed, accel) samples."""
    total = 0.0
    prev = None
    for t, v, a in trace:
        r = params.rate(v, a)
        if prev is not None:
            total += 0.5 * (r + prev[1]) * (t - prev[0])
        prev = (t, r)
    return total
