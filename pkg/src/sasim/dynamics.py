"""Longitudinal vehicle motion: Krauss car-following and the SAS planner.

The speed advisory planner only produces three-segment-free trajectories:
change speed at a constant rate, then hold. Executing a plan is always
bounded by the Krauss safe speed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

GLIDE_DECEL = 0.15  # engine-off deceleration, m/s^2
DEFAULT_A_MAX = 2.5


class Mode(str, Enum):
    KRAUSS = "Krauss"
    SAS = "SasPlan"


class Label(str, Enum):
    PASS = "Pass"
    WAIT = "Wait"


class PlanKind(str, Enum):
    ACCELERATE_CRUISE = "AccelerateCruise"
    GLIDE_CRUISE = "GlideCruise"
    BRAKE_CONSTANT = "BrakeConstant"
    STOP_AND_WAIT = "StopAndWait"


class NonPositiveHorizon(ValueError):
    pass


@dataclass(frozen=True)
class KraussParams:
    tau: float = 1.0
    b_comfort: float = 4.5
    sigma: float = 0.0

    def __post_init__(self):
        if self.tau <= 0 or self.b_comfort <= 0 or not 0 <= self.sigma <= 1:
            raise ValueError(f"invalid Krauss parameters {self}")


@dataclass(frozen=True)
class TrajectoryPlan:
    kind: PlanKind
    cruise_speed: float
    rate: float  # magnitude of the speed-change segment, m/s^2
    target_time: float | None = None  # seconds from plan creation to stop line

    @property
    def brake_rate(self) -> float | None:
        if self.kind in (PlanKind.BRAKE_CONSTANT, PlanKind.STOP_AND_WAIT):
            return self.rate
        return None


@dataclass(slots=True, eq=False)
class VehicleState:
    id: str
    route: tuple[str, ...]
    a_max: float = DEFAULT_A_MAX
    speed: float = 0.0
    pos: float = 0.0  # along the current link
    link_index: int = 0
    length: float = 5.0
    mode: Mode = Mode.KRAUSS
    label: Label | None = None
    plan: TrajectoryPlan | None = None
    equipped: bool = False
    accel: float = 0.0
    override_dwell: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def link(self) -> str:
        return self.route[self.link_index]


def safe_speed(gap: float, leader_speed: float, speed: float, tau: float, b: float) -> float:
    """Krauss collision-free speed behind a leader ``gap`` meters ahead."""
    return leader_speed + (gap - leader_speed * tau) / ((leader_speed + speed) / (2 * b) + tau)


def krauss_step(
    speed: float,
    a_max: float,
    leader_gap: float | None,
    leader_speed: float,
    params: KraussParams,
    dt: float,
    speed_limit: float,
    rng=None,
) -> float:
    v_new = min(speed + a_max * dt, speed_limit)
    if leader_gap is not None:
        v_new = min(v_new, safe_speed(leader_gap, leader_speed, speed, params.tau, params.b_comfort))
    if params.sigma > 0 and rng is not None:
        v_new -= params.sigma * a_max * dt * rng.random()
    return max(0.0, v_new)


def plan_sas(
    dist_to_stopline: float,
    speed: float,
    speed_limit: float,
    a_max: float,
    label: Label | None = None,
    t_res: float | None = None,
) -> TrajectoryPlan:
    """Near-optimal trajectory towards the stop line.

    A PASS label means "go as fast as possible". Anything else plans arrival
    at the stop line exactly ``t_res`` seconds from now, when the next green
    starts.
    """
    if label is Label.PASS or t_res is None:
        return TrajectoryPlan(PlanKind.ACCELERATE_CRUISE, speed_limit, a_max)
    if t_res <= 0:
        raise NonPositiveHorizon(f"t_res must be positive, got {t_res}")
    d, v, T = dist_to_stopline, speed, t_res
    if d <= 0:
        return TrajectoryPlan(PlanKind.ACCELERATE_CRUISE, speed_limit, a_max, T)

    if d >= v * T:
        # even without slowing down the vehicle is not early: speed up only as
        # much as needed, capped by the limit
        disc = (v + a_max * T) ** 2 - v * v - 2 * a_max * d
        u = (v + a_max * T) - math.sqrt(disc) if disc >= 0 else speed_limit
        u = min(max(u, v), speed_limit)
        if u <= 0:
            u = speed_limit
        return TrajectoryPlan(PlanKind.ACCELERATE_CRUISE, u, a_max, T)

    g = GLIDE_DECEL
    half_b = v - g * T
    disc = half_b * half_b - v * v + 2 * g * d
    if disc >= 0:
        u = half_b + math.sqrt(disc)
        if 0 < u <= v:
            return TrajectoryPlan(PlanKind.GLIDE_CRUISE, u, g, T)

    brake = 2 * (v * T - d) / (T * T)
    terminal = v - brake * T
    if terminal >= 0:
        return TrajectoryPlan(PlanKind.BRAKE_CONSTANT, terminal, brake, T)
    return TrajectoryPlan(PlanKind.STOP_AND_WAIT, 0.0, v * v / (2 * d), T)


def plan_speed(plan: TrajectoryPlan, speed: float, dt: float, a_max: float, b_comfort: float) -> float:
    """Next speed along a plan's profile, starting from the current speed."""
    u = plan.cruise_speed
    if speed < u:
        rate = plan.rate if plan.kind is PlanKind.ACCELERATE_CRUISE else a_max
        return min(u, speed + rate * dt)
    if speed > u:
        rate = b_comfort if plan.kind is PlanKind.ACCELERATE_CRUISE else plan.rate
        return max(u, speed - rate * dt)
    return speed


def follow_plan(
    state: VehicleState,
    plan: TrajectoryPlan,
    dt: float,
    v_safe: float,
    b_comfort: float = 4.5,
    dwell_limit: float = 3.0,
) -> VehicleState:
    """Advance ``state.speed`` one step along ``plan`` under the Krauss envelope.

    When the safe speed has been binding for longer than ``dwell_limit``
    seconds the vehicle falls back to car-following (``state.mode`` becomes
    Krauss). Position is not touched.
    """
    wanted = plan_speed(plan, state.speed, dt, state.a_max, b_comfort)
    if v_safe < wanted - 1e-9:
        state.override_dwell += dt
        new = max(0.0, v_safe)
    else:
        state.override_dwell = 0.0
        new = wanted
    state.accel = (new - state.speed) / dt
    state.speed = new
    if state.override_dwell > dwell_limit + 1e-9:
        state.mode = Mode.KRAUSS
        state.plan = None
        state.override_dwell = 0.0
    return state
