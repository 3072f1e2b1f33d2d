"""Deterministic time-stepped corridor simulation.

One ``World`` owns every vehicle, signal controller and counter store of a
run. Each step spawns arrivals, moves vehicles, resolves detector crossings
at their interpolated instants (ticking the affected signal first), assigns
PASS/WAIT labels and SAS plans, and appends to the logs.
"""

from __future__ import annotations

import math
from collections import Counter, deque
from dataclasses import dataclass, field

import numpy as np

from .dynamics import (
    KraussParams,
    Label,
    Mode,
    VehicleState,
    follow_plan,
    plan_sas,
    safe_speed,
)
from .fuel import FuelParams
from .predictor import (
    CounterStore,
    PredictorConfig,
    QuantileHistory,
    estimate_green,
    label_vehicle,
    quantile_predict,
    record_crossing,
)
from .scenario import AccelMode, DetectorKind, NetworkSpec, actuation_params
from .signal import ActuationParams, SignalController, TIME_EPS

EVENT_KINDS = (
    "Spawn", "CounterCross", "ActuatorCross", "StopBarCross",
    "PhaseChange", "Label", "ModeSwitch", "Exit",
)
# stream ids inside a demand's seed sequence
_SPAWN, _ACCEL, _EQUIP = 0, 1, 2


@dataclass(frozen=True)
class EngineConfig:
    dt: float = 0.1
    krauss: KraussParams = KraussParams()
    emergency_decel: float = 9.0
    standstill_gap: float = 2.0
    dwell_limit: float = 3.0
    predictor: str = "realtime"  # realtime | quantile:ETA | none
    quantile_etas: tuple[float, ...] = (0.8, 0.1)
    quantile_bootstrap: int = 5
    trace_stride: int = 0
    halt_speed: float = 0.1
    fuel: FuelParams = FuelParams()

    def __post_init__(self):
        p = self.predictor
        if p not in ("realtime", "none") and not p.startswith("quantile:"):
            raise ValueError(f"unknown predictor {p!r}")
        if p.startswith("quantile:"):
            eta = float(p.split(":", 1)[1])
            if not 0 < eta < 1:
                raise ValueError("quantile reliability level must lie in (0, 1)")


@dataclass(slots=True, eq=False)
class SimVehicle(VehicleState):
    demand: int = 0
    spawn_time: float = 0.0
    predictor_accel: float = 2.5
    fuel: float = 0.0
    fuel_rate: float = 0.0
    distance: float = 0.0
    arrival: float | None = None
    exit_time: float | None = None
    stopping: bool = False
    capable: bool = False  # route crosses an actuated approach
    x0: float = 0.0
    v0: float = 0.0


class _Link:
    __slots__ = (
        "id", "length", "sl", "vehicles", "signal", "actuated", "counter_pos",
        "actuator_pos", "counter_dist", "feeders",
    )

    def __init__(self, spec):
        self.id = spec.id
        self.length = spec.length
        self.sl = spec.speed_limit
        self.vehicles: list[SimVehicle] = []  # front first
        self.signal = spec.downstream_intersection
        self.actuated = False
        self.counter_pos = math.inf
        self.actuator_pos = math.inf
        self.counter_dist = 0.0
        self.feeders: list[_Link] = []


class _DemandStream:
    def __init__(self, index, spec, seed, network):
        self.index = index
        self.spec = spec
        root = np.random.SeedSequence(entropy=[seed, spec.seed, index])
        spawn, accel, equip = root.spawn(3)
        self.arrivals = np.random.Generator(np.random.Philox(spawn))
        self.accels = np.random.Generator(np.random.Philox(accel))
        self.equips = np.random.Generator(np.random.Philox(equip))
        self.count = 0
        self.pending: deque = deque()
        self.next_time = spec.start + self.arrivals.exponential(1.0 / spec.arrival_rate)
        self.sas_capable = any(
            DetectorKind.ACTUATOR in network.detectors_on(link) for link in spec.route
        )

    def due(self, now):
        spec = self.spec
        while self.next_time <= now + TIME_EPS and self.next_time < spec.end:
            u_acc = self.accels.random()
            u_eq = self.equips.random()
            if spec.accel_mode is AccelMode.FIXED_KNOWN:
                a = spec.fixed_accel
            else:
                lo, hi = spec.accel_range
                a = lo + u_acc * (hi - lo)
            assumed = spec.assumed_accel if spec.accel_mode is AccelMode.RANDOM_UNKNOWN else a
            equipped = self.sas_capable and u_eq < spec.sas_penetration
            self.pending.append((f"{self.index}.{self.count}", self.next_time, a, assumed, equipped))
            self.count += 1
            self.next_time += self.arrivals.exponential(1.0 / spec.arrival_rate)


@dataclass
class RunResult:
    events: list = field(default_factory=list)
    signal_rows: list = field(default_factory=list)
    prediction_rows: list = field(default_factory=list)
    vehicle_rows: list = field(default_factory=list)
    trace_rows: list = field(default_factory=list)
    stats: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)


def _fmt(x: float) -> str:
    return f"{x:.4f}"


class World:
    def __init__(self, network: NetworkSpec, seed: int = 0, config: EngineConfig = EngineConfig()):
        self.network = network
        self.seed = seed
        self.cfg = config
        self.clock = 0.0
        self.step_count = 0
        self.links = {lid: _Link(spec) for lid, spec in network.links.items()}
        self.controllers: dict[str, SignalController] = {}
        self.stores: dict[str, CounterStore] = {}
        self.pred_cfg: dict[str, PredictorConfig] = {}
        self.histories: dict[str, dict[float, QuantileHistory]] = {}
        self.realized: dict[str, list[float]] = {}
        for iid, spec in network.signals.items():
            t_a_i, t_th = actuation_params(network, iid)
            self.controllers[iid] = SignalController(spec, ActuationParams(t_a_i, t_th), 0.0)
            self.stores[iid] = CounterStore()
            self.pred_cfg[iid] = PredictorConfig.for_signal(spec, t_a_i, t_th)
            self.histories[iid] = {eta: QuantileHistory(eta) for eta in config.quantile_etas}
            self.realized[iid] = []
            for a in network.actuated_approaches(iid):
                link = self.links[a]
                dets = network.detectors_on(a)
                link.actuated = True
                link.counter_dist = (
                    dets[DetectorKind.COUNTER].distance_to_stopline
                    - dets[DetectorKind.ACTUATOR].distance_to_stopline
                )
                link.counter_pos = link.length - dets[DetectorKind.COUNTER].distance_to_stopline
                link.actuator_pos = link.length - dets[DetectorKind.ACTUATOR].distance_to_stopline
        self._routes: list[tuple[str, ...]] = []
        for dem in network.demands:
            self._add_route(dem.route)
        self.order = self._downstream_first()
        self.streams = [_DemandStream(i, d, seed, network) for i, d in enumerate(network.demands)]
        self.vehicles: dict[str, SimVehicle] = {}
        self.result = RunResult()
        self.stats = Counter()
        self._replan: dict[str, Label | None] = {}
        self._scripted: list[tuple] = []
        self._scripted_ids: list[str] = []
        self._batch: list[tuple] = []
        # driver imperfection draws, separate from every demand stream
        self._dawdle = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 0xDA])))
        for ctrl in self.controllers.values():
            ctrl.drain_changes()

    def _add_route(self, route):
        if route in self._routes:
            return
        self._routes.append(route)
        for a, b in zip(route, route[1:]):
            if self.links[a] not in self.links[b].feeders:
                self.links[b].feeders.append(self.links[a])
        self.order = self._downstream_first()

    def _downstream_first(self) -> list[_Link]:
        succ: dict[str, set[str]] = {lid: set() for lid in self.links}
        for route in self._routes:
            for a, b in zip(route, route[1:]):
                succ[a].add(b)
        depth: dict[str, int] = {}

        def visit(lid, seen=()):
            if lid in depth:
                return depth[lid]
            if lid in seen:
                return 0
            d = 1 + max((visit(n, seen + (lid,)) for n in succ[lid]), default=-1)
            depth[lid] = d
            return d

        for lid in self.links:
            visit(lid)
        return [self.links[lid] for lid in sorted(self.links, key=lambda k: (depth[k], k))]

    # ------------------------------------------------------------ logging

    def _event(self, t, kind, vehicle="", intersection="", detail=""):
        self._batch.append((t, len(self._batch), kind, vehicle, intersection, detail))

    # ------------------------------------------------------------ spawning

    def schedule_vehicle(self, route, at: float, *, equipped: bool = False, accel: float = 2.5,
                         assumed_accel: float | None = None, speed: float | None = None) -> str:
        """Insert one extra vehicle at time ``at`` (scripted scenarios and tests).

        Scripted vehicles use ids ``s.<k>`` and are subject to the same entry
        blocking as Poisson arrivals.
        """
        route = tuple(route)
        for lid in route:
            if lid not in self.links:
                raise KeyError(f"unknown link {lid!r}")
        self._add_route(route)
        vid = f"s.{len(self._scripted_ids)}"
        self._scripted_ids.append(vid)
        capable = any(self.links[lid].actuated for lid in route)
        assumed = accel if assumed_accel is None else assumed_accel
        entry = (at, vid, route, accel, assumed, equipped and capable, capable, speed)
        self._scripted.append(entry)
        self._scripted.sort(key=lambda e: (e[0], _id_key(e[1])))
        return vid

    def _spawn(self, now):
        while self._scripted and self._scripted[0][0] <= now + TIME_EPS:
            at, vid, route, a, assumed, equipped, capable, speed = self._scripted[0]
            if not self._insert(vid, route, a, assumed, equipped, -1, capable, at, now, speed):
                break
            self._scripted.pop(0)
        for stream in self.streams:
            stream.due(now)
            while stream.pending:
                vid, t_draw, a, assumed, equipped = stream.pending[0]
                if not self._insert(vid, stream.spec.route, a, assumed, equipped, stream.index,
                                    stream.sas_capable, t_draw, now):
                    break
                stream.pending.popleft()

    def _insert(self, vid, route, a, assumed, equipped, demand, capable, t_draw, now, speed=None) -> bool:
        cfg = self.cfg
        tau, b, gap0 = cfg.krauss.tau, cfg.krauss.b_comfort, cfg.standstill_gap
        link = self.links[route[0]]
        speed = link.sl if speed is None else min(speed, link.sl)
        length = 5.0
        if link.vehicles:
            r = link.vehicles[-1]
            gap = r.pos - r.length - gap0
            if gap < 0:
                return False
            speed = min(speed, max(0.0, safe_speed(gap, r.speed, speed, tau, b)))
        if not self._entry_clear(link, length):
            return False
        veh = SimVehicle(
            id=vid, route=route, a_max=a, speed=speed, pos=0.0,
            length=length, equipped=equipped, demand=demand, spawn_time=now,
            predictor_accel=assumed, capable=capable,
        )
        veh.fuel_rate = cfg.fuel.rate(speed, 0.0)
        link.vehicles.append(veh)
        self.vehicles[vid] = veh
        self.stats["spawned"] += 1
        self._event(now, "Spawn", vid, "", f"draw={_fmt(t_draw)};sas={int(equipped)};accel={a:.4f}")
        self._enter_link(veh, link)
        return True

    def _entry_clear(self, link, length):
        gap0, tau = self.cfg.standstill_gap, self.cfg.krauss.tau
        for feeder in link.feeders:
            if not feeder.vehicles:
                continue
            f = feeder.vehicles[0]
            if f.route[f.link_index + 1 : f.link_index + 2] != (link.id,):
                continue
            if f.stopping and f.speed < self.cfg.halt_speed:
                continue
            gap = feeder.length - f.pos - length - gap0
            if gap < f.speed * tau:
                return False
        return True

    def _enter_link(self, veh, link):
        veh.label = None
        veh.plan = None
        veh.override_dwell = 0.0
        veh.arrival = None
        veh.stopping = False
        if veh.equipped and link.actuated:
            veh.mode = Mode.SAS
            self._replan[veh.id] = None
        else:
            veh.mode = Mode.KRAUSS

    # ------------------------------------------------------------ planning

    def _assign_plan(self, veh: SimVehicle, label: Label | None, now: float):
        if veh.mode is not Mode.SAS:
            return
        link = self.links[veh.link]
        dist = link.length - veh.pos
        if not link.actuated or dist <= 0:
            veh.plan = plan_sas(max(dist, 1.0), veh.speed, link.sl, veh.a_max, Label.PASS)
            return
        ctrl = self.controllers[link.signal]
        green = ctrl.color(link.id) == "G"
        if green and label is not Label.WAIT:
            veh.plan = plan_sas(dist, veh.speed, link.sl, veh.a_max, Label.PASS)
            return
        t_res = ctrl.residual_to_next_green(now)
        if t_res <= TIME_EPS:
            veh.plan = plan_sas(dist, veh.speed, link.sl, veh.a_max, Label.PASS)
            return
        veh.plan = plan_sas(dist, veh.speed, link.sl, veh.a_max, None, t_res)

    def _sas_label(self, iid, rec) -> Label | None:
        mode = self.cfg.predictor
        cfg = self.pred_cfg[iid]
        if mode == "realtime":
            return label_vehicle(self.stores[iid], rec.t_est, cfg)
        if mode == "none":
            return None
        eta = float(mode.split(":", 1)[1])
        hist = self.histories[iid].get(eta)
        if hist is None:
            hist = self.histories[iid][eta] = QuantileHistory(eta, list(self.realized[iid]))
        predicted = quantile_predict(hist) if hist.samples else cfg.min_duration
        return Label.PASS if rec.t_est + cfg.t_a_i <= predicted + TIME_EPS else Label.WAIT

    # ------------------------------------------------------------ signals

    def _handle_changes(self, iid, ctrl):
        for ch in ctrl.drain_changes():
            self._event(ch.time, "PhaseChange", "", iid, f"from={ch.phase_from};to={ch.phase_to};cycle={ch.cycle_index}")
            if ch.phase_from == ctrl.act_index:
                self._close_green(iid, ctrl)
                self._mark_approaches(iid, None)
            elif ch.phase_to == ctrl.act_index:
                self.stores[iid].roll(ch.cycle_index)
                self._mark_approaches(iid, Label.PASS)

    def _mark_approaches(self, iid, label):
        for a in self.network.actuated_approaches(iid):
            for veh in self.links[a].vehicles:
                if veh.mode is Mode.SAS:
                    self._replan[veh.id] = label

    def _close_green(self, iid, ctrl):
        rec = ctrl.records[-1]
        if rec.cycle_start < -TIME_EPS:
            return
        cfg = self.pred_cfg[iid]
        store = self.stores[iid]
        actual = rec.green_duration
        predicted = estimate_green(store if store.cycle_index == rec.cycle_index else [], cfg)
        rows = self.result.prediction_rows
        rows.append((iid, rec.cycle_index, "realtime", predicted, actual))
        past = self.realized[iid]
        for eta, hist in self.histories[iid].items():
            if len(past) >= self.cfg.quantile_bootstrap:
                rows.append((iid, rec.cycle_index, f"quantile:{eta:g}", quantile_predict(hist), actual))
            hist.update(actual)
        past.append(actual)
        self.result.signal_rows.append(
            (iid, rec.cycle_index, actual, rec.reason.value, rec.cycle_start)
        )

    # ------------------------------------------------------------ stepping

    def step(self):
        cfg = self.cfg
        dt = cfg.dt
        now = self.clock
        nxt = now + dt
        self._batch = []
        self._spawn(now)
        crossings = self._move(now, dt)
        crossings.sort(key=lambda c: (c[0], c[1]))
        for te, _, kind, veh, link, extra in crossings:
            iid = link.signal
            if iid is not None:
                ctrl = self.controllers[iid]
                ctrl.tick(te)
                self._handle_changes(iid, ctrl)
            getattr(self, "_on_" + kind)(te, veh, link, extra)
        for iid, ctrl in self.controllers.items():
            ctrl.tick(nxt)
            self._handle_changes(iid, ctrl)
        if self._replan:
            for vid, label in self._replan.items():
                veh = self.vehicles.get(vid)
                if veh is not None:
                    self._assign_plan(veh, label, nxt)
            self._replan = {}
        self.clock = nxt
        self.step_count += 1
        if cfg.trace_stride and self.step_count % cfg.trace_stride == 0:
            for veh in self.vehicles.values():
                self.result.trace_rows.append((
                    nxt, veh.id, veh.link, veh.pos, veh.speed, veh.accel, veh.mode.value,
                    veh.label.value if veh.label else "",
                ))
        if self._batch:
            self._batch.sort()
            self.result.events.extend((e[0], e[2], e[3], e[4], e[5]) for e in self._batch)

    def _move(self, now, dt):
        cfg = self.cfg
        tau, b = cfg.krauss.tau, cfg.krauss.b_comfort
        krauss = cfg.krauss
        emerg = cfg.emergency_decel
        gap0 = cfg.standstill_gap
        fuel = cfg.fuel
        idle, b0, b1, b2, b3, c0, c1 = (
            fuel.idle_rate, fuel.b0, fuel.b1, fuel.b2, fuel.b3, fuel.c0, fuel.c1,
        )
        inv2b = 1.0 / (2 * b)
        halt = cfg.halt_speed
        links = self.links
        controllers = self.controllers
        crossings = []
        seq = 0

        # pass 1: new speeds from the state at ``now``
        for link in self.order:
            vs = link.vehicles
            if not vs:
                continue
            color = "G"
            if link.signal is not None:
                color = controllers[link.signal].color(link.id)
            L = link.length
            sl = link.sl
            for i, veh in enumerate(vs):
                v = veh.speed
                veh.x0 = veh.pos
                veh.v0 = v
                lead_safe = math.inf
                ld = None
                if i:
                    ld = vs[i - 1]
                    g = ld.pos - ld.length - veh.pos - gap0
                elif veh.link_index + 1 < len(veh.route):
                    nl = links[veh.route[veh.link_index + 1]].vehicles
                    if nl:
                        ld = nl[-1]
                        g = L - veh.pos + ld.pos - ld.length - gap0
                if ld is not None:
                    lv = ld.speed
                    # Krauss safe speed, inlined: this is the hot loop
                    lead_safe = lv + (g - lv * tau) / ((lv + v) * inv2b + tau)
                line_safe = math.inf
                veh.stopping = False
                if color != "G":
                    d = L - veh.pos
                    need = v * v / (2 * d) if d > 1e-6 else (0.0 if v < 1e-9 else math.inf)
                    limit = emerg if (veh.equipped or color == "r") else b
                    if need <= limit:
                        veh.stopping = True
                        line_safe = max(safe_speed(d, 0.0, v, tau, b), v - need * dt)
                if veh.mode is Mode.SAS and veh.plan is not None:
                    follow_plan(veh, veh.plan, dt, min(lead_safe, sl), b, cfg.dwell_limit)
                    if veh.mode is Mode.KRAUSS:
                        self.stats["mode_switches"] += 1
                        self._event(now + dt, "ModeSwitch", veh.id, link.signal or "", "to=Krauss")
                    if veh.speed > line_safe:
                        veh.speed = max(0.0, line_safe)
                else:
                    nv = v + veh.a_max * dt
                    if nv > sl:
                        nv = sl
                    if lead_safe < nv:
                        nv = lead_safe
                    if line_safe < nv:
                        nv = line_safe
                    if krauss.sigma > 0:
                        nv -= krauss.sigma * veh.a_max * dt * self._dawdle.random()
                    veh.speed = nv if nv > 0 else 0.0

        # pass 2: positions, downstream links first so leaders have moved
        t_end = now + dt
        for link in self.order:
            vs = link.vehicles
            if not vs:
                continue
            L = link.length
            keep = []
            lead_rear = math.inf  # leader's rear in this link's coordinates
            lead_speed = 0.0
            if vs[0].link_index + 1 < len(vs[0].route):
                nl = links[vs[0].route[vs[0].link_index + 1]]
                if nl.vehicles:
                    ld = nl.vehicles[-1]
                    lead_rear = L + ld.pos - ld.length
                    lead_speed = ld.speed
            for veh in vs:
                x0, v0, v1 = veh.x0, veh.v0, veh.speed
                x1 = x0 + 0.5 * (v0 + v1) * dt
                if veh.stopping:
                    # held at the line: whatever already crossed is out of the way
                    if veh is vs[0]:
                        lead_rear = math.inf
                    lim = min(lead_rear, L - 1e-6)
                else:
                    lim = lead_rear
                if x1 > lim:
                    at_line = lim < lead_rear
                    if not at_line:
                        self.stats["hard_clamps"] += 1
                    x1 = max(x0, lim)
                    cap = 0.0 if at_line else lead_speed
                    v1 = max(0.0, min(v1, cap, 2 * (x1 - x0) / dt - v0))
                    veh.speed = v1
                veh.pos = x1
                acc = veh.accel = (v1 - v0) / dt
                r = b0 + v1 * (b1 + v1 * (b2 + v1 * b3))  # FuelParams.rate, inlined
                if acc > 0:
                    r += acc * v1 * (c0 + c1 * v1)
                if r < idle:
                    r = idle
                veh.fuel += 0.5 * (r + veh.fuel_rate) * dt
                veh.fuel_rate = r
                veh.distance += x1 - x0
                if v1 < halt and veh.arrival is None and link.signal is not None and x1 < L:
                    veh.arrival = t_end
                # detector and stop-line crossings within (now, now + dt]
                if x0 < link.counter_pos <= x1:
                    s, vc = _cross_time(x0, v0, x1, v1, link.counter_pos, dt)
                    crossings.append((now + s, seq, "counter", veh, link, vc))
                    seq += 1
                if x0 < link.actuator_pos <= x1:
                    s, vc = _cross_time(x0, v0, x1, v1, link.actuator_pos, dt)
                    crossings.append((now + s, seq, "actuator", veh, link, vc))
                    seq += 1
                if x1 >= L:
                    s, vc = _cross_time(x0, v0, x1, v1, L, dt)
                    crossings.append((now + s, seq, "end", veh, link, vc))
                    seq += 1
                lead_rear = x1 - veh.length
                lead_speed = v1
                if x1 >= L:
                    veh.pos = x1 - L
                    nxt_index = veh.link_index + 1
                    if nxt_index < len(veh.route):
                        veh.link_index = nxt_index
                        links[veh.route[nxt_index]].vehicles.append(veh)
                    else:
                        veh.exit_time = t_end
                    continue
                keep.append(veh)
            link.vehicles = keep
        return crossings

    # ------------------------------------------------------------ crossing handlers

    def _on_counter(self, te, veh, link, speed):
        iid = link.signal
        ctrl = self.controllers[iid]
        store = self.stores[iid]
        store.roll(ctrl.cycle_index)
        rec = record_crossing(
            store, veh.id, speed, te - ctrl.cycle_start, self.pred_cfg[iid],
            distance=link.counter_dist, speed_limit=link.sl, accel=veh.predictor_accel,
        )
        self._event(te, "CounterCross", veh.id, iid,
                    f"speed={speed:.4f};t_count={rec.t_count:.4f};t_est={rec.t_est:.4f}")
        if veh.mode is not Mode.SAS:
            return
        if ctrl.color(link.id) == "G":
            label = self._sas_label(iid, rec)
            if label is not None:
                veh.label = label
                self._event(te, "Label", veh.id, iid,
                            f"label={label.value};t_est={rec.t_est:.4f};cycle={ctrl.cycle_index}")
            self._replan[veh.id] = label if label is not None else Label.PASS
        else:
            self._replan[veh.id] = None

    def _on_actuator(self, te, veh, link, speed):
        granted = self.controllers[link.signal].actuate(te)
        self._event(te, "ActuatorCross", veh.id, link.signal,
                    f"granted={int(granted)};speed={speed:.4f}")

    def _on_end(self, te, veh, link, speed):
        if link.signal is not None:
            ctrl = self.controllers[link.signal]
            color = ctrl.color(link.id)
            # a crossing at the very instant the green closes still counts as green
            if color != "G" and ctrl.records and ctrl.phase_index == ctrl.act_index + 1:
                rec = ctrl.records[-1]
                if te <= rec.cycle_start + rec.green_duration + 1e-6:
                    color = "G"
            arrival = veh.arrival if veh.arrival is not None else te
            if veh.equipped and color != "G":
                self.stats["sas_non_green_crossings"] += 1
            self._event(
                te, "StopBarCross", veh.id, link.signal,
                f"cycle={ctrl.cycle_index};color={color};arrival={arrival:.4f};"
                f"arrival_cycle={math.floor((arrival - ctrl.spec.offset) / ctrl.spec.cycle_length)};"
                f"link={link.id};actuated={int(link.actuated)};"
                f"sas={int(veh.equipped)};label={veh.label.value if veh.label else ''}",
            )
        if veh.exit_time is not None:
            self._finish(veh, te)
        else:
            self._enter_link(veh, self.links[veh.link])

    def _finish(self, veh, te):
        self.stats["exited"] += 1
        self._event(te, "Exit", veh.id, "", f"fuel={veh.fuel:.4f}")
        del self.vehicles[veh.id]
        self.result.vehicle_rows.append(_vehicle_row(veh, te))

    # ------------------------------------------------------------ driving

    def run(self, horizon: float) -> RunResult:
        steps = int(round(horizon / self.cfg.dt))
        for _ in range(steps):
            self.step()
        res = self.result
        for veh in self.vehicles.values():
            res.vehicle_rows.append(_vehicle_row(veh, None))
        res.vehicle_rows.sort(key=lambda r: _id_key(r[0]))
        self.stats["present"] = len(self.vehicles)
        self.stats["steps"] = steps
        res.stats = dict(sorted(self.stats.items()))
        res.meta = {
            "scenario": self.network.name, "seed": self.seed, "horizon": horizon,
            "dt": self.cfg.dt, "predictor": self.cfg.predictor,
        }
        return res


def _id_key(vid: str):
    a, b = vid.split(".")
    return (int(a) if a != "s" else 1 << 30), int(b)


def vehicle_group(equipped: bool, capable: bool) -> str:
    if equipped:
        return "sas"
    return "ordinary" if capable else "other"


def _vehicle_row(veh: SimVehicle, exit_time):
    return (
        veh.id, veh.demand, int(veh.equipped), vehicle_group(veh.equipped, veh.capable),
        veh.a_max, veh.spawn_time, exit_time, veh.fuel, veh.distance, "|".join(veh.route),
    )


def _cross_time(x0, v0, x1, v1, pos, dt):
    """Offset in (0, dt] at which a constant-acceleration step passes ``pos``."""
    acc = (v1 - v0) / dt
    target = pos - x0
    if abs(x1 - (x0 + 0.5 * (v0 + v1) * dt)) < 1e-9 and abs(acc) > 1e-12:
        disc = v0 * v0 + 2 * acc * target
        if disc >= 0:
            s = (-v0 + math.sqrt(disc)) / acc
            if 0 <= s <= dt + 1e-12:
                return min(max(s, 1e-12), dt), v0 + acc * s
    s = dt * target / (x1 - x0)
    s = min(max(s, 1e-12), dt)
    return s, v0 + (v1 - v0) * s / dt


def run(network: NetworkSpec, horizon: float, seed: int = 0, config: EngineConfig = EngineConfig()) -> RunResult:
    return World(network, seed, config).run(horizon)


def paired_run(network: NetworkSpec, seed: int = 0, horizon: float = 3600.0,
               config: EngineConfig = EngineConfig()) -> tuple[RunResult, RunResult]:
    """Baseline (no SAS vehicles) and SAS runs sharing the same arrival draws."""
    baseline = run(network.with_overrides(sas_penetration=0.0), horizon, seed, config)
    sas = run(network, horizon, seed, config)
    return baseline, sas
