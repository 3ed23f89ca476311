"""Continuous-time discrete-event simulator for an SAEV fleet.

Events are kept in a binary heap keyed by ``(time, priority, seq)``.  At equal
timestamps vehicle events run before arrivals, arrivals before abandonment and
cost refreshes, and policy passage events after all of them.  Every vehicle
event carries a token so that a superseded charge completion or trip leg is
ignored when it pops.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, replace
from enum import Enum, IntEnum

import numpy as np

from .baselines import charger_chasing_relocate
from .errors import ConfigError, LogicError
from .network import ENERGY_TOL, ChargePlan, CostModel, build_customer_nodes
from .queueing import CustomerRequest, HolQueueState
from .scheduler import EPS, EventKind

_UNSET = object()


class VehicleStatus(str, Enum):
    IDLE = "IDLE"
    CHARGING_IDLE = "CHARGING_IDLE"
    EN_ROUTE_PICKUP = "EN_ROUTE_PICKUP"
    EN_ROUTE_CHARGE = "EN_ROUTE_CHARGE"
    SERVING = "SERVING"
    RELOCATING = "RELOCATING"
    OFFLINE = "OFFLINE"


IDLE_STATES = (VehicleStatus.IDLE, VehicleStatus.CHARGING_IDLE, VehicleStatus.RELOCATING)
COMMITTED_STATES = (VehicleStatus.EN_ROUTE_PICKUP, VehicleStatus.EN_ROUTE_CHARGE, VehicleStatus.SERVING)


class SimEventKind(IntEnum):
    # value doubles as the equal-time priority
    VEHICLE_RETURN = 0
    STATION_ARRIVE = 1
    CHARGE_COMPLETE = 2
    PICKUP = 3
    ARRIVAL = 4
    ABANDON = 5
    COST_REFRESH = 6


@dataclass(order=True)
class SimEvent:
    time: float
    priority: int
    seq: int
    kind: SimEventKind = field(compare=False)
    payload: tuple = field(compare=False, default=())


@dataclass
class Vehicle:
    id: object
    location: str
    soc: float
    capacity: float
    status: VehicleStatus = VehicleStatus.IDLE
    committed_customer: int | None = None
    # bookkeeping
    initial_soc: float = math.nan
    consumed_kwh: list = field(default_factory=list, repr=False)
    charged_kwh: list = field(default_factory=list, repr=False)
    token: int = 0
    plan: ChargePlan | None = None
    leg: tuple | None = None  # (km, category, destination vertex)
    station: str | None = None  # zone of the station it is plugged into or queued at
    slot: int | None = None
    charge_power: float = 0.0
    charge_since: float = 0.0
    charge_target: float = 0.0
    reloc_arrive: float = 0.0
    reloc_soc: float = 0.0
    idle_since: float | None = None
    idle_time: float = 0.0
    assigned_at: float = 0.0
    quoted_cost: float = 0.0

    def __post_init__(self):
        if math.isnan(self.initial_soc):
            self.initial_soc = self.soc

    @property
    def plugged(self) -> bool:
        return self.slot is not None


def charge_step(vehicle: Vehicle, power_kw: float, minutes: float) -> Vehicle:
    """Linear charging for ``minutes`` at ``power_kw``, clipped at capacity."""
    if minutes < 0:
        raise ValueError("duration must be non-negative")
    soc = min(vehicle.capacity, vehicle.soc + power_kw * minutes / 60.0)
    return replace(vehicle, soc=soc)


def allocate_charger(free_slots, contenders):
    """Match free chargers to waiting vehicles.

    ``free_slots`` holds ``(slot, power_kw)``; ``contenders`` holds
    ``(vehicle_key, soc)``.  The most powerful chargers go first, to the
    lowest-SOC vehicles.  Returns ``(vehicle_key, slot)`` pairs.
    """
    slots = sorted(free_slots, key=lambda s: (-s[1], s[0]))
    queue = sorted(contenders, key=lambda c: (c[1], c[0]))
    return [(vk, slot) for (vk, _), (slot, _) in zip(queue, slots)]


@dataclass
class StationState:
    zone_id: str
    vertex: str
    powers: list
    occupant: list
    waiting: list = field(default_factory=list)

    @classmethod
    def from_zone(cls, zone):
        powers = []
        for p, n in sorted(zone.charger_specs, key=lambda pc: -pc[0]):
            powers.extend([float(p)] * n)
        return cls(zone.id, zone.station_vertex or zone.representative_vertex, powers, [None] * len(powers))

    def free_slots(self):
        return [(i, p) for i, (p, o) in enumerate(zip(self.powers, self.occupant)) if o is None]


@dataclass
class AssignmentRecord:
    time: float
    vehicle_id: object
    customer_id: object
    node_id: int
    node_label: str
    cost: float
    H: float
    trigger: str
    plan_cost: float

    HEADER = "time_min,vehicle_id,customer_id,node_id,cost_min,H_at_assign,node_label,trigger,plan_cost_min"

    def csv_row(self) -> str:
        return (
            f"{self.time:.6f},{self.vehicle_id},{self.customer_id},{self.node_id},"
            f"{self.cost:.6f},{self.H:.6f},{self.node_label},{self.trigger},{self.plan_cost:.6f}"
        )


@dataclass
class MetricsAccumulator:
    horizon: float = 0.0
    arrivals: int = 0
    assigned: int = 0
    picked_up: int = 0
    completed_trips: int = 0
    lost: int = 0
    wait_assign: list = field(default_factory=list)
    wait_pickup: list = field(default_factory=list)
    waiting_counts: list = field(default_factory=list)
    sum_hol: list = field(default_factory=list)
    km: dict = field(default_factory=lambda: {"pickup": 0.0, "detour": 0.0, "relocation": 0.0, "trip": 0.0})
    km_increments: list = field(default_factory=list, repr=False)
    quoted_cost_total: float = 0.0
    quote_gaps: list = field(default_factory=list)
    idle_fraction: list = field(default_factory=list)
    still_waiting: int = 0

    @property
    def dispatch_km(self) -> float:
        return math.fsum([self.km["pickup"], self.km["detour"], self.km["relocation"]])

    @property
    def mean_wait(self) -> float:
        return float(np.mean(self.wait_assign)) if self.wait_assign else 0.0

    @property
    def mean_wait_pickup(self) -> float:
        return float(np.mean(self.wait_pickup)) if self.wait_pickup else 0.0

    @property
    def mean_waiting_customers(self) -> float:
        return float(np.mean(self.waiting_counts)) if self.waiting_counts else 0.0

    @property
    def time_avg_cost(self) -> float:
        """Quoted dispatch minutes per simulated minute."""
        return self.quoted_cost_total / self.horizon if self.horizon > 0 else 0.0

    def summary(self) -> dict:
        return {
            "mean_wait_min": self.mean_wait,
            "mean_wait_to_pickup_min": self.mean_wait_pickup,
            "mean_waiting_customers": self.mean_waiting_customers,
            "lost_customers": self.lost,
            "total_dispatch_km": self.dispatch_km,
            "dispatch_km_pickup": self.km["pickup"],
            "dispatch_km_detour": self.km["detour"],
            "dispatch_km_relocation": self.km["relocation"],
            "trip_km": self.km["trip"],
            "quoted_cost_total_min": self.quoted_cost_total,
            "time_avg_dispatch_cost": self.time_avg_cost,
            "arrivals": self.arrivals,
            "assigned": self.assigned,
            "picked_up": self.picked_up,
            "completed_trips": self.completed_trips,
            "still_waiting": self.still_waiting,
            "mean_idle_fraction": float(np.mean(self.idle_fraction)) if self.idle_fraction else 0.0,
            "horizon_min": self.horizon,
        }


@dataclass
class SimResult:
    policy: str
    V: float | None
    seed: int
    metrics: MetricsAccumulator
    events: list
    assignments: list
    vehicles: list
    charger_log: list
    charger_slots: dict
    violations: list

    def waiting_series_csv(self) -> str:
        lines = ["minute,waiting_customers,sum_hol_wait"]
        for m, (n, h) in enumerate(zip(self.metrics.waiting_counts, self.metrics.sum_hol)):
            lines.append(f"{m},{n},{h:.6f}")
        return "\n".join(lines) + "\n"

    def assignments_csv(self) -> str:
        return "\n".join([AssignmentRecord.HEADER] + [a.csv_row() for a in self.assignments]) + "\n"

    def events_log(self) -> str:
        return "\n".join(self.events) + ("\n" if self.events else "")


class Simulator:
    """One isolated simulation run; also the ``DispatchSystem`` seen by policies."""

    def __init__(
        self,
        scenario,
        policy,
        *,
        horizon: float | None = None,
        seed: int | None = None,
        max_wait=_UNSET,
        cost_refresh_period: float | None = None,
        record_log: bool = True,
    ):
        self.scenario = scenario
        self.policy = policy
        self.horizon = float(scenario.horizon if horizon is None else horizon)
        if not self.horizon > 0:
            raise ConfigError("horizon must be positive")
        self.seed = int(scenario.seed if seed is None else seed)
        self.max_wait = scenario.max_wait if max_wait is _UNSET else max_wait
        if self.max_wait is not None and not self.max_wait > 0:
            raise ConfigError("max_wait must be positive or None")
        self.refresh_period = float(cost_refresh_period or scenario.cost_refresh_period)
        self.record_log = record_log

        battery = scenario.battery
        if getattr(policy, "gasoline", False):
            battery = replace(battery, unlimited=True)
        self.battery = battery
        self.zones = list(scenario.zones)
        self.zone_by_id = {z.id: z for z in self.zones}
        self.zone_pos = {z.id: i for i, z in enumerate(self.zones)}
        self.nodes = build_customer_nodes(self.zones, battery.level_count)
        self.model = CostModel(scenario.graph, self.zones, self.nodes, battery)
        self.stations = {z.id: StationState.from_zone(z) for z in self.zones if z.has_station}
        self.station_at_vertex = {s.vertex: s for s in self.stations.values()}

        specs = scenario.fleet.materialize(self.zones, self.seed)
        self.vehicles = [
            Vehicle(s.id, s.vertex, float(s.soc_kwh), float(scenario.fleet.capacity_kwh), VehicleStatus.OFFLINE)
            for s in specs
        ]
        self._available_at = [float(s.available_at) for s in specs]
        self.customers = {}
        self._trips = []
        L = battery.level_count
        for r in scenario.requests(self.seed, self.horizon):
            node = self.zone_pos[r.origin_zone] * L + (r.level - 1)
            req = replace(r, node_id=node)
            self.customers[req.id] = req
            self._trips.append(req)

        M, N = len(self.vehicles), len(self.nodes)
        self.now = 0.0
        self.queues = [HolQueueState(c) for c in range(N)]
        self.hol = np.full(N, np.inf)
        self.costs = np.full((M, N), np.inf)
        self.idle_mask = np.zeros(M, dtype=bool)
        self._n_occ = 0
        self._hol_sum = 0.0
        self._n_waiting = 0
        self._next_sample = 0

        self.metrics = MetricsAccumulator(horizon=self.horizon)
        self.events: list[str] = []
        self.assignments: list[AssignmentRecord] = []
        self.charger_log: list[tuple] = []
        self.violations: list[str] = []
        self._heap: list[SimEvent] = []
        self._seq = 0
        self._trip_ptr = 0
        self._pickup_at: dict = {}

    # DispatchSystem ---------------------------------------------------------

    def commit(self, v: int, c: int, trigger: str) -> None:
        veh = self.vehicles[v]
        if veh.status not in IDLE_STATES:
            raise LogicError(f"vehicle {veh.id} is not idle ({veh.status.value})")
        quoted = float(self.costs[v, c])
        if not math.isfinite(quoted):
            raise LogicError(f"vehicle {veh.id} has no feasible route to node {c}")
        cid, stamp = self.queues[c].pop()
        self._n_waiting -= 1
        self._refresh_hol(c)
        H = self.now - stamp
        self.metrics.assigned += 1
        self.metrics.wait_assign.append(H)
        self.metrics.quoted_cost_total += quoted
        self._leave_idle(veh)
        self._clear_row(v)
        plan_cost = self._execute_assignment(v, self.customers[cid], quoted)
        node = self.nodes[c]
        self.assignments.append(
            AssignmentRecord(self.now, veh.id, cid, c, node.label, quoted, H, trigger, plan_cost)
        )
        self._log("ASSIGN", f"v={veh.id};c={cid};node={node.label}",
                  f"cost={quoted:.6f};H={H:.6f};trigger={trigger}")

    # helpers ----------------------------------------------------------------

    def _log(self, kind: str, ids: str, detail: str = "") -> None:
        if self.record_log:
            self.events.append(f"{self.now:.6f},{kind},{ids},{detail}")

    def _push(self, time: float, kind: SimEventKind, payload=()) -> None:
        self._seq += 1
        heapq.heappush(self._heap, SimEvent(time, int(kind), self._seq, kind, payload))

    def _refresh_hol(self, c: int) -> None:
        old = self.hol[c]
        if math.isfinite(old):
            self._n_occ -= 1
            self._hol_sum -= old
        new = self.queues[c].hol_arrival
        if new is None:
            self.hol[c] = np.inf
        else:
            self.hol[c] = new
            self._n_occ += 1
            self._hol_sum += new

    def _advance(self, t: float) -> None:
        # minute m is sampled after every event stamped <= m has been applied
        limit = min(t, self.horizon)
        while self._next_sample < limit:
            m = self._next_sample
            self.metrics.waiting_counts.append(self._n_waiting)
            self.metrics.sum_hol.append(self._n_occ * m - self._hol_sum if self._n_occ else 0.0)
            self._next_sample += 1
        self.now = t

    def _enter_idle(self, veh: Vehicle) -> None:
        if veh.idle_since is None:
            veh.idle_since = self.now

    def _leave_idle(self, veh: Vehicle) -> None:
        if veh.idle_since is not None:
            veh.idle_time += self.now - veh.idle_since
            veh.idle_since = None

    def _clear_row(self, v: int) -> None:
        self.costs[v, :] = np.inf
        self.idle_mask[v] = False

    def _set_row(self, v: int) -> None:
        veh = self.vehicles[v]
        if veh.status == VehicleStatus.RELOCATING:
            row = self.model.cost_row(veh.leg[2], veh.reloc_soc, veh.capacity)
            row = row + max(veh.reloc_arrive - self.now, 0.0)
        else:
            self._sync_charge(veh)
            row = self.model.cost_row(veh.location, veh.soc, veh.capacity)
        self.costs[v, :] = row
        self.idle_mask[v] = True

    def _consume(self, veh: Vehicle, km: float, category: str) -> None:
        e = float(self.battery.energy(km))
        veh.soc -= e
        veh.consumed_kwh.append(e)
        self.metrics.km[category] += km
        if category != "trip":
            self.metrics.km_increments.append(km)
        if veh.soc < -ENERGY_TOL:
            self.violations.append(f"t={self.now:.6f} vehicle {veh.id} soc {veh.soc:.9f} below zero")
        self._log("LEG", f"v={veh.id}", f"kind={category};km={km:.6f};kwh={e:.9f};soc={veh.soc:.9f}")

    def _finish_leg(self, veh: Vehicle) -> None:
        km, category, dest = veh.leg
        veh.location = dest
        veh.leg = None
        self._consume(veh, km, category)

    def _sync_charge(self, veh: Vehicle, final: bool = False) -> None:
        if not veh.plugged:
            return
        room = veh.charge_target - veh.soc
        if final:
            add = max(room, 0.0)
        else:
            add = min(veh.charge_power * (self.now - veh.charge_since) / 60.0, max(room, 0.0))
        if add > 0:
            veh.soc += add
            veh.charged_kwh.append(add)
        veh.charge_since = self.now

    # charging ---------------------------------------------------------------

    def _request_charger(self, v: int, st: StationState, target: float) -> None:
        veh = self.vehicles[v]
        veh.station = st.zone_id
        veh.charge_target = min(target, veh.capacity)
        st.waiting.append(v)
        self._log("CHARGE_REQUEST", f"v={veh.id};station={st.zone_id}", f"target={veh.charge_target:.6f}")
        self._allocate(st)

    def _allocate(self, st: StationState) -> None:
        free = st.free_slots()
        if not free or not st.waiting:
            return
        pairs = allocate_charger(free, [(v, self.vehicles[v].soc) for v in st.waiting])
        for v, slot in pairs:
            st.waiting.remove(v)
            self._plug(v, st, slot)

    def _plug(self, v: int, st: StationState, slot: int) -> None:
        veh = self.vehicles[v]
        st.occupant[slot] = v
        veh.slot = slot
        veh.station = st.zone_id
        veh.charge_power = st.powers[slot]
        veh.charge_since = self.now
        veh.token += 1
        busy = sum(o is not None for o in st.occupant)
        self.charger_log.append((self.now, st.zone_id, +1, busy))
        if busy > len(st.powers):
            self.violations.append(f"station {st.zone_id} over capacity at t={self.now:.6f}")
        if veh.status == VehicleStatus.IDLE:
            veh.status = VehicleStatus.CHARGING_IDLE
        self._log("PLUG", f"v={veh.id};station={st.zone_id};slot={slot}", f"power={veh.charge_power:g}")
        need = max(veh.charge_target - veh.soc, 0.0)
        self._push(self.now + need / veh.charge_power * 60.0, SimEventKind.CHARGE_COMPLETE, (v, veh.token))

    def _unplug(self, v: int, final: bool = False) -> None:
        veh = self.vehicles[v]
        st = self.stations[veh.station]
        if veh.plugged:
            self._sync_charge(veh, final=final)
            st.occupant[veh.slot] = None
            self.charger_log.append((self.now, st.zone_id, -1, sum(o is not None for o in st.occupant)))
            self._log("UNPLUG", f"v={veh.id};station={st.zone_id};slot={veh.slot}", f"soc={veh.soc:.9f}")
            veh.slot = None
            veh.token += 1
            if veh.status == VehicleStatus.CHARGING_IDLE:
                veh.status = VehicleStatus.IDLE
        elif v in st.waiting:
            st.waiting.remove(v)
        veh.station = None
        self._allocate(st)

    # assignment execution ---------------------------------------------------

    def _execute_assignment(self, v: int, cust: CustomerRequest, quoted: float) -> float:
        veh = self.vehicles[v]
        node = self.nodes[cust.node_id]
        veh.committed_customer = cust.id
        veh.assigned_at = self.now
        veh.quoted_cost = quoted
        if veh.status == VehicleStatus.RELOCATING:
            plan = self.model.plan(veh.leg[2], veh.reloc_soc, veh.capacity, node)
            if plan is None:
                raise LogicError(f"vehicle {veh.id} cannot serve node {node.label} after relocating")
            veh.plan = plan
            veh.status = VehicleStatus.EN_ROUTE_CHARGE
            return plan.cost + max(veh.reloc_arrive - self.now, 0.0)
        self._sync_charge(veh)
        plan = self.model.plan(veh.location, veh.soc, veh.capacity, node)
        if plan is None:
            raise LogicError(f"vehicle {veh.id} cannot serve node {node.label}")
        veh.plan = plan
        if veh.station is not None and plan.charges and plan.station == veh.station:
            # keep the plug (or the place in line) and charge to the plan target
            veh.status = VehicleStatus.EN_ROUTE_CHARGE
            veh.charge_target = plan.target_kwh
            if veh.plugged:
                veh.token += 1
                need = max(veh.charge_target - veh.soc, 0.0)
                self._push(self.now + need / veh.charge_power * 60.0, SimEventKind.CHARGE_COMPLETE, (v, veh.token))
            return plan.cost
        if veh.station is not None:
            self._unplug(v)
        veh.status = VehicleStatus.EN_ROUTE_PICKUP
        self._start_plan(v)
        return plan.cost

    def _start_plan(self, v: int) -> None:
        veh = self.vehicles[v]
        plan = veh.plan
        veh.token += 1
        if plan.charges:
            veh.status = VehicleStatus.EN_ROUTE_CHARGE
            st = self.stations[plan.station]
            veh.leg = (plan.to_station_km, "detour", st.vertex)
            self._push(self.now + plan.to_station_min, SimEventKind.STATION_ARRIVE, (v, veh.token))
        else:
            veh.status = VehicleStatus.EN_ROUTE_PICKUP
            self._depart_to_pickup(v, plan.to_pickup_min, plan.to_pickup_km)

    def _depart_to_pickup(self, v: int, minutes: float, km: float) -> None:
        veh = self.vehicles[v]
        veh.status = VehicleStatus.EN_ROUTE_PICKUP
        cust = self.customers[veh.committed_customer]
        pickup = self.zone_by_id[cust.origin_zone].representative_vertex
        veh.leg = (km, "pickup", pickup)
        veh.token += 1
        self._push(self.now + minutes, SimEventKind.PICKUP, (v, veh.token))

    def _start_relocation(self, v: int) -> None:
        veh = self.vehicles[v]
        target = charger_chasing_relocate(veh.location, self.model)
        if target is None:
            return
        zone, minutes, km = target
        st = self.stations[zone.id]
        veh.status = VehicleStatus.RELOCATING
        veh.leg = (km, "relocation", st.vertex)
        veh.reloc_arrive = self.now + minutes
        veh.reloc_soc = veh.soc - float(self.battery.energy(km))
        veh.token += 1
        self._log("RELOCATE", f"v={veh.id};station={zone.id}", f"eta={veh.reloc_arrive:.6f};km={km:.6f}")
        self._push(veh.reloc_arrive, SimEventKind.STATION_ARRIVE, (v, veh.token))
        self._set_row(v)

    def _become_idle_here(self, v: int) -> None:
        """Shared tail of a drop-off or entry: auto-plug, cost row, policy call."""
        veh = self.vehicles[v]
        veh.status = VehicleStatus.IDLE
        veh.committed_customer = None
        veh.plan = None
        self._enter_idle(veh)
        st = self.station_at_vertex.get(veh.location)
        if st is not None and not self.battery.unlimited and veh.soc < veh.capacity - ENERGY_TOL and st.free_slots():
            self._request_charger(v, st, veh.capacity)
        self._set_row(v)
        self.policy.on_event(EventKind.VEHICLE_RETURN, self, v)
        if (
            getattr(self.policy, "relocate_to_chargers", False)
            and not self.battery.unlimited
            and veh.status == VehicleStatus.IDLE
            and veh.station is None
        ):
            self._start_relocation(v)

    # event handlers ---------------------------------------------------------

    def _on_vehicle_return(self, v: int, token: int) -> None:
        veh = self.vehicles[v]
        if veh.status == VehicleStatus.OFFLINE:
            self._log("ENTER", f"v={veh.id}", f"vertex={veh.location};soc={veh.soc:.6f}")
        else:
            if token != veh.token:
                return
            self._finish_leg(veh)
            self.metrics.completed_trips += 1
            self._log("DROPOFF", f"v={veh.id};c={veh.committed_customer}", f"vertex={veh.location}")
        self._become_idle_here(v)

    def _on_station_arrive(self, v: int, token: int) -> None:
        veh = self.vehicles[v]
        if token != veh.token:
            return
        self._finish_leg(veh)
        st = self.station_at_vertex[veh.location]
        if veh.committed_customer is None:
            veh.status = VehicleStatus.IDLE
            self._log("STATION_ARRIVE", f"v={veh.id};station={st.zone_id}", "idle")
            if veh.soc < veh.capacity - ENERGY_TOL:
                self._request_charger(v, st, veh.capacity)
            self._set_row(v)
            self.policy.on_event(EventKind.VEHICLE_UPDATE, self, v)
            return
        plan = veh.plan
        self._log("STATION_ARRIVE", f"v={veh.id};station={st.zone_id}", f"c={veh.committed_customer}")
        if plan.charges and plan.station == st.zone_id:
            if plan.target_kwh <= veh.soc + ENERGY_TOL:
                self._depart_to_pickup(v, plan.to_pickup_min, plan.to_pickup_km)
            else:
                self._request_charger(v, st, plan.target_kwh)
        else:
            self._start_plan(v)

    def _on_charge_complete(self, v: int, token: int) -> None:
        veh = self.vehicles[v]
        if token != veh.token or not veh.plugged:
            return
        self._unplug(v, final=True)
        if veh.committed_customer is not None:
            self._depart_to_pickup(v, veh.plan.to_pickup_min, veh.plan.to_pickup_km)
            return
        veh.status = VehicleStatus.IDLE
        self._set_row(v)
        self.policy.on_event(EventKind.VEHICLE_UPDATE, self, v)

    def _on_pickup(self, v: int, token: int) -> None:
        veh = self.vehicles[v]
        if token != veh.token:
            return
        self._finish_leg(veh)
        cust = self.customers[veh.committed_customer]
        self.metrics.picked_up += 1
        self.metrics.wait_pickup.append(self.now - cust.arrival_time)
        realized = self.now - veh.assigned_at
        self.metrics.quote_gaps.append(realized - veh.quoted_cost)
        if realized > veh.quoted_cost + 1e-6:
            self._log("QUOTE_MISS", f"v={veh.id};c={cust.id}",
                      f"quoted={veh.quoted_cost:.6f};realized={realized:.6f}")
        self._log("PICKUP", f"v={veh.id};c={cust.id}", f"wait={self.now - cust.arrival_time:.6f}")
        veh.status = VehicleStatus.SERVING
        dest = self.zone_by_id[cust.dest_zone].dropoff_vertex
        minutes, km = self.model.travel(veh.location, dest)
        if cust.trip_duration is not None:
            minutes = float(cust.trip_duration)
        if not (math.isfinite(minutes) and math.isfinite(km)):
            raise LogicError(f"trip of customer {cust.id} has no route to zone {cust.dest_zone}")
        veh.leg = (km, "trip", dest)
        veh.token += 1
        self._push(self.now + minutes, SimEventKind.VEHICLE_RETURN, (v, veh.token))

    def _on_arrival(self, cid) -> None:
        self._push_next_arrival()
        cust = self.customers[cid]
        c = cust.node_id
        self.metrics.arrivals += 1
        self.queues[c].push(cid, cust.arrival_time)
        self._n_waiting += 1
        if len(self.queues[c]) == 1:
            self._refresh_hol(c)
        self._log("ARRIVAL", f"c={cid};node={self.nodes[c].label}", f"dest={cust.dest_zone}")
        if self.max_wait is not None:
            self._push(cust.arrival_time + self.max_wait, SimEventKind.ABANDON, (cid,))
        self.policy.on_event(EventKind.ARRIVAL, self)

    def _on_abandon(self, cid) -> None:
        c = self.customers[cid].node_id
        q = self.queues[c]
        was_hol = q.occupied and q.backlog[0][0] == cid
        if not q.remove(cid):
            return
        self._n_waiting -= 1
        self.metrics.lost += 1
        if was_hol:
            self._refresh_hol(c)
        self._log("ABANDON", f"c={cid};node={self.nodes[c].label}", "")

    def _on_cost_refresh(self) -> None:
        for v, veh in enumerate(self.vehicles):
            if veh.status in (VehicleStatus.CHARGING_IDLE, VehicleStatus.RELOCATING):
                self._set_row(v)
        self._push(self.now + self.refresh_period, SimEventKind.COST_REFRESH)
        self.policy.on_event(EventKind.COST_REFRESH, self)

    def _push_next_arrival(self) -> None:
        if self._trip_ptr < len(self._trips):
            r = self._trips[self._trip_ptr]
            self._trip_ptr += 1
            self._push(r.arrival_time, SimEventKind.ARRIVAL, (r.id,))

    # main loop ----------------------------------------------------------------

    def run(self) -> SimResult:
        for v, t in enumerate(self._available_at):
            self._push(t, SimEventKind.VEHICLE_RETURN, (v, 0))
        self._push_next_arrival()
        self._push(self.refresh_period, SimEventKind.COST_REFRESH)
        handlers = {
            SimEventKind.VEHICLE_RETURN: lambda p: self._on_vehicle_return(*p),
            SimEventKind.STATION_ARRIVE: lambda p: self._on_station_arrive(*p),
            SimEventKind.CHARGE_COMPLETE: lambda p: self._on_charge_complete(*p),
            SimEventKind.PICKUP: lambda p: self._on_pickup(*p),
            SimEventKind.ARRIVAL: lambda p: self._on_arrival(*p),
            SimEventKind.ABANDON: lambda p: self._on_abandon(*p),
            SimEventKind.COST_REFRESH: lambda p: self._on_cost_refresh(),
        }
        stuck = 0
        while True:
            t_ev = self._heap[0].time if self._heap else math.inf
            t_dec = self.policy.next_decision_time(self)
            if t_dec < t_ev:
                t = max(t_dec, self.now)
                if t > self.horizon:
                    break
                stuck = stuck + 1 if t == self.now else 0
                if stuck > 1000:
                    raise LogicError(f"decision epoch at t={t} does not make progress")
                self._advance(t)
                self.policy.on_event(EventKind.PASSAGE, self)
                continue
            if t_ev > self.horizon:
                break
            ev = heapq.heappop(self._heap)
            self._advance(ev.time)
            handlers[ev.kind](ev.payload)
        self._advance(self.horizon)
        return self._finish()

    def _finish(self) -> SimResult:
        for veh, t0 in zip(self.vehicles, self._available_at):
            self._sync_charge(veh)
            self._leave_idle(veh)
            span = self.horizon - t0
            self.metrics.idle_fraction.append(veh.idle_time / span if span > 0 else 0.0)
        self.metrics.still_waiting = self._n_waiting
        V = getattr(self.policy, "V", None)
        result = SimResult(
            policy=self.policy.name,
            V=V,
            seed=self.seed,
            metrics=self.metrics,
            events=self.events,
            assignments=self.assignments,
            vehicles=self.vehicles,
            charger_log=self.charger_log,
            charger_slots={z: len(s.powers) for z, s in self.stations.items()},
            violations=list(self.violations),
        )
        result.violations.extend(audit(result))
        return result


def run(scenario, policy, horizon: float | None = None, seed: int | None = None, **kwargs) -> SimResult:
    """Simulate ``scenario`` under ``policy`` to ``horizon``; deterministic per seed."""
    return Simulator(scenario, policy, horizon=horizon, seed=seed, **kwargs).run()


# audits ---------------------------------------------------------------------

def audit(result: SimResult, energy_tol: float = 1e-9, viability_tol: float = EPS) -> list[str]:
    """Conservation and viability checks over a finished run; returns violation messages."""
    problems = []
    for veh in result.vehicles:
        expected = math.fsum([veh.initial_soc, *[-e for e in veh.consumed_kwh], *veh.charged_kwh])
        if abs(expected - veh.soc) > energy_tol * max(1.0, veh.capacity):
            problems.append(f"energy mismatch for vehicle {veh.id}: {veh.soc!r} vs {expected!r}")
        if veh.soc > veh.capacity + energy_tol:
            problems.append(f"vehicle {veh.id} above capacity")
        committed = veh.committed_customer is not None
        if committed != (veh.status in COMMITTED_STATES):
            problems.append(f"vehicle {veh.id} status {veh.status.value} inconsistent with commitment")
    m = result.metrics
    if m.arrivals != m.assigned + m.lost + m.still_waiting:
        problems.append(
            f"customer conservation broken: {m.arrivals} != {m.assigned} + {m.lost} + {m.still_waiting}"
        )
    busy: dict = {}
    for _, zone, delta, _ in result.charger_log:
        busy[zone] = busy.get(zone, 0) + delta
        if busy[zone] > result.charger_slots[zone] or busy[zone] < 0:
            problems.append(f"charger occupancy out of range at station {zone}")
            break
    if result.V is not None:
        for a in result.assignments:
            if not a.H - result.V * a.cost > -viability_tol:
                problems.append(
                    f"non-viable assignment at t={a.time:.6f}: H={a.H} V*C={result.V * a.cost}"
                )
    return problems
