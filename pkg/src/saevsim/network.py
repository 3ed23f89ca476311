"""Road graph, customer-charge nodes and charging-aware dispatch costs.

A customer node is a (zone, required charge level) pair.  The dispatch cost
``C[v, c]`` is the number of minutes vehicle ``v`` needs to reach the pickup
vertex of node ``c``, including an en-route charging stop when its state of
charge is too low to serve the node directly.
"""

from __future__ import annotations

import csv
import heapq
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, InputError

# energy slack when comparing kWh quantities that went through float arithmetic
ENERGY_TOL = 1e-9


@dataclass(frozen=True)
class Link:
    source: str
    target: str
    travel_time: float
    distance: float


class RoadGraph:
    """Directed road network with per-link travel time (min) and length (km)."""

    def __init__(
        self,
        links: Iterable[Link],
        vertices: Iterable[str] = (),
        station_vertices: Iterable[str] = (),
    ):
        links = list(links)
        order: dict[str, int] = {}
        for v in vertices:
            order.setdefault(str(v), len(order))
        for link in links:
            order.setdefault(link.source, len(order))
            order.setdefault(link.target, len(order))
        self.vertices: tuple[str, ...] = tuple(order)
        self.index = order
        self.links = tuple(links)
        self.station_vertices = frozenset(station_vertices)

        unknown = self.station_vertices - set(order)
        if unknown:
            raise ConfigError(f"station vertices not in graph: {sorted(unknown)}")

        self._adj: list[list[tuple[int, float, float]]] = [[] for _ in order]
        for link in links:
            t, d = float(link.travel_time), float(link.distance)
            if not (math.isfinite(t) and math.isfinite(d)) or t < 0 or d < 0:
                raise ConfigError(
                    f"link {link.source}->{link.target} has invalid weights ({t}, {d})"
                )
            if link.source == link.target:
                continue
            if t <= 0:
                raise ConfigError(
                    f"link {link.source}->{link.target} must have travel_time > 0"
                )
            self._adj[order[link.source]].append((order[link.target], t, d))
        self._rows: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def __len__(self):
        return len(self.vertices)

    def __contains__(self, vertex):
        return vertex in self.index

    def shortest_paths_from(self, source: int) -> tuple[np.ndarray, np.ndarray]:
        """Label-setting search from vertex index ``source``.

        Returns ``(minutes, km)`` arrays indexed by vertex; unreachable entries
        are ``inf``.  Distances are those of the time-shortest path, with ties
        on time resolved toward the shorter path.  Rows are cached.
        """
        row = self._rows.get(source)
        if row is not None:
            return row
        n = len(self.vertices)
        best_t = np.full(n, np.inf)
        best_d = np.full(n, np.inf)
        best_t[source] = 0.0
        best_d[source] = 0.0
        done = np.zeros(n, dtype=bool)
        heap = [(0.0, 0.0, source)]
        while heap:
            t, d, u = heapq.heappop(heap)
            if done[u]:
                continue
            done[u] = True
            for w, lt, ld in self._adj[u]:
                nt, nd = t + lt, d + ld
                if nt < best_t[w] or (nt == best_t[w] and nd < best_d[w]):
                    best_t[w] = nt
                    best_d[w] = nd
                    heapq.heappush(heap, (nt, nd, w))
        best_t.setflags(write=False)
        best_d.setflags(write=False)
        self._rows[source] = (best_t, best_d)
        return best_t, best_d


def sssp(graph: RoadGraph, source: str) -> dict[str, float]:
    """Shortest travel times (minutes) from ``source``; unreachable vertices are omitted."""
    if source not in graph.index:
        raise InputError(f"unknown source vertex {source!r}")
    times, _ = graph.shortest_paths_from(graph.index[source])
    return {v: float(times[i]) for i, v in enumerate(graph.vertices) if math.isfinite(times[i])}


@dataclass(frozen=True)
class Zone:
    id: str
    representative_vertex: str
    charger_specs: tuple[tuple[float, int], ...] = ()
    station_vertex: str | None = None

    @property
    def has_station(self) -> bool:
        return len(self.charger_specs) > 0

    @property
    def dropoff_vertex(self) -> str:
        # trips ending in a station zone end at the station so the vehicle can plug in
        if self.has_station and self.station_vertex is not None:
            return self.station_vertex
        return self.representative_vertex

    @property
    def charger_count(self) -> int:
        return sum(n for _, n in self.charger_specs)

    @property
    def max_power(self) -> float:
        return max((p for p, _ in self.charger_specs), default=0.0)


@dataclass(frozen=True)
class CustomerNode:
    index: int
    zone_id: str
    level: int

    @property
    def label(self) -> str:
        return f"{self.zone_id}:{self.level}"


def build_customer_nodes(zones: Sequence[Zone], levels: int) -> list[CustomerNode]:
    """Expand every zone into ``levels`` customer nodes, zone-major order."""
    if levels < 1:
        raise ConfigError("levels must be >= 1")
    seen = set()
    for z in zones:
        if z.id in seen:
            raise ConfigError(f"duplicate zone id {z.id!r}")
        seen.add(z.id)
    nodes = []
    for z in zones:
        for level in range(1, levels + 1):
            nodes.append(CustomerNode(len(nodes), z.id, level))
    return nodes


@dataclass(frozen=True)
class BatteryModel:
    """Linear consumption and charging model.

    ``level_count`` equal bands: level ``k`` requires ``k / level_count`` of the
    pack at pickup.  ``unlimited`` turns energy bookkeeping off entirely (used
    by the gasoline proxy policy).
    """

    km_per_kwh: float = 7.0
    level_count: int = 5
    unlimited: bool = False
    worst_case_reserve: bool = True
    charge_to_full: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.km_per_kwh) and self.km_per_kwh > 0):
            raise ConfigError("km_per_kwh must be finite and positive")
        if self.level_count < 1:
            raise ConfigError("level_count must be >= 1")

    def energy(self, km):
        if self.unlimited:
            return np.zeros_like(km, dtype=float) if isinstance(km, np.ndarray) else 0.0
        return km / self.km_per_kwh

    def level_fraction(self, level: int) -> float:
        return level / self.level_count

    def covering_level(self, kwh: float, capacity: float) -> int:
        """Smallest level whose band covers ``kwh`` (clamped to 1..L)."""
        k = math.ceil(kwh / capacity * self.level_count - 1e-12)
        return min(max(k, 1), self.level_count)

    @staticmethod
    def charge_minutes(deficit_kwh: float, power_kw: float) -> float:
        return max(deficit_kwh, 0.0) / power_kw * 60.0


@dataclass(frozen=True)
class ChargePlan:
    """How a vehicle reaches a pickup: directly, or via one charging stop."""

    cost: float
    station: str | None = None
    target_kwh: float | None = None
    charge_minutes: float = 0.0
    to_station_min: float = 0.0
    to_station_km: float = 0.0
    to_pickup_min: float = 0.0
    to_pickup_km: float = 0.0

    @property
    def charges(self) -> bool:
        return self.station is not None


@dataclass
class CostMatrix:
    """Dispatch costs in minutes; ``inf`` encodes an absent (infeasible) arc."""

    vehicle_ids: list
    node_ids: list[int]
    costs: np.ndarray
    computed_at: float = 0.0

    def get(self, vehicle_id, node_id) -> float | None:
        c = self.costs[self.vehicle_ids.index(vehicle_id), self.node_ids.index(node_id)]
        return float(c) if math.isfinite(c) else None

    def to_nested(self) -> list[list[float | None]]:
        return [[float(c) if math.isfinite(c) else None for c in row] for row in self.costs]


class CostModel:
    """Precomputed network data for evaluating dispatch costs quickly."""

    def __init__(
        self,
        graph: RoadGraph,
        zones: Sequence[Zone],
        nodes: Sequence[CustomerNode],
        battery: BatteryModel,
    ):
        self.graph = graph
        self.zones = {z.id: z for z in zones}
        self.zone_list = list(zones)
        self.nodes = list(nodes)
        self.battery = battery
        for z in zones:
            for v in (z.representative_vertex, z.station_vertex):
                if v is not None and v not in graph.index:
                    raise ConfigError(f"zone {z.id!r} references unknown vertex {v!r}")

        self.stations = [z for z in zones if z.has_station]
        self.station_index = {z.id: i for i, z in enumerate(self.stations)}
        self._st_vertex = np.array(
            [graph.index[z.station_vertex or z.representative_vertex] for z in self.stations],
            dtype=int,
        )
        self._st_power = np.array([z.max_power for z in self.stations], dtype=float)
        self._pickup = np.array(
            [graph.index[self.zones[n.zone_id].representative_vertex] for n in nodes], dtype=int
        )
        self._level_frac = np.array([battery.level_fraction(n.level) for n in nodes])

        # station -> pickup legs, one row per station
        if self.stations:
            rows = [graph.shortest_paths_from(int(s)) for s in self._st_vertex]
            self._sp_t = np.array([r[0][self._pickup] for r in rows])
            self._sp_e = battery.energy(np.array([r[1][self._pickup] for r in rows]))
        else:
            self._sp_t = np.zeros((0, len(nodes)))
            self._sp_e = np.zeros((0, len(nodes)))

        self._reserve_by_zone = {z.id: self._worst_case_kwh(z) for z in zones}
        self._reserve = np.array([self._reserve_by_zone[n.zone_id] for n in nodes])
        self._need_cache: dict[float, np.ndarray] = {}

    def vertex_index(self, vertex: str) -> int:
        return self.graph.index[vertex]

    def nearest_station(self, vertex: str) -> tuple[Zone, float, float] | None:
        """Closest station by travel time as ``(zone, minutes, km)``; lowest index on ties."""
        if not self.stations:
            return None
        t, d = self.graph.shortest_paths_from(self.graph.index[vertex])
        ts = t[self._st_vertex]
        i = int(np.argmin(ts))
        if not math.isfinite(ts[i]):
            return None
        return self.stations[i], float(ts[i]), float(d[self._st_vertex[i]])

    def _worst_case_kwh(self, zone: Zone) -> float:
        if not self.battery.worst_case_reserve:
            return 0.0
        t, d = self.graph.shortest_paths_from(self.graph.index[zone.representative_vertex])
        worst = 0.0
        for dest in self.zone_list:
            j = self.graph.index[dest.dropoff_vertex]
            if not math.isfinite(t[j]):
                continue
            near = self.nearest_station(dest.dropoff_vertex)
            reach_km = near[2] if near is not None else 0.0
            worst = max(worst, float(d[j]) + reach_km)
        return float(self.battery.energy(worst))

    def reserve_kwh(self, zone_id: str) -> float:
        """Energy for the longest trip out of ``zone_id`` plus the hop to a station."""
        return self._reserve_by_zone[zone_id]

    def need_vector(self, capacity: float) -> np.ndarray:
        """kWh a vehicle must hold at pickup, per customer node."""
        need = self._need_cache.get(capacity)
        if need is None:
            if self.battery.unlimited:
                need = np.zeros(len(self.nodes))
            else:
                need = np.maximum(self._level_frac * capacity, self._reserve)
            need.setflags(write=False)
            self._need_cache[capacity] = need
        return need

    def need_kwh(self, node: CustomerNode, capacity: float) -> float:
        return float(self.need_vector(capacity)[node.index])

    def _station_totals(self, u: int, soc: float, capacity: float, cols):
        """Detour cost through every station for the node columns ``cols``."""
        t_u, d_u = self.graph.shortest_paths_from(u)
        ts = t_u[self._st_vertex]
        es = self.battery.energy(d_u[self._st_vertex])
        arrive = soc - es
        reach_ok = np.isfinite(ts) & (arrive >= -ENERGY_TOL)
        need = self.need_vector(capacity)[cols]
        sp_t = self._sp_t[:, cols]
        sp_e = self._sp_e[:, cols]
        target = need[None, :] + sp_e
        feasible = reach_ok[:, None] & np.isfinite(sp_t) & (target <= capacity + ENERGY_TOL)
        if self.battery.charge_to_full:
            target = np.where(feasible, capacity, target)
        deficit = np.maximum(target - arrive[:, None], 0.0)
        charge = deficit / self._st_power[:, None] * 60.0
        with np.errstate(invalid="ignore"):
            total = ts[:, None] + charge + sp_t
        total = np.where(feasible, total, np.inf)
        return total, ts, es, target, charge, sp_t, sp_e

    def cost_row(self, vertex: str, soc: float, capacity: float) -> np.ndarray:
        """Dispatch cost to every node for a vehicle at ``vertex`` holding ``soc`` kWh."""
        u = self.graph.index[vertex]
        t_u, d_u = self.graph.shortest_paths_from(u)
        tp = t_u[self._pickup]
        ep = self.battery.energy(d_u[self._pickup])
        need = self.need_vector(capacity)
        direct = np.isfinite(tp) & (soc - ep >= need - ENERGY_TOL)
        if direct.all() or not self.stations:
            return np.where(direct, tp, np.inf)
        cols = np.flatnonzero(~direct)
        total = self._station_totals(u, soc, capacity, cols)[0]
        row = np.where(direct, tp, np.inf)
        row[cols] = total.min(axis=0)
        return row

    def plan(self, vertex: str, soc: float, capacity: float, node: CustomerNode) -> ChargePlan | None:
        """Cheapest way to reach ``node``; ``None`` when infeasible even with a full charge."""
        u = self.graph.index[vertex]
        t_u, d_u = self.graph.shortest_paths_from(u)
        c = node.index
        tp = float(t_u[self._pickup[c]])
        ep = float(self.battery.energy(d_u[self._pickup[c]]))
        if math.isfinite(tp) and soc - ep >= self.need_kwh(node, capacity) - ENERGY_TOL:
            return ChargePlan(cost=tp, to_pickup_min=tp, to_pickup_km=float(d_u[self._pickup[c]]))
        if not self.stations:
            return None
        total, ts, es, target, charge, sp_t, sp_e = self._station_totals(u, soc, capacity, [c])
        s = int(np.argmin(total[:, 0]))
        if not math.isfinite(total[s, 0]):
            return None
        sv = int(self._st_vertex[s])
        _, d_s = self.graph.shortest_paths_from(sv)
        return ChargePlan(
            cost=float(total[s, 0]),
            station=self.stations[s].id,
            target_kwh=float(target[s, 0]),
            charge_minutes=float(charge[s, 0]),
            to_station_min=float(ts[s]),
            to_station_km=float(d_u[sv]),
            to_pickup_min=float(sp_t[s, 0]),
            to_pickup_km=float(d_s[self._pickup[c]]),
        )

    def travel(self, origin: str, dest: str) -> tuple[float, float]:
        """Shortest ``(minutes, km)`` between two vertices."""
        t, d = self.graph.shortest_paths_from(self.graph.index[origin])
        j = self.graph.index[dest]
        return float(t[j]), float(d[j])


def dispatch_cost(vehicle, node: CustomerNode, model: CostModel) -> float | None:
    """Minutes for ``vehicle`` to reach ``node`` (charging included), or ``None``."""
    if vehicle.location not in model.graph.index:
        return None
    plan = model.plan(vehicle.location, vehicle.soc, vehicle.capacity, node)
    return None if plan is None else plan.cost


def refresh_cost_matrix(model: CostModel, vehicles: Sequence, now: float = 0.0) -> CostMatrix:
    """Recompute the full vehicle-by-node cost matrix for the given idle vehicles."""
    ids = [v.id for v in vehicles]
    costs = np.full((len(ids), len(model.nodes)), np.inf)
    for i, v in enumerate(vehicles):
        if v.location in model.graph.index:
            costs[i] = model.cost_row(v.location, v.soc, v.capacity)
    return CostMatrix(ids, [n.index for n in model.nodes], costs, computed_at=now)


# CSV interfaces -------------------------------------------------------------

def read_edges_csv(path: str | Path) -> list[Link]:
    links = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            links.append(
                Link(
                    row["from_id"].strip(),
                    row["to_id"].strip(),
                    float(row["travel_time_min"]),
                    float(row["distance_km"]),
                )
            )
    return links


def write_edges_csv(path: str | Path, links: Iterable[Link]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["from_id", "to_id", "travel_time_min", "distance_km"])
        for link in links:
            w.writerow([link.source, link.target, repr(float(link.travel_time)), repr(float(link.distance))])


def read_zones_csv(path: str | Path) -> list[tuple[str, str]]:
    with open(path, newline="") as fh:
        return [(r["zone_id"].strip(), r["vertex_id"].strip()) for r in csv.DictReader(fh)]


def read_stations_csv(path: str | Path) -> list[tuple[str, str, float, int]]:
    with open(path, newline="") as fh:
        return [
            (r["zone_id"].strip(), r["vertex_id"].strip(), float(r["power_kw"]), int(r["charger_count"]))
            for r in csv.DictReader(fh)
        ]


def write_zone_files(zones_path: str | Path, stations_path: str | Path, zones: Iterable[Zone]) -> None:
    zones = list(zones)
    with open(zones_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["zone_id", "vertex_id"])
        for z in zones:
            w.writerow([z.id, z.representative_vertex])
    with open(stations_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["zone_id", "vertex_id", "power_kw", "charger_count"])
        for z in zones:
            for power, count in z.charger_specs:
                w.writerow([z.id, z.station_vertex or z.representative_vertex, repr(float(power)), count])


def assemble_zones(
    zone_rows: Iterable[tuple[str, str]],
    station_rows: Iterable[tuple[str, str, float, int]],
) -> tuple[list[Zone], list[str]]:
    """Join zone and station rows; returns the zones and a list of problems found."""
    errors: list[str] = []
    rows = list(zone_rows)
    known = {}
    for zid, vertex in rows:
        if zid in known:
            errors.append(f"duplicate zone id {zid!r}")
        known[zid] = vertex
    specs: dict[str, list[tuple[float, int]]] = {}
    station_vertex: dict[str, str] = {}
    for zid, vertex, power, count in station_rows:
        if zid not in known:
            errors.append(f"station references unknown zone {zid!r}")
            continue
        if power <= 0 or count < 1:
            errors.append(f"station in zone {zid!r} has invalid power/count ({power}, {count})")
            continue
        if station_vertex.setdefault(zid, vertex) != vertex:
            errors.append(f"zone {zid!r} lists stations at more than one vertex")
            continue
        specs.setdefault(zid, []).append((power, count))
    zones = []
    seen = set()
    for zid, vertex in rows:
        if zid in seen:
            continue
        seen.add(zid)
        chargers = tuple(sorted(specs.get(zid, ()), key=lambda pc: -pc[0]))
        zones.append(Zone(zid, vertex, chargers, station_vertex.get(zid)))
    return zones, errors
