"""Scenario definition, loading, demand generation and synthetic city builders.

A scenario file is YAML (``schema_version: 1``) pointing at CSV files for the
road graph, zones, stations and optionally a trip list.  Loading collects every
problem it finds and raises them together; nothing is partially loaded.
"""

from __future__ import annotations

import copy
import csv
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml
from scipy.optimize import brentq

from .errors import ConfigError, ScenarioLoadError
from .network import (
    BatteryModel,
    CostModel,
    Link,
    RoadGraph,
    Zone,
    assemble_zones,
    build_customer_nodes,
    read_edges_csv,
    read_stations_csv,
    read_zones_csv,
    write_edges_csv,
    write_zone_files,
)
from .queueing import CustomerRequest

SCHEMA_VERSION = 1
TRIP_HEADER = ["arrival_time_min", "origin_zone", "dest_zone", "required_level", "trip_duration_min"]


@dataclass(frozen=True)
class VehicleSpec:
    id: object
    vertex: str
    soc_kwh: float
    available_at: float = 0.0


@dataclass
class FleetSpec:
    size: int = 1
    capacity_kwh: float = 40.0
    initial_soc: float = 1.0  # fraction of capacity
    soc_spread: float = 0.0  # initial SOC drawn uniformly from [initial_soc - spread, initial_soc]
    placement: str = "station_zones"
    vehicles: list | None = None  # explicit VehicleSpec list overrides the rules above

    def errors(self) -> list[str]:
        out = []
        n = len(self.vehicles) if self.vehicles else self.size
        if n < 1:
            out.append("fleet size must be >= 1")
        if not (math.isfinite(self.capacity_kwh) and self.capacity_kwh > 0):
            out.append("fleet capacity_kwh must be positive")
        if not 0.0 <= self.initial_soc - self.soc_spread <= self.initial_soc <= 1.0:
            out.append("initial_soc/soc_spread must describe a range inside [0, 1]")
        if self.placement not in ("station_zones", "all_zones"):
            out.append(f"unknown placement rule {self.placement!r}")
        for v in self.vehicles or ():
            if not 0 <= v.soc_kwh <= self.capacity_kwh:
                out.append(f"vehicle {v.id}: soc {v.soc_kwh} outside [0, capacity]")
        return out

    def materialize(self, zones, seed: int) -> list[VehicleSpec]:
        """Concrete vehicles: the explicit list, or a round-robin over the placement zones."""
        if self.vehicles:
            return list(self.vehicles)
        pool = [z for z in zones if z.has_station] if self.placement == "station_zones" else []
        pool = pool or list(zones)
        rng = np.random.default_rng([seed, 17])
        out = []
        for i in range(self.size):
            frac = self.initial_soc
            if self.soc_spread > 0:
                frac = self.initial_soc - self.soc_spread * rng.random()
            out.append(VehicleSpec(i, pool[i % len(pool)].dropoff_vertex, frac * self.capacity_kwh))
        return out


@dataclass
class DemandGeneratorSpec:
    """Poisson demand per origin zone with gravity or explicit destinations."""

    zone_rates_per_hour: dict
    destination: str = "gravity"
    od_matrix: dict | None = None
    target_mean_km: float | None = None
    gravity_beta: float = 0.0
    level_distribution: list | None = None  # None: covering level of the trip's energy

    def errors(self, zone_ids, level_count: int) -> list[str]:
        out = []
        for z, r in self.zone_rates_per_hour.items():
            if z not in zone_ids:
                out.append(f"demand rate references unknown zone {z!r}")
            if not (math.isfinite(r) and r >= 0):
                out.append(f"demand rate for zone {z!r} must be >= 0")
        if self.destination not in ("gravity", "matrix"):
            out.append(f"unknown destination model {self.destination!r}")
        if self.destination == "matrix":
            if not self.od_matrix:
                out.append("destination 'matrix' requires od_matrix")
            else:
                for o, row in self.od_matrix.items():
                    if o not in zone_ids or any(d not in zone_ids for d in row):
                        out.append(f"od_matrix row {o!r} references unknown zones")
                    if any(p < 0 for p in row.values()) or abs(math.fsum(row.values()) - 1.0) > 1e-9:
                        out.append(f"od_matrix row {o!r} must be a probability distribution")
        if self.level_distribution is not None:
            p = self.level_distribution
            if len(p) != level_count or any(x < 0 for x in p) or abs(math.fsum(p) - 1.0) > 1e-9:
                out.append("level_distribution must have one probability per level and sum to 1")
        if self.target_mean_km is not None and not self.target_mean_km > 0:
            out.append("target_mean_km must be positive")
        return out

    @property
    def total_rate_per_min(self) -> float:
        return math.fsum(self.zone_rates_per_hour.values()) / 60.0


@dataclass
class Scenario:
    name: str
    links: list
    zones: list
    fleet: FleetSpec
    battery: BatteryModel = field(default_factory=BatteryModel)
    demand: DemandGeneratorSpec | None = None
    trips: list | None = None
    max_wait: float | None = None
    cost_refresh_period: float = 5.0
    horizon: float = 1440.0
    seed: int = 0
    vertices: list = field(default_factory=list)

    def __post_init__(self):
        self._graph = None
        self._model = None

    @property
    def graph(self) -> RoadGraph:
        if self._graph is None:
            station_vertices = [z.station_vertex for z in self.zones if z.has_station and z.station_vertex]
            self._graph = RoadGraph(self.links, self.vertices, station_vertices)
        return self._graph

    def cost_model(self) -> CostModel:
        if self._model is None:
            nodes = build_customer_nodes(self.zones, self.battery.level_count)
            self._model = CostModel(self.graph, self.zones, nodes, self.battery)
        return self._model

    def validate(self) -> list[str]:
        errors = list(self.fleet.errors())
        try:
            graph = self.graph
        except ConfigError as exc:
            return errors + [str(exc)]
        ids = {z.id for z in self.zones}
        if len(ids) != len(self.zones):
            errors.append("duplicate zone ids")
        for z in self.zones:
            for v in (z.representative_vertex, z.station_vertex):
                if v is not None and v not in graph:
                    errors.append(f"zone {z.id!r} references unknown vertex {v!r}")
        for v in self.fleet.vehicles or ():
            if v.vertex not in graph:
                errors.append(f"vehicle {v.id} starts at unknown vertex {v.vertex!r}")
        if self.demand is not None:
            errors += self.demand.errors(ids, self.battery.level_count)
        if self.trips is not None:
            prev = -math.inf
            for i, t in enumerate(self.trips):
                if t.origin_zone not in ids or t.dest_zone not in ids:
                    errors.append(f"trip {t.id}: unknown zone")
                if not 1 <= t.level <= self.battery.level_count:
                    errors.append(f"trip {t.id}: level {t.level} outside 1..{self.battery.level_count}")
                if t.arrival_time < prev:
                    errors.append(f"trip {t.id}: arrival times not sorted")
                prev = t.arrival_time
        if self.demand is None and self.trips is None:
            errors.append("scenario needs either a trip list or a demand generator")
        if not self.horizon > 0:
            errors.append("horizon must be positive")
        if self.max_wait is not None and not self.max_wait > 0:
            errors.append("max_wait must be positive or null")
        if not self.cost_refresh_period > 0:
            errors.append("cost_refresh_period must be positive")
        return errors

    def requests(self, seed: int | None = None, horizon: float | None = None) -> list[CustomerRequest]:
        horizon = self.horizon if horizon is None else horizon
        seed = self.seed if seed is None else seed
        if self.trips is not None:
            return [t for t in self.trips if t.arrival_time <= horizon]
        return generate_demand(self.demand, horizon, seed, self)


# demand generation ------------------------------------------------------------

class _DemandContext:
    """Zone-to-zone distances used for destinations and covering levels."""

    def __init__(self, scenario: Scenario):
        model = scenario.cost_model()
        g = model.graph
        zones = scenario.zones
        self.zone_ids = [z.id for z in zones]
        n = len(zones)
        self.km = np.full((n, n), np.inf)
        self.minutes = np.full((n, n), np.inf)
        for i, z in enumerate(zones):
            t, d = g.shortest_paths_from(g.index[z.representative_vertex])
            for j, w in enumerate(zones):
                k = g.index[w.dropoff_vertex]
                self.km[i, j] = d[k]
                self.minutes[i, j] = t[k]
        self.to_station_km = np.zeros(n)
        for j, w in enumerate(zones):
            near = model.nearest_station(w.dropoff_vertex)
            self.to_station_km[j] = near[2] if near else 0.0
        self.battery = scenario.battery
        self.capacity = scenario.fleet.capacity_kwh


def gravity_probabilities(km: np.ndarray, beta: float) -> np.ndarray:
    """Row-stochastic ``P[i, j] ~ exp(-beta * km[i, j])`` over reachable ``j != i``."""
    n = km.shape[0]
    ok = np.isfinite(km) & ~np.eye(n, dtype=bool)
    scale = np.where(ok, km, 0.0)
    logits = np.where(ok, -beta * scale, -np.inf)
    logits -= np.max(np.where(ok, logits, -np.inf), axis=1, keepdims=True, initial=-np.inf)
    with np.errstate(invalid="ignore"):
        w = np.where(ok, np.exp(logits), 0.0)
    s = w.sum(axis=1, keepdims=True)
    return np.divide(w, s, out=np.zeros_like(w), where=s > 0)


def calibrate_gravity_beta(km: np.ndarray, origin_weights: np.ndarray, target_km: float) -> float:
    """Gravity decay whose rate-weighted mean trip length equals ``target_km`` (clamped)."""
    w = origin_weights / origin_weights.sum()
    finite = np.where(np.isfinite(km), km, 0.0)

    def mean_km(beta):
        return float(w @ (gravity_probabilities(km, beta) * finite).sum(axis=1))

    span = float(finite.max()) or 1.0
    lo, hi = -50.0 / span, 50.0 / span
    f_lo, f_hi = mean_km(lo) - target_km, mean_km(hi) - target_km
    if f_lo <= 0:
        return lo
    if f_hi >= 0:
        return hi
    return brentq(lambda b: mean_km(b) - target_km, lo, hi, xtol=1e-12)


def destination_matrix(spec: DemandGeneratorSpec, ctx: _DemandContext) -> np.ndarray:
    ids = ctx.zone_ids
    if spec.destination == "matrix":
        P = np.zeros((len(ids), len(ids)))
        pos = {z: i for i, z in enumerate(ids)}
        for o, row in (spec.od_matrix or {}).items():
            for d, p in row.items():
                P[pos[o], pos[d]] = p
        return P
    beta = spec.gravity_beta
    if spec.target_mean_km is not None:
        rates = np.array([spec.zone_rates_per_hour.get(z, 0.0) for z in ids], dtype=float)
        if rates.sum() > 0:
            beta = calibrate_gravity_beta(ctx.km, rates, spec.target_mean_km)
    return gravity_probabilities(ctx.km, beta)


def generate_demand(spec: DemandGeneratorSpec, horizon: float, seed: int, scenario: Scenario) -> list[CustomerRequest]:
    """Poisson arrivals per origin zone over ``[0, horizon]``; deterministic per seed."""
    ctx = _DemandContext(scenario)
    P = destination_matrix(spec, ctx)
    rng = np.random.default_rng(seed)
    times, origins = [], []
    for i, z in enumerate(ctx.zone_ids):
        rate = spec.zone_rates_per_hour.get(z, 0.0) / 60.0
        if rate <= 0:
            continue
        n = rng.poisson(rate * horizon)
        times.append(rng.uniform(0.0, horizon, n))
        origins.append(np.full(n, i))
    if not times:
        return []
    t = np.concatenate(times)
    o = np.concatenate(origins)
    order = np.lexsort((o, t))
    t, o = t[order], o[order]
    cdf = np.cumsum(P, axis=1)
    u = rng.random(len(t))
    dest = np.minimum((u[:, None] > cdf[o]).sum(axis=1), len(ctx.zone_ids) - 1)
    bad = P[o].sum(axis=1) <= 0
    dest = np.where(bad, o, dest)
    L = scenario.battery.level_count
    if spec.level_distribution is not None:
        levels = rng.choice(np.arange(1, L + 1), size=len(t), p=spec.level_distribution)
    else:
        kwh = ctx.battery.energy(ctx.km[o, dest] + ctx.to_station_km[dest])
        levels = [scenario.battery.covering_level(float(e), ctx.capacity) for e in np.atleast_1d(kwh)]
    return [
        CustomerRequest(k, ctx.zone_ids[oi], ctx.zone_ids[di], float(ti), int(lv))
        for k, (ti, oi, di, lv) in enumerate(zip(t, o, dest, levels))
    ]


def trip_summary(trips, scenario: Scenario) -> dict:
    """Mean trip distance and duration over the road graph, for calibration checks."""
    ctx = _DemandContext(scenario)
    pos = {z: i for i, z in enumerate(ctx.zone_ids)}
    km = [ctx.km[pos[t.origin_zone], pos[t.dest_zone]] for t in trips]
    mins = [
        t.trip_duration if t.trip_duration is not None else ctx.minutes[pos[t.origin_zone], pos[t.dest_zone]]
        for t in trips
    ]
    return {
        "trips": len(trips),
        "mean_distance_km": float(np.mean(km)) if km else 0.0,
        "mean_duration_min": float(np.mean(mins)) if mins else 0.0,
    }


def expected_trip_stats(scenario: Scenario) -> dict:
    """Rate-weighted expectations implied by a demand generator (no sampling)."""
    spec = scenario.demand
    ctx = _DemandContext(scenario)
    P = destination_matrix(spec, ctx)
    rates = np.array([spec.zone_rates_per_hour.get(z, 0.0) for z in ctx.zone_ids], dtype=float)
    w = rates / rates.sum()
    fin_km = np.where(np.isfinite(ctx.km), ctx.km, 0.0)
    fin_min = np.where(np.isfinite(ctx.minutes), ctx.minutes, 0.0)
    trip_km = float(w @ (P * fin_km).sum(axis=1))
    trip_min = float(w @ (P * fin_min).sum(axis=1))
    # vehicles start the pickup from the previous drop-off, i.e. a destination-weighted zone
    dest_w = w @ P
    off = ~np.eye(len(w), dtype=bool)
    pickup_min = float(dest_w @ (fin_min * off) @ w)
    pickup_km = float(dest_w @ (fin_km * off) @ w)
    return {"trip_km": trip_km, "trip_min": trip_min, "pickup_min": pickup_min, "pickup_km": pickup_km}


def estimate_service_capacity(scenario: Scenario) -> float:
    """Customers per minute the fleet can serve, from expected busy time per customer.

    Busy time is pickup + trip + the charging time that replaces the energy of
    both legs at the slowest installed charger.
    """
    s = expected_trip_stats(scenario)
    powers = [p for z in scenario.zones for p, _ in z.charger_specs]
    charge = 0.0
    if powers and not scenario.battery.unlimited:
        kwh = scenario.battery.energy(s["trip_km"] + s["pickup_km"])
        charge = kwh / min(powers) * 60.0
    busy = s["pickup_min"] + s["trip_min"] + charge
    n = len(scenario.fleet.vehicles) if scenario.fleet.vehicles else scenario.fleet.size
    return n / busy


def scale_demand(scenario: Scenario, total_rate_per_min: float) -> Scenario:
    """Copy of ``scenario`` with zone rates rescaled to the given total."""
    spec = scenario.demand
    cur = spec.total_rate_per_min
    if cur <= 0:
        raise ConfigError("cannot rescale a zero-rate demand spec")
    k = total_rate_per_min / cur
    rates = {z: r * k for z, r in spec.zone_rates_per_hour.items()}
    return replace(scenario, demand=replace(spec, zone_rates_per_hour=rates))


# file I/O -----------------------------------------------------------------------

def _read_trips(path, zone_ids, level_count: int):
    trips, errors = [], []
    prev = -math.inf
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"arrival_time_min", "origin_zone", "dest_zone", "required_level"} - set(reader.fieldnames or [])
        if missing:
            return [], [f"{path}: missing columns {sorted(missing)}"]
        for line, row in enumerate(reader, start=2):
            try:
                t = float(row["arrival_time_min"])
                level = int(row["required_level"])
                dur = row.get("trip_duration_min")
                dur = float(dur) if dur not in (None, "") else None
            except ValueError as exc:
                errors.append(f"{path}:{line}: {exc}")
                continue
            o, d = row["origin_zone"].strip(), row["dest_zone"].strip()
            bad = False
            for z in (o, d):
                if z not in zone_ids:
                    errors.append(f"{path}:{line}: unknown zone {z!r}")
                    bad = True
            if not 1 <= level <= level_count:
                errors.append(f"{path}:{line}: required_level {level} outside 1..{level_count}")
                bad = True
            if t < prev:
                errors.append(f"{path}:{line}: arrival time {t} earlier than previous row ({prev})")
                bad = True
            if dur is not None and not dur > 0:
                errors.append(f"{path}:{line}: trip_duration_min must be positive")
                bad = True
            prev = max(prev, t)
            if not bad:
                trips.append(CustomerRequest(line - 1, o, d, t, level, trip_duration=dur))
    return trips, errors


def ingest_trips(path, zone_ids, level_count: int = 5) -> list[CustomerRequest]:
    """Read and validate a trip CSV; raises with every row-level problem found."""
    trips, errors = _read_trips(path, set(zone_ids), level_count)
    if errors:
        raise ScenarioLoadError(errors)
    return trips


def write_trips_csv(path, trips) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRIP_HEADER)
        for t in trips:
            w.writerow([repr(float(t.arrival_time)), t.origin_zone, t.dest_zone, t.level,
                        "" if t.trip_duration is None else repr(float(t.trip_duration))])


def load_scenario(path) -> Scenario:
    """Parse and fully validate a scenario file, or raise :class:`ScenarioLoadError`."""
    path = Path(path)
    if not path.is_file():
        raise ScenarioLoadError([f"scenario file not found: {path}"])
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ScenarioLoadError([f"{path}: invalid YAML ({exc})"]) from None
    if not isinstance(doc, dict):
        raise ScenarioLoadError([f"{path}: expected a mapping at top level"])
    errors = []
    if doc.get("schema_version") != SCHEMA_VERSION:
        errors.append(f"unsupported schema_version {doc.get('schema_version')!r} (expected {SCHEMA_VERSION})")
    base = path.parent
    files = doc.get("files") or {}
    resolved = {}
    for key in ("edges", "zones", "stations"):
        if key not in files:
            errors.append(f"files.{key} is required")
            continue
        p = base / files[key]
        if not p.is_file():
            errors.append(f"files.{key}: file not found: {p}")
        resolved[key] = p
    if "trips" in files:
        p = base / files["trips"]
        if not p.is_file():
            errors.append(f"files.trips: file not found: {p}")
        resolved["trips"] = p
    if errors:
        raise ScenarioLoadError(errors)

    links = read_edges_csv(resolved["edges"])
    zones, zerr = assemble_zones(read_zones_csv(resolved["zones"]), read_stations_csv(resolved["stations"]))
    errors += zerr
    try:
        b = doc.get("battery") or {}
        battery = BatteryModel(
            km_per_kwh=float(b.get("km_per_kwh", 7.0)),
            level_count=int(b.get("level_count", 5)),
            worst_case_reserve=bool(b.get("worst_case_reserve", True)),
            charge_to_full=bool(b.get("charge_to_full", False)),
        )
    except (ConfigError, TypeError, ValueError) as exc:
        errors.append(f"battery: {exc}")
        battery = BatteryModel()
    f = doc.get("fleet") or {}
    vehicles = None
    if f.get("vehicles"):
        vehicles = [
            VehicleSpec(v["id"], str(v["vertex"]), float(v["soc_kwh"]), float(v.get("available_at", 0.0)))
            for v in f["vehicles"]
        ]
    fleet = FleetSpec(
        size=int(f.get("size", len(vehicles) if vehicles else 1)),
        capacity_kwh=float(f.get("capacity_kwh", 40.0)),
        initial_soc=float(f.get("initial_soc", 1.0)),
        soc_spread=float(f.get("soc_spread", 0.0)),
        placement=str(f.get("placement", "station_zones")),
        vehicles=vehicles,
    )
    demand = None
    if doc.get("demand"):
        d = doc["demand"]
        demand = DemandGeneratorSpec(
            zone_rates_per_hour={str(k): float(v) for k, v in (d.get("zone_rates_per_hour") or {}).items()},
            destination=d.get("destination", "gravity"),
            od_matrix=d.get("od_matrix"),
            target_mean_km=d.get("target_mean_km"),
            gravity_beta=float(d.get("gravity_beta", 0.0)),
            level_distribution=d.get("level_distribution"),
        )
    trips = None
    if "trips" in resolved:
        trips, terr = _read_trips(resolved["trips"], {z.id for z in zones}, battery.level_count)
        errors += terr
    mw = doc.get("max_wait_min")
    scenario = Scenario(
        name=str(doc.get("name", path.stem)),
        links=links,
        zones=zones,
        fleet=fleet,
        battery=battery,
        demand=demand,
        trips=trips,
        max_wait=None if mw is None else float(mw),
        cost_refresh_period=float(doc.get("cost_refresh_min", 5.0)),
        horizon=float(doc.get("horizon_min", 1440.0)),
        seed=int(doc.get("seed", 0)),
        vertices=[str(v) for v in doc.get("vertices", [])],
    )
    errors += scenario.validate()
    if errors:
        raise ScenarioLoadError(errors)
    return scenario


def scenario_document(scenario: Scenario) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "name": scenario.name,
        "files": {"edges": "edges.csv", "zones": "zones.csv", "stations": "stations.csv"},
        "battery": {
            "km_per_kwh": scenario.battery.km_per_kwh,
            "level_count": scenario.battery.level_count,
            "worst_case_reserve": scenario.battery.worst_case_reserve,
            "charge_to_full": scenario.battery.charge_to_full,
        },
        "fleet": {
            "size": scenario.fleet.size,
            "capacity_kwh": scenario.fleet.capacity_kwh,
            "initial_soc": scenario.fleet.initial_soc,
            "soc_spread": scenario.fleet.soc_spread,
            "placement": scenario.fleet.placement,
        },
        "max_wait_min": scenario.max_wait,
        "cost_refresh_min": scenario.cost_refresh_period,
        "horizon_min": scenario.horizon,
        "seed": scenario.seed,
    }
    if scenario.vertices:
        doc["vertices"] = list(scenario.vertices)
    if scenario.fleet.vehicles:
        doc["fleet"]["vehicles"] = [asdict(v) for v in scenario.fleet.vehicles]
    if scenario.demand is not None:
        d = asdict(scenario.demand)
        doc["demand"] = {k: v for k, v in d.items() if v is not None}
    if scenario.trips is not None:
        doc["files"]["trips"] = "trips.csv"
    return doc


def save_scenario(scenario: Scenario, directory, filename: str = "scenario.yaml") -> Path:
    """Write the YAML file and its CSVs into ``directory``; returns the YAML path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_edges_csv(directory / "edges.csv", scenario.links)
    write_zone_files(directory / "zones.csv", directory / "stations.csv", scenario.zones)
    if scenario.trips is not None:
        write_trips_csv(directory / "trips.csv", scenario.trips)
    out = directory / filename
    out.write_text(yaml.safe_dump(scenario_document(scenario), sort_keys=False))
    return out


# synthetic cities ---------------------------------------------------------------

def grid_city(rows: int, cols: int, spacing_km: float, speed_kmh: float, n_zones: int | None = None):
    """Bidirectional grid road network with one zone per intersection.

    Returns ``(links, zone_rows)`` where zone ids are ``Z000``, ``Z001``, ... in
    row-major order; ``n_zones`` truncates the last row.
    """
    n = rows * cols if n_zones is None else n_zones
    if not 1 <= n <= rows * cols:
        raise ConfigError("n_zones must fit in the grid")
    name = lambda k: f"g{k:04d}"
    minutes = spacing_km / speed_kmh * 60.0
    links = []
    for k in range(n):
        r, c = divmod(k, cols)
        for rr, cc in ((r, c + 1), (r + 1, c)):
            j = rr * cols + cc
            if rr < rows and cc < cols and j < n:
                links.append(Link(name(k), name(j), minutes, spacing_km))
                links.append(Link(name(j), name(k), minutes, spacing_km))
    zone_rows = [(f"Z{k:03d}", name(k)) for k in range(n)]
    return links, zone_rows


def _zones_with_stations(zone_rows, station_specs: dict):
    stations = []
    for zid, vertex in zone_rows:
        for power, count in station_specs.get(zid, ()):
            stations.append((zid, vertex, power, count))
    zones, errors = assemble_zones(zone_rows, stations)
    if errors:
        raise ConfigError("; ".join(errors))
    return zones


def ten_zone_scenario(load: float = 0.6, fleet_size: int = 8, horizon: float = 1e5, seed: int = 0,
                      max_wait: float | None = None) -> Scenario:
    """Small 2x5 grid city for stability checks; ``load`` is the fraction of fleet capacity."""
    links, zone_rows = grid_city(2, 5, 1.0, 20.0)
    specs = {"Z000": [(50.0, 2)], "Z004": [(50.0, 2)], "Z007": [(50.0, 2)]}
    zones = _zones_with_stations(zone_rows, specs)
    weights = [1.0, 1.2, 0.8, 1.0, 1.1, 0.9, 1.0, 1.3, 0.7, 1.0]
    rates = {z.id: w for z, w in zip(zones, weights)}
    sc = Scenario(
        name=f"ten-zone-{load:g}",
        links=links,
        zones=zones,
        fleet=FleetSpec(size=fleet_size, capacity_kwh=40.0),
        battery=BatteryModel(km_per_kwh=7.0, level_count=5),
        demand=DemandGeneratorSpec(rates, target_mean_km=3.0),
        max_wait=max_wait,
        horizon=horizon,
        seed=seed,
    )
    return scale_demand(sc, load * estimate_service_capacity(sc))


def high_demand_scenario(horizon: float = 1440.0, seed: int = 0, fleet_size: int = 60,
                         rate_per_hour: float = 180.0, charger_power: float = 22.0,
                         chargers_per_station: int = 4) -> Scenario:
    """Dense short-trip city with sparse charging, scaled down for desk runs."""
    links, zone_rows = grid_city(4, 5, 0.6, 12.0, n_zones=19)
    specs = {"Z000": [(charger_power, chargers_per_station)], "Z018": [(charger_power, chargers_per_station)]}
    zones = _zones_with_stations(zone_rows, specs)
    rng = np.random.default_rng(2018)
    w = rng.uniform(0.5, 1.5, len(zones))
    w *= rate_per_hour / w.sum()
    return Scenario(
        name="high-demand",
        links=links,
        zones=zones,
        fleet=FleetSpec(size=fleet_size, capacity_kwh=20.0, initial_soc=1.0, soc_spread=0.5,
                        placement="all_zones"),
        battery=BatteryModel(km_per_kwh=7.0, level_count=5),
        demand=DemandGeneratorSpec({z.id: float(r) for z, r in zip(zones, w)}, target_mean_km=1.89),
        max_wait=30.0,
        horizon=horizon,
        seed=seed,
    )


def manhattan_like(horizon: float = 7 * 1440.0, seed: int = 0, fleet_size: int = 1200) -> Scenario:
    """19 zones, 17 with stations (288 Level 2 + 8 superchargers), 68,500 trips/day, 1.89 km mean."""
    links, zone_rows = grid_city(4, 5, 0.6, 12.0, n_zones=19)
    rng = np.random.default_rng(2018)
    station_zones = [z for z, _ in zone_rows if z not in ("Z009", "Z013")]
    counts = rng.multinomial(288 - 9 * 17, np.full(17, 1 / 17)) + 9
    while counts.max() > 31:
        i, j = int(np.argmax(counts)), int(np.argmin(counts))
        counts[i] -= 1
        counts[j] += 1
    specs = {z: [(7.0, int(n))] for z, n in zip(station_zones, counts)}
    for z in ("Z000", "Z006", "Z012", "Z018"):
        specs[z] = [(120.0, 2)] + specs[z]
    zones = _zones_with_stations(zone_rows, specs)
    w = rng.uniform(0.5, 1.5, len(zones))
    w *= 68500 / 24 / w.sum()
    return Scenario(
        name="manhattan-like",
        links=links,
        zones=zones,
        fleet=FleetSpec(size=fleet_size, capacity_kwh=20.0),
        battery=BatteryModel(km_per_kwh=7.0, level_count=5),
        demand=DemandGeneratorSpec({z.id: float(r) for z, r in zip(zones, w)}, target_mean_km=1.89),
        max_wait=30.0,
        horizon=horizon,
        seed=seed,
    )


def brooklyn_like(horizon: float = 30 * 1440.0, seed: int = 0, fleet_size: int = 262) -> Scenario:
    """303 zones, 18 station zones with 82 Level 2 chargers, ~230 trips/day, 23.2 km mean."""
    links, zone_rows = grid_city(18, 17, 1.5, 30.0, n_zones=303)
    rng = np.random.default_rng(2017)
    station_idx = np.sort(rng.choice(303, 18, replace=False))
    counts = rng.multinomial(82 - 18, np.full(18, 1 / 18)) + 1
    specs = {zone_rows[i][0]: [(7.0, int(n))] for i, n in zip(station_idx, counts)}
    zones = _zones_with_stations(zone_rows, specs)
    w = rng.uniform(0.5, 1.5, len(zones))
    w *= 230 / 24 / w.sum()
    return Scenario(
        name="brooklyn-like",
        links=links,
        zones=zones,
        fleet=FleetSpec(size=fleet_size, capacity_kwh=40.0),
        battery=BatteryModel(km_per_kwh=7.0, level_count=5),
        demand=DemandGeneratorSpec({z.id: float(r) for z, r in zip(zones, w)}, target_mean_km=23.2),
        max_wait=None,
        horizon=horizon,
        seed=seed,
    )


# illustrative two-timeline example ------------------------------------------------

ILLUSTRATIVE_COSTS = [[30, 25, 40], [15, 20, 35], [18, 4, None], [None, None, 22], [None, None, 3]]


def illustrative_example(horizon: float = 30.0) -> Scenario:
    """Five vehicles, three customers; reproduces the published cost matrix exactly.

    Links cover 0.7 km per minute, so every minute of driving costs 0.1 kWh.
    Customers need 30 %, 45 % and 80 % charge (levels 6, 9 and 16 of 20).
    Station ``sA`` has one 24 kW charger, which turns Vehicle 1's and Vehicle
    2's 80 % requests into charging detours of 40 and 35 minutes.
    """
    legs = [
        ("p1", "z1", 30), ("p1", "z2", 25), ("p2", "z1", 15), ("p2", "z2", 20),
        ("p3", "z1", 18), ("p3", "z2", 4), ("z1", "z2", 14), ("z2", "z1", 14),
        ("z1", "sB", 8), ("sB", "z1", 8), ("z2", "sB", 8), ("sB", "z2", 8),
        ("p1", "sA", 8), ("p2", "sA", 8), ("sA", "z3", 4), ("z3", "sA", 4),
        ("p4", "z3", 22), ("p5", "z3", 3),
    ]
    links = [Link(a, b, float(t), 0.7 * t) for a, b, t in legs]
    zones, errors = assemble_zones(
        [("Z1", "z1"), ("Z2", "z2"), ("Z3", "z3"), ("SA", "sA"), ("SB", "sB")],
        [("SA", "sA", 24.0, 1), ("SB", "sB", 24.0, 1)],
    )
    assert not errors
    cap = 40.0
    vehicles = [
        VehicleSpec(1, "p1", 0.55 * cap),
        VehicleSpec(2, "p2", 0.60 * cap),
        VehicleSpec(3, "p3", 0.52 * cap, 5.6),
        VehicleSpec(4, "p4", 0.93 * cap, 15.8),
        VehicleSpec(5, "p5", 0.90 * cap, 18.0),
    ]
    trips = [
        CustomerRequest(1, "Z1", "Z1", 0.0, 6, trip_duration=100.0),
        CustomerRequest(2, "Z2", "Z2", 5.0, 9, trip_duration=100.0),
        CustomerRequest(3, "Z3", "Z3", 13.6, 16, trip_duration=100.0),
    ]
    return Scenario(
        name="illustrative",
        links=links,
        zones=zones,
        fleet=FleetSpec(size=5, capacity_kwh=cap, vehicles=vehicles),
        battery=BatteryModel(km_per_kwh=7.0, level_count=20),
        trips=trips,
        max_wait=None,
        cost_refresh_period=5.0,
        horizon=horizon,
        seed=0,
    )
