"""Reference dispatch policies: nearest-vehicle FCFS, charger chasing and a
gasoline-fleet proxy without charging."""

from __future__ import annotations

import heapq
import math
from enum import Enum

import numpy as np

from .errors import ConfigError
from .network import CostModel, Zone
from .scheduler import AssignmentDecision, EventKind, MDPPPolicy


class PolicyId(str, Enum):
    NEAREST_FCFS = "nearest_fcfs"
    CHARGER_CHASING = "charger_chasing"
    MDPP = "mdpp"
    NONEV_NOREB = "nonev_noreb"


def nearest_fcfs(queues, costs: np.ndarray, available=None) -> list[tuple[int, int]]:
    """FCFS over all waiting customers, each taking its cheapest feasible vehicle.

    ``queues`` are the per-node :class:`HolQueueState` objects (position =
    column of ``costs``).  Customers are visited in ``(arrival, id)`` order.
    Within a node every customer has the same feasible set, so once a node's
    HOL customer finds no vehicle the rest of that node is skipped.  Returns
    ``(vehicle_row, node_col)`` pairs in commit order; nothing is mutated.
    """
    if available is None:
        available = np.isfinite(costs).any(axis=1) if costs.size else np.zeros(costs.shape[0], bool)
    free = np.array(available, dtype=bool, copy=True)
    if not free.any():
        return []
    heap = []
    for c, q in enumerate(queues):
        if q.backlog:
            cid, stamp = q.backlog[0]
            heap.append((stamp, cid, c, 0))
    heapq.heapify(heap)
    out = []
    n_free = int(free.sum())
    while heap and n_free:
        stamp, cid, c, pos = heapq.heappop(heap)
        col = np.where(free, costs[:, c], np.inf)
        v = int(np.argmin(col))
        if not math.isfinite(col[v]):
            continue
        out.append((v, c))
        free[v] = False
        n_free -= 1
        backlog = queues[c].backlog
        if pos + 1 < len(backlog):
            nid, nstamp = backlog[pos + 1]
            heapq.heappush(heap, (nstamp, nid, c, pos + 1))
    return out


def nonev_noreb(queues, costs: np.ndarray, available=None) -> list[tuple[int, int]]:
    """Nearest-FCFS on a cost matrix computed with an unlimited battery."""
    return nearest_fcfs(queues, costs, available)


def charger_chasing_relocate(vertex: str, model: CostModel) -> tuple[Zone, float, float] | None:
    """Nearest station to a drop-off vertex as ``(zone, minutes, km)``.

    ``None`` when the vehicle already stands at a station or none is reachable.
    Equal travel times go to the lowest station id.
    """
    if not model.stations:
        return None
    if any(vertex == (z.station_vertex or z.representative_vertex) for z in model.stations):
        return None
    t, d = model.graph.shortest_paths_from(model.graph.index[vertex])
    best = None
    for z in model.stations:
        j = model.graph.index[z.station_vertex or z.representative_vertex]
        if not math.isfinite(t[j]):
            continue
        key = (float(t[j]), z.id)
        if best is None or key < best[0]:
            best = (key, z, float(d[j]))
    if best is None:
        return None
    return best[1], best[0][0], best[2]


class NearestFCFSPolicy:
    name = PolicyId.NEAREST_FCFS.value
    relocate_to_chargers = False
    gasoline = False

    def next_decision_time(self, system) -> float:
        return math.inf

    def on_event(self, kind, system, vehicle=None):
        if kind == EventKind.PASSAGE:
            return []
        pairs = nearest_fcfs(system.queues, system.costs, system.idle_mask)
        for v, c in pairs:
            system.commit(v, c, "fcfs")
        return [AssignmentDecision(((v, c),), system.now, "fcfs") for v, c in pairs]


class ChargerChasingPolicy(NearestFCFSPolicy):
    name = PolicyId.CHARGER_CHASING.value
    relocate_to_chargers = True


class NonEVNoRebPolicy(NearestFCFSPolicy):
    name = PolicyId.NONEV_NOREB.value
    gasoline = True


def make_policy(name: str, V: float = 0.1, tick: float | None = None):
    try:
        pid = PolicyId(name)
    except ValueError:
        raise ConfigError(f"unknown policy {name!r}; choose from {[p.value for p in PolicyId]}") from None
    if pid is PolicyId.MDPP:
        return MDPPPolicy(V=V, tick=tick)
    if pid is PolicyId.CHARGER_CHASING:
        return ChargerChasingPolicy()
    if pid is PolicyId.NONEV_NOREB:
        return NonEVNoRebPolicy()
    return NearestFCFSPolicy()
