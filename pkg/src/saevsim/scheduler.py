"""Minimum drift-plus-penalty (MDPP) dispatch.

Per decision epoch the scheduler maximises ``sum (H_c - V * C_vc) * y_vc`` over
one-to-one vehicle/node assignments.  Only pairs with ``H_c > V * C_vc`` can
ever be selected, so the online form never solves the full program: it waits
for the first instant such a pair appears and then solves a one-row (or
one-column) knapsack, i.e. an argmin/argmax.

Passage events are resolved as right limits: a node whose waiting time reaches
``V * min_v C_vc`` at time ``t`` is served at ``t+``.  Numerically this means a
margin within ``eps`` of zero counts as crossed at a passage event but not at
any other event.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Protocol, Sequence

import numpy as np

from .errors import ConfigError, LogicError
from .network import CostMatrix

EPS = 1e-9


@dataclass(frozen=True)
class SchedulerConfig:
    V: float = 0.1
    strict_viability: bool = True
    tick: float | None = None  # None: event driven
    eps: float = EPS

    def __post_init__(self):
        if not math.isfinite(self.V) or self.V < 0:
            raise ConfigError(f"V must be finite and >= 0, got {self.V}")
        if self.tick is not None and not self.tick > 0:
            raise ConfigError("tick must be positive when set")


@dataclass(frozen=True)
class AssignmentDecision:
    pairs: tuple = ()
    decided_at: float = 0.0
    trigger: str = ""

    @property
    def served_nodes(self) -> set:
        """Nodes with ``x_c = 1``."""
        return {c for _, c in self.pairs}

    def __len__(self):
        return len(self.pairs)


class PassageKind(str, Enum):
    FIRST_PASSAGE = "first_passage"
    VEHICLE_TRIGGERED = "vehicle_triggered"


@dataclass(frozen=True)
class PassageEvent:
    time: float
    kind: PassageKind
    node: int | None = None
    vehicle: int | None = None


def _penalised(V: float, costs: np.ndarray) -> np.ndarray:
    # V * inf must stay inf when V == 0
    with np.errstate(invalid="ignore"):
        out = V * costs
    return np.where(np.isinf(costs), np.inf, out)


def _as_arrays(C):
    if isinstance(C, CostMatrix):
        return C.costs, list(C.vehicle_ids), list(C.node_ids)
    C = np.asarray(C, dtype=float)
    return C, list(range(C.shape[0])), list(range(C.shape[1]))


# batch program ---------------------------------------------------------------

def _hungarian_min(cost: np.ndarray) -> list[int]:
    """Rows-to-columns assignment minimising total cost; requires rows <= cols.

    Shortest augmenting path with row/column potentials.  Returns the column
    assigned to each row.
    """
    n, m = cost.shape
    INF = math.inf
    u = [0.0] * (n + 1)
    v = [0.0] * (m + 1)
    p = [0] * (m + 1)
    way = [0] * (m + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [INF] * (m + 1)
        used = [False] * (m + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = INF
            j1 = 0
            row = cost[i0 - 1]
            for j in range(1, m + 1):
                if not used[j]:
                    cur = row[j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    assignment = [-1] * n
    for j in range(1, m + 1):
        if p[j]:
            assignment[p[j] - 1] = j - 1
    return assignment


def max_weight_matching(W: np.ndarray) -> list[tuple[int, int]]:
    """Maximum-weight matching on the strictly positive entries of ``W``."""
    W = np.asarray(W, dtype=float)
    if W.size == 0:
        return []
    pos = np.where(W > 0, W, 0.0)
    if not pos.any():
        return []
    transpose = pos.shape[0] > pos.shape[1]
    work = pos.T if transpose else pos
    cols = _hungarian_min(-work)
    pairs = []
    for r, c in enumerate(cols):
        i, j = (c, r) if transpose else (r, c)
        if W[i, j] > 0:
            pairs.append((i, j))
    return sorted(pairs, key=lambda ij: (ij[1], ij[0]))


def batch_objective(pairs, H, C, V: float) -> float:
    """``sum (H_c - V C_vc)`` over matrix-index pairs, correctly rounded."""
    costs, _, _ = _as_arrays(C)
    H = np.asarray(H, dtype=float)
    return math.fsum(float(H[c] - V * costs[v, c]) for v, c in sorted(pairs, key=lambda p: (p[1], p[0])))


def solve_batch(H, C, V: float, decided_at: float = 0.0) -> AssignmentDecision:
    """Solve the full assignment program for one decision epoch.

    ``H`` is indexed by node position and ``C`` is a :class:`CostMatrix` or a
    vehicles-by-nodes array with ``inf`` for absent arcs.  Pairs in the result
    use the matrix's vehicle and node ids.
    """
    costs, vids, nids = _as_arrays(C)
    H = np.asarray(H, dtype=float)
    with np.errstate(invalid="ignore"):
        W = H[None, :] - _penalised(V, costs)
    W = np.where(np.isfinite(W), W, -np.inf)
    pairs = max_weight_matching(W)
    return AssignmentDecision(tuple((vids[i], nids[j]) for i, j in pairs), decided_at, "batch")


def viable_pairs(H, C, V: float, eps: float = 0.0) -> set:
    """Pairs with ``H_c - V C_vc > eps`` (strict; exact ties are not viable)."""
    costs, vids, nids = _as_arrays(C)
    H = np.asarray(H, dtype=float)
    with np.errstate(invalid="ignore"):
        margin = H[None, :] - _penalised(V, costs)
    vi, ci = np.nonzero(margin > eps)
    return {(vids[i], nids[j]) for i, j in zip(vi, ci)}


# online form -----------------------------------------------------------------

class DispatchSystem(Protocol):
    """State the online solver reads and mutates.

    ``hol[c]`` is the arrival stamp of node ``c``'s HOL customer (``inf`` when
    empty) and ``costs[v, c]`` the current dispatch cost of idle vehicle ``v``
    (``inf`` rows for vehicles that are not idle).
    """

    now: float
    hol: np.ndarray
    costs: np.ndarray

    def commit(self, v: int, c: int, trigger: str) -> None: ...


def node_margins(system, V: float, nodes=None):
    """``(margins, min_costs)`` per node: ``H_c - V min_v C_vc``."""
    hol = system.hol if nodes is None else system.hol[nodes]
    costs = system.costs if nodes is None else system.costs[:, nodes]
    if costs.shape[0] == 0:
        min_c = np.full(hol.shape, np.inf)
    else:
        min_c = costs.min(axis=0)
    with np.errstate(invalid="ignore"):
        margin = (system.now - hol) - _penalised(V, min_c)
    margin = np.where(np.isnan(margin), -np.inf, margin)
    return margin, min_c


def next_passage_time(system, V: float) -> PassageEvent | None:
    """Earliest instant some occupied node's wait reaches ``V`` times its cheapest cost."""
    occ = np.flatnonzero(np.isfinite(system.hol))
    if occ.size == 0 or system.costs.shape[0] == 0:
        return None
    min_c = system.costs[:, occ].min(axis=0)
    thr = _penalised(V, min_c)
    t = system.hol[occ] + thr
    k = int(np.argmin(t))
    if not math.isfinite(t[k]):
        return None
    return PassageEvent(max(float(t[k]), system.now), PassageKind.FIRST_PASSAGE, node=int(occ[k]))


def assign_first_passage(node: int, C, V: float, now: float) -> AssignmentDecision:
    """Serve ``node`` with its cheapest vehicle (lowest index on ties)."""
    costs, vids, nids = _as_arrays(C)
    col = costs[:, node] if costs.shape[0] else np.empty(0)
    if col.size == 0 or not np.isfinite(col).any():
        raise LogicError(f"passage fired for node {nids[node]} with no feasible vehicle")
    v = int(np.argmin(col))
    return AssignmentDecision(((vids[v], nids[node]),), now, PassageKind.FIRST_PASSAGE.value)


def assign_vehicle_triggered(vehicle: int, H, C, V: float, now: float, eps: float = 0.0):
    """Give ``vehicle`` the node with the largest ``H_c - V C_vc`` above ``eps``; ``None`` if none."""
    costs, vids, nids = _as_arrays(C)
    H = np.asarray(H, dtype=float)
    with np.errstate(invalid="ignore"):
        margin = H - _penalised(V, costs[vehicle])
    margin = np.where(np.isnan(margin), -np.inf, margin)
    c = int(np.argmax(margin))
    if not margin[c] > eps:
        return None
    return AssignmentDecision(((vids[vehicle], nids[c]),), now, PassageKind.VEHICLE_TRIGGERED.value)


class EventKind(str, Enum):
    ARRIVAL = "arrival"
    VEHICLE_RETURN = "vehicle_return"
    PASSAGE = "passage"
    COST_REFRESH = "cost_refresh"
    VEHICLE_UPDATE = "vehicle_update"


def online_step(kind: EventKind, system, config: SchedulerConfig, vehicle: int | None = None):
    """Run the dispatch loop after one event; commits through ``system.commit``.

    While some pair is viable: if the event was a vehicle (re)entering the
    system and that vehicle has a viable node, it takes the node with the
    largest coefficient; otherwise the node with the largest margin takes its
    cheapest vehicle.  Every iteration removes one vehicle and one customer, so
    the loop terminates.
    """
    V, eps = config.V, config.eps
    crossed = -eps if kind == EventKind.PASSAGE else eps
    decisions = []
    trigger = vehicle if kind in (EventKind.VEHICLE_RETURN, EventKind.VEHICLE_UPDATE) else None
    while True:
        occ = np.flatnonzero(np.isfinite(system.hol))
        if occ.size == 0:
            break
        if trigger is not None:
            row = system.costs[trigger, occ]
            if np.isfinite(row).any():
                H = system.now - system.hol[occ]
                with np.errstate(invalid="ignore"):
                    m = H - _penalised(V, row)
                m = np.where(np.isnan(m), -np.inf, m)
                k = int(np.argmax(m))
                if m[k] > eps:
                    c = int(occ[k])
                    system.commit(trigger, c, PassageKind.VEHICLE_TRIGGERED.value)
                    decisions.append(
                        AssignmentDecision(((trigger, c),), system.now, PassageKind.VEHICLE_TRIGGERED.value)
                    )
                    trigger = None
                    continue
            trigger = None
        margin, _ = node_margins(system, V, occ)
        k = int(np.argmax(margin))
        if not margin[k] > crossed:
            break
        c = int(occ[k])
        col = system.costs[:, c]
        v = int(np.argmin(col))
        system.commit(v, c, PassageKind.FIRST_PASSAGE.value)
        decisions.append(AssignmentDecision(((v, c),), system.now, PassageKind.FIRST_PASSAGE.value))
    return decisions


class MDPPPolicy:
    """Event-driven MDPP, or fixed-tick batch MDPP when ``config.tick`` is set."""

    relocate_to_chargers = False
    gasoline = False

    def __init__(self, V: float = 0.1, tick: float | None = None, eps: float = EPS):
        self.config = SchedulerConfig(V=V, tick=tick, eps=eps)
        self.name = f"mdpp(V={V:g})" if tick is None else f"mdpp(V={V:g},tick={tick:g})"
        self._last_tick = -math.inf

    @property
    def V(self) -> float:
        return self.config.V

    def next_decision_time(self, system) -> float:
        tick = self.config.tick
        if tick is not None:
            k = math.floor(system.now / tick + 1e-12)
            t = k * tick
            if t <= self._last_tick:
                t = (k + 1) * tick
            return t
        ev = next_passage_time(system, self.config.V)
        return math.inf if ev is None else ev.time

    def on_event(self, kind: EventKind, system, vehicle: int | None = None):
        if self.config.tick is None:
            return online_step(kind, system, self.config, vehicle)
        if kind != EventKind.PASSAGE:
            return []
        self._last_tick = system.now
        H = np.where(np.isfinite(system.hol), system.now - system.hol, 0.0)
        decision = solve_batch(H, system.costs, self.config.V, system.now)
        for v, c in decision.pairs:
            system.commit(v, c, "batch")
        return [decision] if decision.pairs else []


def exhaustive_best(H, C, V: float) -> float:
    """Best objective over all partial one-to-one matchings (small instances only)."""
    costs, _, _ = _as_arrays(C)
    H = np.asarray(H, dtype=float)
    pen = _penalised(V, costs)
    m, n = costs.shape
    best = 0.0
    for k in range(1, min(m, n) + 1):
        for vs in itertools.permutations(range(m), k):
            for cs in itertools.combinations(range(n), k):
                w = [float(H[c] - pen[v, c]) for v, c in zip(vs, cs)]
                if all(x > 0 for x in w):
                    best = max(best, math.fsum(w))
    return best
