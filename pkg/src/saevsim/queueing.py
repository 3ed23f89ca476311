"""Per-node FIFO queues and head-of-line (HOL) waiting times.

Two clocks are supported.  In discrete mode time advances in unit steps and
``step_waiting_time`` applies the HOL recursion

    H' = chi * max(H + 1 - x * tau, 0) + (1 - chi) * A

where ``tau`` is the inter-arrival time between the HOL customer and the one
behind it.  In continuous mode the HOL wait is simply ``now - arrival`` of the
current HOL customer and grows at unit rate between events.

Arrival stamps are stored rather than ``tau`` itself; ``tau`` is derived from
them, which keeps it exact under abandonment.
"""

from __future__ import annotations

import copy
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import DomainError, InputError, LogicError


@dataclass
class CustomerRequest:
    id: int
    origin_zone: str
    dest_zone: str
    arrival_time: float
    level: int
    node_id: int = -1
    deadline: float | None = None
    trip_duration: float | None = None

    def __post_init__(self):
        if self.deadline is not None and self.deadline <= self.arrival_time:
            raise InputError(f"customer {self.id}: deadline must be after arrival")


@dataclass
class HolQueueState:
    """FIFO backlog of ``(customer_id, arrival_stamp)`` for one customer node.

    ``H`` is maintained explicitly in discrete mode (``clock`` is the current
    step).  In continuous mode use :meth:`waiting_time`.
    """

    node_id: int
    backlog: deque = field(default_factory=deque)
    H: float = 0
    clock: int = 0
    _ids: set = field(default_factory=set, repr=False)

    @property
    def occupied(self) -> bool:
        return len(self.backlog) > 0

    @property
    def tau(self):
        """Inter-arrival time between the HOL customer and the next one, if present."""
        if len(self.backlog) < 2:
            return None
        return self.backlog[1][1] - self.backlog[0][1]

    @property
    def hol_arrival(self) -> float | None:
        return self.backlog[0][1] if self.backlog else None

    def waiting_time(self, now: float) -> float:
        if not self.backlog:
            return 0.0
        return now - self.backlog[0][1]

    def push(self, customer_id, stamp) -> None:
        if customer_id in self._ids:
            raise LogicError(f"customer {customer_id!r} already queued at node {self.node_id}")
        self._ids.add(customer_id)
        self.backlog.append((customer_id, stamp))

    def pop(self):
        if not self.backlog:
            raise LogicError(f"node {self.node_id} has no customer to serve")
        cid, stamp = self.backlog.popleft()
        self._ids.discard(cid)
        return cid, stamp

    def remove(self, customer_id) -> bool:
        if customer_id not in self._ids:
            return False
        if self.backlog[0][0] == customer_id:
            self.backlog.popleft()
        else:
            self.backlog = deque(e for e in self.backlog if e[0] != customer_id)
        self._ids.discard(customer_id)
        return True

    def __len__(self):
        return len(self.backlog)


def step_waiting_time(state: HolQueueState, x: int, A: int, customer_id=None) -> HolQueueState:
    """Advance a discrete-mode queue by one step; returns a new state.

    A customer arriving during ``[t, t+1)`` gets stamp ``t`` and a waiting
    time of 1 at ``t+1``.
    """
    if A not in (0, 1) or x not in (0, 1):
        raise InputError("discrete mode requires x, A in {0, 1}")
    if x == 1 and not state.occupied:
        raise LogicError(f"cannot serve empty node {state.node_id}")
    new = copy.copy(state)
    new.backlog = deque(state.backlog)
    new._ids = set(state._ids)
    t = state.clock
    if A:
        new.push(t if customer_id is None else customer_id, t)
    if x:
        new.pop()
    new.clock = t + 1
    new.H = new.clock - new.backlog[0][1] if new.backlog else 0
    return new


def enqueue(state: HolQueueState, request: CustomerRequest, now: float) -> HolQueueState:
    """Append a continuous-mode arrival (in place)."""
    if request.node_id != state.node_id:
        raise InputError(f"request for node {request.node_id} sent to node {state.node_id}")
    state.push(request.id, now)
    state.H = state.waiting_time(now)
    return state


def serve_hol(state: HolQueueState, now: float):
    """Remove the HOL customer; the next customer's wait becomes the HOL wait."""
    cid, _ = state.pop()
    state.H = state.waiting_time(now)
    return state, cid


def abandon_expired(states: Iterable[HolQueueState], now: float, max_wait: float | None):
    """Drop every customer whose wait reached ``max_wait``; returns ``(states, lost)``."""
    states = list(states)
    if max_wait is None:
        return states, 0
    lost = 0
    for s in states:
        keep = deque(e for e in s.backlog if now - e[1] < max_wait)
        dropped = len(s.backlog) - len(keep)
        if dropped:
            for cid, stamp in s.backlog:
                if now - stamp >= max_wait:
                    s._ids.discard(cid)
            s.backlog = keep
            lost += dropped
        s.H = s.waiting_time(now)
    return states, lost


def inter_arrival_second_moment(lam: float) -> float:
    """E[tau^2] for geometric inter-arrival times with per-step arrival probability ``lam``."""
    if not (0.0 < lam < 1.0):
        raise DomainError(f"arrival rate must lie in (0, 1), got {lam}")
    return (2.0 + lam) / lam**2


@dataclass
class ArrivalProcess:
    node_id: int
    rate: float
    mode: str = "bernoulli"
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("bernoulli", "poisson"):
            raise InputError(f"unknown arrival mode {self.mode!r}")
        if self.mode == "bernoulli" and not (0.0 < self.rate < 1.0):
            raise DomainError("Bernoulli arrivals need 0 < rate < 1")
        if self.rate < 0:
            raise DomainError("rate must be non-negative")
        self._rng = np.random.default_rng(self.seed)

    def bernoulli_steps(self, steps: int) -> np.ndarray:
        """``A(t)`` for ``t = 0..steps-1``."""
        return (self._rng.random(steps) < self.rate).astype(np.int8)

    def poisson_times(self, horizon: float) -> np.ndarray:
        if self.rate == 0:
            return np.empty(0)
        n = self._rng.poisson(self.rate * horizon)
        return np.sort(self._rng.uniform(0.0, horizon, n))


def windowed_rate(arrival_times: Iterable[float], now: float, window: float = 1440.0) -> float:
    """Empirical arrivals per minute over ``(now - window, now]``."""
    span = min(window, now)
    if span <= 0:
        return math.nan
    n = sum(1 for a in arrival_times if now - window < a <= now)
    return n / span
