"""Lyapunov instrumentation: the quadratic Lyapunov function, its drift, the
per-step drift bound constant and a windowed stability verdict.

A small discrete-time MDPP harness is included so the pathwise drift
inequality can be checked against queues that follow the unit-step recursion
exactly, with the true inter-arrival times known in advance.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np

from .errors import DomainError, InputError
from .queueing import HolQueueState, step_waiting_time
from .scheduler import solve_batch

LAMBDA_MIN = 1e-9


@dataclass(frozen=True)
class LyapunovSnapshot:
    time: float
    value: float
    terms: tuple


def lyapunov(H, rates, time: float = 0.0) -> LyapunovSnapshot:
    """``L = 1/2 sum lambda_c H_c^2``."""
    H = np.asarray(H, dtype=float)
    lam = np.asarray(rates, dtype=float)
    if H.shape != lam.shape:
        raise InputError("H and rates must have the same shape")
    terms = 0.5 * lam * H**2
    return LyapunovSnapshot(time, math.fsum(terms.tolist()), tuple(terms.tolist()))


def lemma1_K(rates) -> float:
    """``1/2 sum (lambda^2 + lambda + 2/lambda + 1)`` over nodes with ``0 < lambda < 1``."""
    lam = [float(x) for x in np.atleast_1d(rates)]
    for x in lam:
        if not (LAMBDA_MIN <= x < 1.0):
            raise DomainError(f"arrival rate {x} outside [{LAMBDA_MIN}, 1)")
    return 0.5 * math.fsum(x * x + x + 2.0 / x + 1.0 for x in lam)


@dataclass
class DriftSeries:
    times: np.ndarray
    drift: np.ndarray
    running_mean: np.ndarray

    def to_csv(self) -> str:
        rows = ["time,drift,running_mean"]
        rows += [f"{t:.6f},{d:.9g},{m:.9g}" for t, d, m in zip(self.times, self.drift, self.running_mean)]
        return "\n".join(rows) + "\n"


def empirical_drift(snapshots) -> DriftSeries:
    """One-step differences ``L(t+1) - L(t)`` and their running mean."""
    snaps = list(snapshots)
    if len(snaps) < 2:
        raise InputError("need at least two snapshots")
    values = np.array([s.value for s in snaps])
    times = np.array([s.time for s in snaps[:-1]])
    d = np.diff(values)
    return DriftSeries(times, d, np.cumsum(d) / np.arange(1, len(d) + 1))


class Verdict(str, Enum):
    STABLE = "STABLE"
    GROWING = "GROWING"
    INCONCLUSIVE = "INCONCLUSIVE"


@dataclass
class StabilityReport:
    window_means: list
    window_bounds: list
    verdict: Verdict
    factor: float
    time_avg_cost: float | None = None
    K: float | None = None
    flags: list = field(default_factory=list)

    def to_json(self) -> str:
        d = asdict(self)
        d["verdict"] = self.verdict.value
        return json.dumps(d, indent=2, sort_keys=True)


def _batch_se(x: np.ndarray, batches: int) -> float:
    """Standard error of the mean of ``x`` from non-overlapping batch means."""
    size = len(x) // batches
    if size < 1 or batches < 2:
        return 0.0
    means = x[: size * batches].reshape(batches, size).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(batches))


def stability_verdict(
    series,
    windows: int = 4,
    warmup_fraction: float = 0.1,
    factor: float = 1.2,
    min_window: int = 10,
    noise_z: float = 3.0,
    batches: int = 10,
    time_avg_cost: float | None = None,
    K: float | None = None,
) -> StabilityReport:
    """Compare the last two window means of a per-step ``sum_c H_c`` series.

    The series after warm-up is split into ``windows`` equal windows (a
    remainder is dropped from the start).  The verdict is STABLE when the last
    mean is at most ``factor`` times the previous one, or when the increase is
    within ``noise_z`` standard errors (batch means inside each window); a
    lightly loaded system has near-zero window means whose ratio is pure noise.
    """
    if windows < 4:
        raise InputError("at least 4 windows are required")
    x = np.asarray(series, dtype=float)
    start = int(math.floor(len(x) * warmup_fraction))
    body = x[start:]
    size = len(body) // windows
    if size < min_window:
        return StabilityReport([], [], Verdict.INCONCLUSIVE, factor, time_avg_cost, K,
                               ["horizon too short for the requested windows"])
    offset = start + len(body) - size * windows
    bounds, means, chunks = [], [], []
    for k in range(windows):
        a = offset + k * size
        bounds.append((a, a + size))
        chunks.append(x[a:a + size])
        means.append(float(np.mean(chunks[-1])))
    last, prev = means[-1], means[-2]
    se = math.hypot(_batch_se(chunks[-1], batches), _batch_se(chunks[-2], batches))
    flags = []
    stable = last <= factor * prev
    if not stable and last - prev <= noise_z * se:
        stable = True
        flags.append("increase within sampling noise")
    return StabilityReport(means, bounds, Verdict.STABLE if stable else Verdict.GROWING, factor,
                           time_avg_cost, K, flags)


def node_rates(trips, n_nodes: int, horizon: float) -> np.ndarray:
    """Per-node arrivals per minute from a trip list with ``node_id`` set."""
    counts = np.zeros(n_nodes)
    for t in trips:
        counts[t.node_id] += 1
    return counts / horizon


def windowed_rates(trips, n_nodes: int, now: float, window: float = 1440.0) -> np.ndarray:
    """Empirical per-node rates over ``(now - window, now]``."""
    span = min(window, now)
    counts = np.zeros(n_nodes)
    if span <= 0:
        return counts
    for t in trips:
        if now - window < t.arrival_time <= now:
            counts[t.node_id] += 1
    return counts / span


# discrete-time harness -------------------------------------------------------

@dataclass
class DiscreteTrace:
    H: np.ndarray        # (steps + 1, nodes)
    x: np.ndarray        # (steps, nodes) service indicators
    A: np.ndarray        # (steps, nodes) arrivals
    tau: np.ndarray      # (steps, nodes) inter-arrival behind the HOL, nan when unoccupied
    cost: np.ndarray     # (steps,) dispatch cost of the chosen assignment
    backlog: np.ndarray  # (steps + 1, nodes)
    rates: np.ndarray


def run_discrete_mdpp(rates, n_vehicles: int, steps: int, V: float, seed: int = 0,
                      cost_range=(1.0, 10.0)) -> DiscreteTrace:
    """Unit-step MDPP on Bernoulli arrivals with i.i.d. uniform dispatch costs.

    Arrival sequences are drawn up front so the recorded ``tau`` is the true
    gap to the next arrival even when that arrival lies in the future.
    """
    lam = np.asarray(rates, dtype=float)
    if np.any((lam <= 0) | (lam >= 1)):
        raise DomainError("rates must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    n = len(lam)
    A = (rng.random((steps, n)) < lam).astype(np.int8)
    arrivals = [np.flatnonzero(A[:, c]) for c in range(n)]
    states = [HolQueueState(c) for c in range(n)]
    H = np.zeros((steps + 1, n))
    backlog = np.zeros((steps + 1, n), dtype=int)
    x = np.zeros((steps, n), dtype=np.int8)
    tau = np.full((steps, n), np.nan)
    cost = np.zeros(steps)
    lo, hi = cost_range
    for t in range(steps):
        h = np.array([s.H for s in states], dtype=float)
        C = rng.uniform(lo, hi, (n_vehicles, n))
        occupied = np.array([s.occupied for s in states])
        dec = solve_batch(np.where(occupied, h, 0.0), C, V)
        served = {c for _, c in dec.pairs if occupied[c]}
        cost[t] = math.fsum(C[v, c] for v, c in dec.pairs if c in served)
        for c, s in enumerate(states):
            if s.occupied:
                stamp = s.backlog[0][1]
                later = arrivals[c][arrivals[c] > stamp]
                # no later arrival within the run: any tau >= H + 1 gives the same H'
                tau[t, c] = later[0] - stamp if len(later) else t - stamp + 1
            xc = 1 if c in served else 0
            x[t, c] = xc
            states[c] = step_waiting_time(s, xc, int(A[t, c]), customer_id=t)
        H[t + 1] = [s.H for s in states]
        backlog[t + 1] = [len(s) for s in states]
    return DiscreteTrace(H, x, A, tau, cost, backlog, lam)


def pathwise_drift_bound(trace: DiscreteTrace) -> tuple[np.ndarray, np.ndarray]:
    """Per-step ``(L(t+1) - L(t), bound)`` where the bound is the pathwise form of the
    drift inequality: ``1/2 sum lam (chi (1 - x tau)^2 + (1 - chi) A) - sum lam H (x tau - 1)``.
    """
    lam = trace.rates
    H0, H1 = trace.H[:-1], trace.H[1:]
    lhs = 0.5 * (lam * H1**2).sum(axis=1) - 0.5 * (lam * H0**2).sum(axis=1)
    chi = ~np.isnan(trace.tau)
    xt = np.where(chi, trace.x * np.nan_to_num(trace.tau), 0.0)
    k_t = 0.5 * (lam * np.where(chi, (1.0 - xt) ** 2, trace.A)).sum(axis=1)
    rhs = k_t - (lam * H0 * (xt - 1.0)).sum(axis=1)
    return lhs, rhs
