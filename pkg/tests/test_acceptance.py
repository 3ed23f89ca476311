"""Headline acceptance checks, one test (or small group) per criterion.

Each check records a PASS/FAIL line through the ``report`` fixture; the lines
are repeated in the terminal summary at the end of the run.
"""

import itertools
import json
import math
import time

import numpy as np
import pytest

from saevsim import cli
from saevsim.baselines import make_policy
from saevsim.diagnostics import lemma1_K, stability_verdict
from saevsim.network import Link, RoadGraph
from saevsim.queueing import HolQueueState, inter_arrival_second_moment, step_waiting_time
from saevsim.scenario import high_demand_scenario, illustrative_example, ten_zone_scenario
from saevsim.scheduler import MDPPPolicy, batch_objective, solve_batch
from saevsim.sim import audit, run

TIME_TOL = 1e-6


def _golden(V, expected, key, report):
    t0 = time.perf_counter()
    result = run(illustrative_example(), MDPPPolicy(V=V))
    elapsed = time.perf_counter() - t0
    got = [(a.vehicle_id, a.customer_id, a.time) for a in result.assignments]
    ok = len(got) == len(expected) and all(
        g[0] == e[0] and g[1] == e[1] and abs(g[2] - e[2]) <= TIME_TOL for g, e in zip(got, expected)
    )
    ok = ok and elapsed < 1.0 and not result.violations
    pretty = ", ".join(f"V{v}->C{c}@{t:g}" for v, c, t in got)
    report(key, ok, f"{pretty} in {elapsed * 1e3:.1f} ms")
    assert ok, (got, elapsed, result.violations)


def test_golden_example_v01(report):
    _golden(0.1, [(2, 1, 1.5), (3, 2, 5.6), (4, 3, 15.8)], "golden-0.1", report)


def test_golden_example_v1(report):
    _golden(1.0, [(3, 2, 9.0), (2, 1, 15.0), (5, 3, 18.0)], "golden-1", report)


def _brute_force(H, C, V):
    """Best sum of positive coefficients over all partial one-to-one matchings."""
    m, n = C.shape
    best = 0.0
    for k in range(1, min(m, n) + 1):
        for rows in itertools.permutations(range(m), k):
            for cols in itertools.combinations(range(n), k):
                w = [H[c] - V * C[r, c] for r, c in zip(rows, cols)]
                if min(w) > 0:
                    best = max(best, math.fsum(w))
    return best


def test_batch_solver_matches_exhaustive(report):
    rng = np.random.default_rng(20180)
    mismatches = 0
    checked = 0
    elapsed = 0.0
    for _ in range(1000):
        m, n = rng.integers(1, 5, size=2)
        C = rng.uniform(1.0, 50.0, (m, n))
        H = rng.uniform(0.0, 100.0, n)
        for V in (0.0, 0.1, 1.0):
            t0 = time.perf_counter()
            dec = solve_batch(H, C, V)
            elapsed += time.perf_counter() - t0
            got = batch_objective(dec.pairs, H, C, V)
            vs = [v for v, _ in dec.pairs]
            cs = [c for _, c in dec.pairs]
            valid = len(set(vs)) == len(vs) and len(set(cs)) == len(cs)
            if not valid or got != _brute_force(H, C, V):
                mismatches += 1
            checked += 1
    ok = mismatches == 0 and elapsed < 5.0
    report("batch-oracle", ok, f"{checked - mismatches}/{checked} exact, solver time {elapsed:.2f} s")
    assert ok


def _random_connected_graph(rng, n):
    """Random strongly connected digraph with integer link times."""
    order = rng.permutation(n)
    edges = {}
    for a, b in zip(order, np.roll(order, -1)):  # a Hamiltonian cycle keeps it connected
        if a != b:
            edges[(a, b)] = int(rng.integers(1, 30))
    for _ in range(int(rng.integers(0, 3 * n))):
        a, b = rng.integers(0, n, size=2)
        if a != b:
            edges[(a, b)] = int(rng.integers(1, 30))
    vertices = [f"v{i}" for i in range(n)]
    links = [Link(vertices[a], vertices[b], float(t), float(t) / 2) for (a, b), t in edges.items()]
    return vertices, links, edges


def _floyd_warshall(n, edges):
    D = np.full((n, n), np.inf)
    np.fill_diagonal(D, 0.0)
    for (a, b), t in edges.items():
        D[a, b] = min(D[a, b], t)
    for k in range(n):
        D = np.minimum(D, D[:, [k]] + D[[k], :])
    return D


def test_sssp_matches_floyd_warshall(report):
    from saevsim.network import sssp

    rng = np.random.default_rng(7)
    t0 = time.perf_counter()
    bad = 0
    for _ in range(100):
        n = int(rng.integers(1, 51))
        vertices, links, edges = _random_connected_graph(rng, n)
        graph = RoadGraph(links, vertices)
        D = _floyd_warshall(n, edges)
        for i, v in enumerate(vertices):
            row = sssp(graph, v)
            expected = {vertices[j]: float(D[i, j]) for j in range(n) if math.isfinite(D[i, j])}
            bad += row != expected
    elapsed = time.perf_counter() - t0
    ok = bad == 0 and elapsed < 5.0
    report("sssp-oracle", ok, f"100 graphs, {bad} mismatching rows, {elapsed:.2f} s")
    assert ok


def test_hol_recursion_property_suite(report):
    rng = np.random.default_rng(11)
    n_nodes, steps = 4, 25_000
    lam = np.array([0.2, 0.35, 0.5, 0.65])
    serve_p = np.array([0.3, 0.5, 0.7, 0.9])
    A = (rng.random((steps, n_nodes)) < lam).astype(int)
    arrivals = [np.flatnonzero(A[:, c]) for c in range(n_nodes)]
    cases = {"empty": 0, "waiting": 0, "served": 0, "served-drained": 0}
    mismatches = negative = over_backlog = 0
    for c in range(n_nodes):
        state = HolQueueState(c)
        H = 0
        served = 0  # the HOL customer is arrival number ``served``
        for t in range(steps):
            chi = int(state.occupied)
            x = int(chi and rng.random() < serve_p[c])
            a = int(A[t, c])
            if chi:
                nxt = served + 1
                # a later arrival not yet seen has tau >= H + 1, which gives the same result
                tau = arrivals[c][nxt] - arrivals[c][served] if nxt < len(arrivals[c]) else H + 1
                expected = max(H + 1 - x * tau, 0)
                if not x:
                    cases["waiting"] += 1
                elif expected > 0:
                    cases["served"] += 1
                else:
                    cases["served-drained"] += 1
            else:
                expected = a
                cases["empty"] += 1
            state = step_waiting_time(state, x, a)
            served += x
            H = expected
            mismatches += state.H != expected
            negative += state.H < 0
            over_backlog += len(state) > state.H + 1
    total = n_nodes * steps
    ok = mismatches == 0 and negative == 0 and over_backlog == 0 and min(cases.values()) > 0
    report("hol-recursion", ok,
           f"{total} steps {cases}, mismatches {mismatches}, H<0 {negative}, backlog>H+1 {over_backlog}")
    assert ok


def test_second_moment_and_K_exact(report):
    m, K = inter_arrival_second_moment(0.5), lemma1_K([0.5])
    ok = m == 10.0 and K == 2.875
    report("second-moment", ok, f"closed form {m:g}, K {K:g}")
    assert ok


@pytest.mark.xfail(strict=True, reason="closed form (2+l)/l^2 is not the second moment of a geometric gap; "
                                       "samples converge to (2-l)/l^2, see the decisions ledger")
def test_second_moment_monte_carlo(report):
    rng = np.random.default_rng(3)
    tau = rng.geometric(0.5, 10**6).astype(float)
    est = float(np.mean(tau**2))
    target = inter_arrival_second_moment(0.5)
    rel = abs(est - target) / target
    ok = rel <= 0.01
    report("second-moment", ok,
           f"Monte-Carlo E[tau^2]={est:.4f} vs closed form {target:g} ({rel:.1%} off; "
           f"geometric value (2-l)/l^2 = {(2 - 0.5) / 0.25:g})")
    assert ok


@pytest.mark.slow
def test_stability_verdicts(report):
    stable, growing, worst = [], [], 0.0
    for load, bucket in ((0.6, stable), (1.5, growing)):
        sc = ten_zone_scenario(load=load, horizon=1e5)
        for seed in range(5):
            t0 = time.perf_counter()
            r = run(sc, MDPPPolicy(V=0.1), seed=seed, record_log=False)
            worst = max(worst, time.perf_counter() - t0)
            bucket.append(stability_verdict(r.metrics.sum_hol).verdict.value)
    n_stable = stable.count("STABLE")
    n_growing = growing.count("GROWING")
    ok = n_stable >= 4 and n_growing == 5 and worst < 120.0
    report("stability", ok,
           f"60%: {n_stable}/5 STABLE, 150%: {n_growing}/5 GROWING, slowest seed {worst:.1f} s")
    assert ok


@pytest.mark.slow
def test_cost_delay_tradeoff(report):
    sc = ten_zone_scenario(load=0.8, horizon=5000.0)
    cost, wait = {}, {}
    for V in (0.001, 0.01, 0.1, 1.0):
        rs = [run(sc, MDPPPolicy(V=V), seed=s, record_log=False) for s in range(5)]
        cost[V] = float(np.mean([r.metrics.time_avg_cost for r in rs]))
        wait[V] = float(np.mean([r.metrics.mean_wait for r in rs]))
    ok = cost[1.0] < cost[0.001] and wait[1.0] > wait[0.1]
    table = ", ".join(f"V={V:g}: cost {cost[V]:.3f} wait {wait[V]:.2f}" for V in cost)
    report("tradeoff", ok, table)
    assert ok


@pytest.mark.slow
def test_policy_dominance(report):
    sc = high_demand_scenario()
    wins = 0
    rows = []
    for seed in range(5):
        a = run(sc, make_policy("mdpp", 0.1), seed=seed, record_log=False).metrics
        b = run(sc, make_policy("charger_chasing"), seed=seed, record_log=False).metrics
        win = a.mean_wait < b.mean_wait and a.dispatch_km < b.dispatch_km
        wins += win
        rows.append(f"s{seed} wait {a.mean_wait:.2f}/{b.mean_wait:.2f} km {a.dispatch_km:.0f}/{b.dispatch_km:.0f}")
    ok = wins == 5
    report("dominance", ok, f"{wins}/5 seeds (MDPP/charger-chasing): " + "; ".join(rows))
    assert ok


def test_conservation_audits(report):
    runs = [
        (illustrative_example(), MDPPPolicy(V=0.1)),
        (illustrative_example(), MDPPPolicy(V=1.0)),
        (ten_zone_scenario(load=0.9, horizon=2000.0, max_wait=30.0), MDPPPolicy(V=0.1)),
        (ten_zone_scenario(load=0.9, horizon=2000.0), MDPPPolicy(V=0.1, tick=1.0)),
    ]
    for name in ("nearest_fcfs", "charger_chasing", "nonev_noreb"):
        runs.append((high_demand_scenario(horizon=480.0), make_policy(name)))
    runs.append((high_demand_scenario(horizon=480.0), MDPPPolicy(V=0.1)))
    problems, n_assign = [], 0
    for sc, policy in runs:
        r = run(sc, policy, record_log=False)
        problems += r.violations + audit(r)
        # charger occupancy replayed from the plug log, independent of the audit helper
        busy = {}
        for _, zone, delta, _ in r.charger_log:
            busy[zone] = busy.get(zone, 0) + delta
            if not 0 <= busy[zone] <= r.charger_slots[zone]:
                problems.append(f"{r.policy}: occupancy {busy[zone]} at {zone}")
        m = r.metrics
        if m.arrivals != m.assigned + m.lost + m.still_waiting:
            problems.append(f"{r.policy}: customer conservation")
        if r.V is not None:
            n_assign += len(r.assignments)
            problems += [f"{r.policy}: H={a.H} V*C={r.V * a.cost}"
                         for a in r.assignments if not a.H - r.V * a.cost > -1e-9]
    ok = not problems
    report("audits", ok, f"{len(runs)} runs, {n_assign} MDPP assignments checked, {len(problems)} problems")
    assert ok, problems[:5]


def test_determinism_byte_identical(tmp_path, report):
    first = tmp_path / "a"
    rc = cli.main(["run", "--scenario", "builtin:high-demand", "--policy", "charger_chasing",
                   "--horizon-min", "240", "--seed", "0,1", "--out", str(first)])
    assert rc == 0
    second = tmp_path / "b"
    manifest = json.loads((first / "manifest.json").read_text())
    manifest["out"] = str(second)
    (tmp_path / "echo.json").write_text(json.dumps(manifest))
    assert cli.main(["run", "--manifest", str(tmp_path / "echo.json")]) == 0
    third = tmp_path / "c"
    assert cli.main(["run", "--scenario", "builtin:ten-zone", "--V", "0.1", "--horizon-min", "3000",
                     "--seed", "4", "--out", str(third)]) == 0
    fourth = tmp_path / "d"
    assert cli.main(["run", "--scenario", "builtin:ten-zone", "--V", "0.1", "--horizon-min", "3000",
                     "--seed", "4", "--out", str(fourth)]) == 0
    diffs, compared = [], 0
    for x, y in ((first, second), (third, fourth)):
        for f in sorted(x.rglob("*")):
            if f.is_dir() or f.name == "manifest.json":
                continue
            compared += 1
            if f.read_bytes() != (y / f.relative_to(x)).read_bytes():
                diffs.append(str(f.relative_to(tmp_path)))
    ok = not diffs and compared >= 12
    report("determinism", ok, f"{compared} output files compared, {len(diffs)} differ")
    assert ok, diffs
