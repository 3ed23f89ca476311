import itertools
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from saevsim.errors import ConfigError, LogicError
from saevsim.network import CostMatrix
from saevsim.scheduler import (
    EventKind,
    MDPPPolicy,
    PassageKind,
    SchedulerConfig,
    assign_first_passage,
    assign_vehicle_triggered,
    batch_objective,
    exhaustive_best,
    max_weight_matching,
    next_passage_time,
    online_step,
    solve_batch,
    viable_pairs,
)

INF = math.inf


class FakeSystem:
    """Minimal dispatch state: HOL stamps, an idle-vehicle cost matrix and a commit log."""

    def __init__(self, now, hol, costs):
        self.now = now
        self.hol = np.array(hol, dtype=float)
        self.costs = np.array(costs, dtype=float).reshape(-1, len(hol))
        self.log = []

    def commit(self, v, c, trigger):
        assert math.isfinite(self.hol[c]) and np.isfinite(self.costs[v]).any()
        self.log.append((v, c, trigger))
        self.hol[c] = INF
        self.costs[v, :] = INF


# example state: vehicles 1-3 (rows 0-2), customers 1-2 (cols 0-1)
EXAMPLE_C = [[30, 25], [15, 20], [18, 4]]


def test_config_validation():
    with pytest.raises(ConfigError):
        SchedulerConfig(V=-1)
    with pytest.raises(ConfigError):
        SchedulerConfig(V=math.inf)
    with pytest.raises(ConfigError):
        SchedulerConfig(tick=0)


def test_solve_batch_nothing_viable():
    dec = solve_batch([1.0, 2.0], [[30, 25], [15, 21]], 0.1)
    assert dec.pairs == ()


def test_solve_batch_example():
    dec = solve_batch([1.6], [[30], [15]], 0.1, decided_at=1.6)
    assert dec.pairs == ((1, 0),) and dec.served_nodes == {0} and dec.decided_at == 1.6


def test_solve_batch_with_cost_matrix_ids():
    cm = CostMatrix(["a", "b"], [10, 11], np.array([[1.0, INF], [INF, 2.0]]))
    dec = solve_batch([5.0, 5.0], cm, 1.0)
    assert set(dec.pairs) == {("a", 10), ("b", 11)}


def _oracle(H, C, V):
    m, n = C.shape
    best = 0.0
    for k in range(1, min(m, n) + 1):
        for rows in itertools.permutations(range(m), k):
            for cols in itertools.combinations(range(n), k):
                if not all(math.isfinite(C[r, c]) for r, c in zip(rows, cols)):
                    continue
                w = [H[c] - V * C[r, c] for r, c in zip(rows, cols)]
                if all(x > 0 for x in w):
                    best = max(best, math.fsum(w))
    return best


costs = st.one_of(st.floats(1, 50, allow_nan=False), st.just(INF))


@st.composite
def instances(draw):
    m = draw(st.integers(0, 4))
    n = draw(st.integers(1, 4))
    C = np.array(draw(st.lists(costs, min_size=m * n, max_size=m * n)), dtype=float).reshape(m, n)
    H = np.array(draw(st.lists(st.floats(0, 100), min_size=n, max_size=n)))
    V = draw(st.sampled_from([0.0, 0.1, 1.0, 3.0]))
    return H, C, V


@given(instances())
@settings(max_examples=300, deadline=None)
def test_batch_optimal_and_one_to_one(inst):
    H, C, V = inst
    dec = solve_batch(H, C, V)
    vs = [v for v, _ in dec.pairs]
    cs = [c for _, c in dec.pairs]
    assert len(set(vs)) == len(vs) and len(set(cs)) == len(cs)
    assert all((v, c) in viable_pairs(H, C, V) for v, c in dec.pairs)
    assert batch_objective(dec.pairs, H, C, V) == pytest.approx(_oracle(H, C, V), abs=1e-9)
    assert exhaustive_best(H, C, V) == pytest.approx(_oracle(H, C, V), abs=1e-9)
    assert list(dec.pairs) == sorted(dec.pairs, key=lambda p: (p[1], p[0]))


def test_max_weight_matching_rectangular():
    W = np.array([[1.0, -1.0], [3.0, 2.0], [0.5, 4.0]])
    assert max_weight_matching(W) == [(1, 0), (2, 1)]
    assert max_weight_matching(np.zeros((0, 3))) == []
    assert max_weight_matching(-np.ones((2, 2))) == []


def test_viable_pairs_examples():
    H, C = [2.0, 0.0, 1.0], [[1, 1, INF], [5, 5, 5]]
    # absent arcs never qualify, even at V=0
    assert viable_pairs(H, C, 0.0) == {(0, 0), (1, 0), (1, 2)}
    assert viable_pairs([3.0], [[30]], 0.1) == set()  # exact tie is not viable
    t = 9.0 + 1e-6
    assert viable_pairs([t - 0.0, t - 5.0], EXAMPLE_C, 1.0) == {(2, 1)}


def test_next_passage_examples():
    ev = next_passage_time(FakeSystem(0.0, [0.0], [[30], [15]]), 0.1)
    assert ev.time == pytest.approx(1.5) and ev.node == 0 and ev.kind == PassageKind.FIRST_PASSAGE
    ev = next_passage_time(FakeSystem(5.6, [0.0, 5.0], EXAMPLE_C), 1.0)
    assert ev.time == pytest.approx(9.0) and ev.node == 1
    assert next_passage_time(FakeSystem(0.0, [0.0], np.zeros((0, 1))), 1.0) is None
    assert next_passage_time(FakeSystem(0.0, [0.0], [[INF]]), 1.0) is None
    assert next_passage_time(FakeSystem(0.0, [INF], [[1.0]]), 1.0) is None


def test_next_passage_never_in_the_past():
    ev = next_passage_time(FakeSystem(20.0, [0.0], [[4.0]]), 1.0)
    assert ev.time == 20.0


def test_assign_first_passage_examples():
    assert assign_first_passage(0, [[30], [15]], 0.1, 1.5).pairs == ((1, 0),)
    # the remaining costs for customer 1 at t=15
    assert assign_first_passage(0, [[30], [15]], 1.0, 15.0).pairs == ((1, 0),)
    assert assign_first_passage(0, [[INF], [7]], 1.0, 0.0).pairs == ((1, 0),)
    assert assign_first_passage(0, [[7], [7]], 1.0, 0.0).pairs == ((0, 0),)  # tie -> lowest id
    with pytest.raises(LogicError):
        assign_first_passage(0, [[INF]], 1.0, 0.0)


def test_assign_vehicle_triggered_examples():
    dec = assign_vehicle_triggered(0, [0.0, 0.6], [[18, 4]], 0.1, 5.6)
    assert dec.pairs == ((0, 1),) and dec.trigger == PassageKind.VEHICLE_TRIGGERED.value
    dec = assign_vehicle_triggered(0, [0.0, 0.0, 4.4], [[INF, INF, 3]], 1.0, 18.0)
    assert dec.pairs == ((0, 2),)
    assert assign_vehicle_triggered(0, [0.0, 0.0, 0.0], [[1, 1, 1]], 0.1, 18.0) is None
    # equal coefficients go to the lowest node
    assert assign_vehicle_triggered(0, [2.0, 2.0], [[1, 1]], 1.0, 0.0).pairs == ((0, 0),)


def test_online_refresh_without_viable_pairs():
    sys_ = FakeSystem(1.0, [0.0], [[30], [15]])
    assert online_step(EventKind.COST_REFRESH, sys_, SchedulerConfig(V=0.1)) == []
    assert next_passage_time(sys_, 0.1).time == pytest.approx(1.5)


def test_online_passage_is_right_limit():
    sys_ = FakeSystem(1.5, [0.0], [[30], [15]])
    # at a non-passage event the exact tie does not qualify...
    assert online_step(EventKind.ARRIVAL, sys_, SchedulerConfig(V=0.1)) == []
    # ...at the passage event it does
    decs = online_step(EventKind.PASSAGE, sys_, SchedulerConfig(V=0.1))
    assert [d.pairs for d in decs] == [((1, 0),)]


def test_online_vehicle_trigger_precedence():
    # vehicle 2 returns; node 0 has the largest margin overall, but the trigger picks its own best node
    sys_ = FakeSystem(10.0, [0.0, 5.0], [[1, 1], [INF, 0.5]])
    decs = online_step(EventKind.VEHICLE_RETURN, sys_, SchedulerConfig(V=1.0), vehicle=1)
    assert sys_.log[0] == (1, 1, "vehicle_triggered")
    assert sys_.log[1] == (0, 0, "first_passage")
    assert len(decs) == 2


def test_online_v0_serves_everything_it_can():
    sys_ = FakeSystem(3.0, [0.0, 1.0, 2.0], [[5, 6, 7], [8, 9, 1]])
    online_step(EventKind.ARRIVAL, sys_, SchedulerConfig(V=0.0))
    assert len(sys_.log) == 2
    assert [c for _, c, _ in sys_.log] == [0, 1]  # oldest HOL first


@given(st.floats(0.5, 60), st.floats(0.5, 60), st.floats(1, 50), st.floats(1, 50), st.floats(0.01, 2))
@settings(max_examples=200, deadline=None)
def test_online_matches_batch_when_one_pair_is_viable(h1, h2, c1, c2, V):
    H = np.array([h1, h2])
    C = np.array([[c1, INF], [INF, c2]])
    margins = H - V * np.array([c1, c2])
    assume(np.sum(margins > 1e-6) == 1 and np.all(np.abs(margins) > 1e-6))
    now = 100.0
    sys_ = FakeSystem(now, now - H, C)
    online_step(EventKind.COST_REFRESH, sys_, SchedulerConfig(V=V))
    assert [(v, c) for v, c, _ in sys_.log] == list(solve_batch(H, C, V).pairs)


def test_policy_tick_schedule():
    pol = MDPPPolicy(V=0.1, tick=2.0)
    sys_ = FakeSystem(0.0, [INF], [[1.0]])
    assert pol.next_decision_time(sys_) == 0.0
    pol.on_event(EventKind.PASSAGE, sys_)
    assert pol.next_decision_time(sys_) == 2.0
    sys_.now = 3.1
    assert pol.next_decision_time(sys_) == 2.0  # overdue tick fires at once
    assert pol.name == "mdpp(V=0.1,tick=2)" and MDPPPolicy(1.0).name == "mdpp(V=1)"


def test_policy_batch_tick_commits():
    pol = MDPPPolicy(V=0.1, tick=1.0)
    sys_ = FakeSystem(2.0, [0.0], [[30], [15]])
    decs = pol.on_event(EventKind.PASSAGE, sys_)
    assert decs[0].pairs == ((1, 0),) and sys_.log == [(1, 0, "batch")]
    assert pol.on_event(EventKind.ARRIVAL, sys_) == []
