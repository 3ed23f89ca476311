import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from saevsim.errors import DomainError, InputError, LogicError
from saevsim.queueing import (
    ArrivalProcess,
    CustomerRequest,
    HolQueueState,
    abandon_expired,
    enqueue,
    inter_arrival_second_moment,
    serve_hol,
    step_waiting_time,
    windowed_rate,
)


def _discrete(H, backlog_stamps):
    """Discrete state at clock H + first stamp with the given arrival stamps."""
    s = HolQueueState(0)
    for i, t in enumerate(backlog_stamps):
        s.push(i, t)
    s.clock = backlog_stamps[0] + H if backlog_stamps else 0
    s.H = H if backlog_stamps else 0
    return s


def test_step_empty_with_arrival():
    s = step_waiting_time(HolQueueState(0), 0, 1)
    assert s.H == 1 and s.occupied


def test_step_not_served_grows():
    s = step_waiting_time(_discrete(5, [0]), 0, 0)
    assert s.H == 6


def test_step_served_picks_up_next_wait():
    s = _discrete(5, [0, 3])  # tau = 3
    assert s.tau == 3
    assert step_waiting_time(s, 1, 0).H == 3


def test_step_served_next_not_arrived():
    s = _discrete(2, [0])  # next customer arrives at 9, beyond the step
    out = step_waiting_time(s, 1, 0)
    assert out.H == 0 and not out.occupied


def test_step_does_not_mutate_input():
    s = _discrete(5, [0, 3])
    step_waiting_time(s, 1, 1)
    assert len(s) == 2 and s.H == 5


def test_step_rejects_bad_inputs():
    with pytest.raises(LogicError):
        step_waiting_time(HolQueueState(0), 1, 0)
    with pytest.raises(InputError):
        step_waiting_time(HolQueueState(0), 0, 2)


@given(st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=300))
@settings(max_examples=100, deadline=None)
def test_step_invariants(moves):
    s = HolQueueState(0)
    prev = 0
    for serve, arrive in moves:
        x = int(serve and s.occupied)
        s = step_waiting_time(s, x, int(arrive))
        assert s.H >= 0
        assert s.occupied == (len(s) > 0)
        assert s.occupied or s.H == 0
        assert len(s) <= s.H + 1
        if not x:
            # without service the wait only moves up (or starts at 1)
            assert s.H >= prev
        prev = s.H


def test_enqueue_continuous():
    s = HolQueueState(0)
    enqueue(s, CustomerRequest(1, "a", "b", 0.0, 1, node_id=0), 0.0)
    assert s.waiting_time(1.5) == 1.5
    enqueue(s, CustomerRequest(2, "a", "b", 4.0, 1, node_id=0), 4.0)
    assert s.tau == 4.0
    assert s.H == 4.0  # unchanged by the arrival itself
    with pytest.raises(LogicError):
        enqueue(s, CustomerRequest(2, "a", "b", 5.0, 1, node_id=0), 5.0)
    with pytest.raises(InputError):
        enqueue(s, CustomerRequest(3, "a", "b", 5.0, 1, node_id=7), 5.0)


@given(st.floats(0, 100), st.floats(0, 100))
def test_unit_rate_between_events(t1, dt):
    s = HolQueueState(0)
    s.push(1, 0.0)
    assert s.waiting_time(t1 + dt) - s.waiting_time(t1) == pytest.approx(dt)


def test_serve_hol_examples():
    s = HolQueueState(0)
    s.push("a", 0.0)
    s.push("b", 4.0)
    s, cid = serve_hol(s, 5.6)
    assert cid == "a" and s.H == pytest.approx(1.6)

    s = HolQueueState(0)
    s.push("a", 0.0)
    s, _ = serve_hol(s, 3.0)
    assert s.H == 0 and not s.occupied

    s = HolQueueState(0)
    for cid, t in (("a", 0.0), ("b", 1.0), ("c", 2.0)):
        s.push(cid, t)
    s, _ = serve_hol(s, 10.0)
    assert s.H == 9.0
    with pytest.raises(LogicError):
        serve_hol(HolQueueState(0), 1.0)


def test_abandon_examples():
    s = HolQueueState(0)
    s.push(1, 0.0)
    states, lost = abandon_expired([s], 30.0, None)
    assert lost == 0 and len(states[0]) == 1
    states, lost = abandon_expired([s], 30.0, 30.0)
    assert lost == 1 and not states[0].occupied and states[0].H == 0

    s = HolQueueState(0)
    s.push(1, 0.0)
    s.push(2, 25.0)
    states, lost = abandon_expired([s], 35.0, 30.0)
    assert lost == 1 and states[0].H == 10.0
    # the abandoned id may be reused afterwards
    states[0].push(1, 36.0)


def test_remove_non_hol():
    s = HolQueueState(0)
    for i in range(3):
        s.push(i, float(i))
    assert s.remove(1) and not s.remove(1)
    assert [c for c, _ in s.backlog] == [0, 2]


def test_second_moment_closed_form():
    assert inter_arrival_second_moment(0.5) == 10.0
    assert inter_arrival_second_moment(1 - 1e-12) == pytest.approx(3.0)
    for bad in (0.0, 1.0, -0.2, 1.5):
        with pytest.raises(DomainError):
            inter_arrival_second_moment(bad)


def test_bernoulli_gaps_follow_geometric_law():
    # gaps between Bernoulli(lam) arrivals are geometric on {1, 2, ...}: E[tau^2] = (2 - lam) / lam^2
    lam = 0.5
    A = ArrivalProcess(0, lam, seed=5).bernoulli_steps(10**6)
    gaps = np.diff(np.flatnonzero(A)).astype(float)
    assert np.mean(gaps**2) == pytest.approx((2 - lam) / lam**2, rel=0.02)


def test_arrival_process_validation():
    with pytest.raises(DomainError):
        ArrivalProcess(0, 1.0)
    with pytest.raises(InputError):
        ArrivalProcess(0, 0.5, mode="batch")
    assert ArrivalProcess(0, 0.0, mode="poisson").poisson_times(100).size == 0
    a = ArrivalProcess(0, 0.3, seed=9).bernoulli_steps(50)
    b = ArrivalProcess(0, 0.3, seed=9).bernoulli_steps(50)
    assert np.array_equal(a, b) and set(np.unique(a)) <= {0, 1}


def test_windowed_rate():
    times = [1.0, 2.0, 3.0, 50.0]
    assert windowed_rate(times, 55.0, window=10.0) == pytest.approx(0.1)
    assert windowed_rate(times, 4.0) == pytest.approx(0.75)


def test_request_deadline_validated():
    with pytest.raises(InputError):
        CustomerRequest(1, "a", "b", 5.0, 1, deadline=5.0)
