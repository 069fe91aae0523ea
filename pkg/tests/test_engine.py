import pytest
from hypothesis import given, strategies as st

from opser.engine import (
    EventKind,
    RngStream,
    SimulationError,
    Simulator,
    Stream,
    node_stream,
    to_s,
    to_us,
)


def test_events_fire_in_time_order():
    sim = Simulator()
    fired = []
    sim.schedule(30, fired.append, "c")
    sim.schedule(10, fired.append, "a")
    sim.schedule(20, fired.append, "b")
    sim.run_until(100)
    assert fired == ["a", "b", "c"]
    assert sim.now_us == 100


def test_simultaneous_events_keep_insertion_order():
    sim = Simulator()
    fired = []
    for tag in "xyz":
        sim.schedule_at(5, fired.append, tag)
    sim.run_until(5)
    assert fired == ["x", "y", "z"]


def test_cancelled_event_never_fires():
    sim = Simulator()
    fired = []
    ev = sim.schedule(10, fired.append, "gone")
    sim.schedule(10, fired.append, "kept")
    ev.cancel()
    ev.cancel()
    assert sim.pending() == 1
    sim.run_until(20)
    assert fired == ["kept"]


def test_events_after_horizon_stay_queued():
    sim = Simulator()
    fired = []
    sim.schedule(50, fired.append, 1)
    sim.run_until(49)
    assert fired == [] and sim.pending() == 1
    sim.run_until(50)
    assert fired == [1]


def test_scheduling_in_the_past_is_rejected():
    sim = Simulator()
    sim.run_until(100)
    with pytest.raises(SimulationError):
        sim.schedule_at(99, None)
    with pytest.raises(SimulationError):
        sim.run_until(50)


def test_event_log_records_dispatch():
    sim = Simulator(record_events=True)
    sim.schedule(3, None, target=7, action=EventKind.CCA_CHECK)
    sim.run_until(3)
    assert sim.event_log == [(3, 0, 7, "cca-check")]


def test_time_conversion_round_trips_microseconds():
    assert to_us(0.005) == 5000
    assert to_us(1e-6) == 1
    assert to_s(2240) == 0.00224


@given(st.lists(st.integers(min_value=0, max_value=1000), min_size=1, max_size=60))
def test_dispatch_order_is_time_then_insertion(delays):
    sim = Simulator()
    fired = []
    for i, d in enumerate(delays):
        sim.schedule(d, fired.append, (d, i))
    sim.run_until(1000)
    assert fired == sorted((d, i) for i, d in enumerate(delays))


def test_streams_are_reproducible_and_distinct():
    a = [RngStream(7, (1, 2)).random() for _ in range(3)]
    b = [RngStream(7, (1, 2)).random() for _ in range(3)]
    assert a == b
    s1, s2 = RngStream(7, (1, 2)), RngStream(7, (1, 3))
    assert [s1.random() for _ in range(5)] != [s2.random() for _ in range(5)]
    n1, n2 = node_stream(7, 0, Stream.BACKOFF), node_stream(7, 0, Stream.DHD)
    assert [n1.randrange(1000) for _ in range(5)] != [n2.randrange(1000) for _ in range(5)]


def test_randint_is_closed_interval():
    rng = RngStream(1, 0)
    draws = {rng.randint(0, 3) for _ in range(500)}
    assert draws == {0, 1, 2, 3}
