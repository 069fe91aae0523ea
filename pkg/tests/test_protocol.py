import pytest
from hypothesis import given, strategies as st

from opser.engine import RngStream
from opser.protocol import (
    LqiLevel,
    NeighborTable,
    OpserConfig,
    RouteStatus,
    SendMode,
    TrustDegree,
    TrustEvent,
    choose_send_mode,
    compute_dhd,
    compute_dhd_us,
    dhd_max_us,
    fuzzy_priority,
    lqi_normalize,
    trust_degree,
    trust_update,
)

H, M, L = LqiLevel.HIGH, LqiLevel.MED, LqiLevel.LOW


@pytest.mark.parametrize("lqi, trust, expected", [
    (H, TrustDegree.HIGH, (1, 2, 4)),
    (H, TrustDegree.LOW, (2, 3, 5)),
    (M, TrustDegree.HIGH, (3, 4, 6)),
    (M, TrustDegree.LOW, (4, 5, 7)),
    (L, TrustDegree.HIGH, (5, 6, 8)),
    (L, TrustDegree.LOW, (6, 7, 9)),
])
def test_priority_table_rows(lqi, trust, expected):
    d = fuzzy_priority(lqi, trust)
    assert (d.priority_level, d.mac_min_be, d.mac_max_be) == expected


def test_same_level_fallback_priority():
    d = fuzzy_priority(None, None, same_level_fallback=True)
    assert (d.priority_level, d.mac_min_be, d.mac_max_be) == (7, 8, 10)


def test_ineligible_degree_has_no_row():
    with pytest.raises(ValueError):
        fuzzy_priority(H, TrustDegree.INELIGIBLE)


def test_trust_ladder_examples():
    assert trust_update(0.5, TrustEvent.SUCCESS) == pytest.approx(0.55)
    assert trust_update(0.5, TrustEvent.FAILURE) == 0.25
    assert trust_update(1.0, TrustEvent.SUCCESS) == 1.0
    assert trust_update(0.97, TrustEvent.SUCCESS) == 1.0
    assert trust_update(0.2, TrustEvent.OPPORTUNISTIC_WIN_RESET) == 0.5
    with pytest.raises(ValueError):
        trust_update(1.2, TrustEvent.SUCCESS)


@given(st.lists(st.sampled_from(list(TrustEvent)), max_size=200))
def test_trust_stays_in_unit_interval(events):
    tv = 0.5
    for ev in events:
        tv = trust_update(tv, ev)
        assert 0.0 <= tv <= 1.0


def test_lqi_levels_at_boundaries():
    assert lqi_normalize(85, 85, 170) is L
    assert lqi_normalize(170, 85, 170) is H
    assert lqi_normalize(100, 85, 170) is M
    with pytest.raises(ValueError):
        lqi_normalize(100, 170, 85)


def test_trust_degree_bands():
    assert trust_degree(3) is TrustDegree.HIGH
    assert trust_degree(2) is TrustDegree.LOW
    assert trust_degree(1) is TrustDegree.LOW
    assert trust_degree(0) is TrustDegree.INELIGIBLE


def test_dhd_ranges():
    rng = RngStream(1, 0)
    for _ in range(2000):
        assert 0 <= compute_dhd_us(1, 5000, rng) < 5000
        assert 10_000 <= compute_dhd_us(3, 5000, rng) < 15_000
    assert 0.0 <= compute_dhd(1, 0.005, rng) < 0.005
    with pytest.raises(ValueError):
        compute_dhd_us(8, 5000, rng)


@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**31))
def test_higher_priority_always_fires_first(p, gap, seed):
    q = min(7, p + gap)
    if q == p:
        return
    rng = RngStream(seed, 0)
    assert compute_dhd_us(p, 5000, rng) < compute_dhd_us(q, 5000, rng)


def test_passive_ack_wait_outlasts_every_band():
    assert dhd_max_us(5000, 2240) > compute_dhd_us(7, 5000, RngStream(1, 0))


def _table_one():
    nt = NeighborTable()
    nt.add(3, 160, corona_level=1, trust_value=0.7)
    nt.add(5, 132, corona_level=1, trust_value=0.25)
    return nt


def test_first_packet_goes_opportunistic():
    assert choose_send_mode(True, _table_one(), RouteStatus.ACTIVE, 2, 85) == (SendMode.OPPORTUNISTIC, None)


def test_most_trusted_neighbour_gets_unicast():
    assert choose_send_mode(False, _table_one(), RouteStatus.ACTIVE, 2, 85) == (SendMode.UNICAST, 3)


def test_failed_unicast_demotes_and_falls_back():
    nt = _table_one()
    entry = nt.get(3)
    entry.trust_value = trust_update(entry.trust_value, TrustEvent.FAILURE)
    assert entry.trust_value == pytest.approx(0.35)
    assert choose_send_mode(False, nt, RouteStatus.FAILED, 2, 85)[0] is SendMode.OPPORTUNISTIC
    assert choose_send_mode(False, nt, RouteStatus.ACTIVE, 2, 85)[0] is SendMode.OPPORTUNISTIC


def test_weak_links_fall_back_to_opportunistic():
    nt = NeighborTable()
    nt.add(3, 60, corona_level=1, trust_value=0.9)
    assert choose_send_mode(False, nt, RouteStatus.ACTIVE, 2, 85) == (SendMode.OPPORTUNISTIC, None)


def test_same_level_neighbour_is_not_a_unicast_target():
    nt = NeighborTable()
    nt.add(3, 200, corona_level=2, trust_value=0.9)
    assert nt.unicast_candidate(2, 85) is None
    assert nt.trustworthy_count(2) == 0


def test_lqi_average_is_running_mean():
    nt = NeighborTable()
    e = nt.add(1, 100, corona_level=1)
    for v in (110, 120):
        e.add_lqi(v)
    assert e.lqi_avg == pytest.approx(110)
    assert len(nt) == 1 and 1 in nt


def test_config_validation():
    assert OpserConfig().hold_t_us == 5000
    with pytest.raises(ValueError):
        OpserConfig(lqi_tl=200)
    with pytest.raises(ValueError):
        OpserConfig(cid_ttl=0)
