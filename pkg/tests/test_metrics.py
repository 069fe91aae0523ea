import pytest
from hypothesis import given, strategies as st

from opser.metrics import MetricsRecord, avg_e2e_delay, build_record, energy_metrics, pdr, total_energy


def _record(sent, delays_us, tec=1.0, n=1, dups=0):
    # tec spread over n nodes
    energies = [(tec / n, 0.0)] * n
    return build_record(sent=sent, delays_us=delays_us, energies=energies, duplicates_at_sink=dups)


def test_pdr_counts_unique_receptions():
    assert pdr(_record(100, [1000] * 87)) == 0.87
    assert pdr(_record(100, [1000] * 87, dups=9)) == 0.87
    assert pdr(_record(100, [])) == 0.0
    assert pdr(_record(0, [])) is None


def test_average_delay():
    assert avg_e2e_delay(_record(2, [10_000, 20_000])) == pytest.approx(0.015)
    assert avg_e2e_delay(_record(1, [42_000])) == 0.042
    assert avg_e2e_delay(_record(3, [])) is None


def test_energy_metrics():
    rec = MetricsRecord(sent_by_sources=600, received_at_sink=500,
                        per_packet_delay_s=(0.0,) * 500, tec_j=12.1, n_nodes=121)
    avg, nec = energy_metrics(rec)
    assert avg == pytest.approx(0.1)
    assert nec == pytest.approx(0.0242)
    empty = MetricsRecord(sent_by_sources=5, tec_j=12.1, n_nodes=121)
    assert energy_metrics(empty)[1] is None
    with pytest.raises(ValueError):
        energy_metrics(MetricsRecord())


def test_record_consistency_checks():
    with pytest.raises(ValueError):
        MetricsRecord(sent_by_sources=1, received_at_sink=2, per_packet_delay_s=(0.0, 0.0))
    with pytest.raises(ValueError):
        MetricsRecord(sent_by_sources=2, received_at_sink=2, per_packet_delay_s=(0.0,))


@given(st.lists(st.tuples(st.floats(0, 3.6), st.floats(0, 1)), max_size=50))
def test_tec_is_sum_of_node_consumption(pairs):
    energies = [(a, min(a, b)) for a, b in pairs]
    expected = 0.0
    for a, b in energies:
        expected += a - b
    assert total_energy(energies) == expected
    assert build_record(sent=0, delays_us=[], energies=energies).tec_j == expected


@given(st.integers(0, 500), st.data())
def test_pdr_times_sent_recovers_received(sent, data):
    received = data.draw(st.integers(0, sent))
    rec = _record(sent, [0] * received)
    if sent:
        assert round(pdr(rec) * sent) == received
