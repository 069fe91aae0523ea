import io

import pytest

from opser.baselines import (
    GreedyUnicastNode,
    OppBcastNode,
    greedy_unicast_next_hop,
    oppbcast_delay_us,
)
from opser.engine import RngStream
from opser.experiment import build_network, run_scenario
from opser.forwarding import OpserNode
from opser.network import ConfigurationError, Network
from opser.protocol import NeighborTable, OpserConfig
from opser.radio import PropagationParams
from opser.scenario import GridTopology, Scenario, TrafficConfig
from opser.trace import metrics_from_trace, read_trace, validate_trace, write_trace

STILL = PropagationParams(sigma_db=0.0)
LINE = [(0.0, 0.0), (30.0, 0.0), (60.0, 0.0), (90.0, 0.0)]


def _line(node_cls=OpserNode, proto=None, seed=1):
    net = Network(LINE, 0, node_cls, seed=seed, prop=STILL, proto=proto, trace=True)
    net.start_cid()
    return net


def test_line_gets_one_level_per_hop():
    net = _line()
    net.run_until(1.0)
    assert [n.cl for n in net.nodes] == [1, 2, 3, 4]
    assert all(sum(n.cid_tx.values()) <= 1 for n in net.nodes)


def test_ttl_one_stops_after_first_ring():
    net = _line(proto=OpserConfig(cid_ttl=1))
    net.run_until(1.0)
    assert [n.cl for n in net.nodes] == [1, 2, None, None]
    assert sum(net.nodes[1].cid_tx.values()) == 0


def test_only_the_sink_originates():
    net = _line()
    with pytest.raises(ConfigurationError):
        net.nodes[2].originate_cid(5)


def test_network_configuration_errors():
    with pytest.raises(ConfigurationError):
        Network([], 0, OpserNode)
    with pytest.raises(ConfigurationError):
        Network(LINE, 9, OpserNode)
    net = _line()
    with pytest.raises(ConfigurationError):
        net.add_cbr_source(0, 5.0, 2.0, 3.0)
    with pytest.raises(ConfigurationError):
        Network([(0.0, 0.0), (0.0, 0.0)], 0, OpserNode)


@pytest.mark.parametrize("node_cls", [OpserNode, OppBcastNode, GreedyUnicastNode])
def test_line_delivers_over_three_hops(node_cls):
    net = _line(node_cls)
    net.add_cbr_source(3, 2.0, 2.0, 4.0)
    rec = net.run_until(5.0)
    assert rec.sent_by_sources == 4
    assert rec.received_at_sink == 4
    # three hops of DATA airtime at least
    assert min(rec.per_packet_delay_s) >= 3 * 0.00224


def test_energy_accounts_are_conserved():
    net = _line()
    net.add_cbr_source(3, 5.0, 2.0, 4.0)
    rec = net.run_until(5.0)
    for n in net.nodes:
        spent = sum(n.energy.per_state_j.values())
        assert abs((n.energy.e_initial_j - n.energy.e_rem_j) - spent) <= 1e-12
    assert rec.tec_j == sum(a - b for a, b in rec.node_energy)


def _small_scenario(**kw):
    return Scenario(topology=GridTopology(4, 4, 10.0), sim_duration_s=4.0,
                    traffic=TrafficConfig(source_count=2), **kw)


def test_trace_replays_to_identical_metrics(tmp_path):
    path = tmp_path / "run.trace"
    res = run_scenario(_small_scenario(), 3, trace_path=path)
    events = read_trace(path)
    assert metrics_from_trace(events) == res.record
    assert validate_trace(events) == []


def test_validator_flags_tampered_traces():
    net = build_network(_small_scenario(), 2, trace=True)
    net.run_until(4.0)
    buf = io.StringIO()
    write_trace(net.records, buf)
    buf.seek(0)
    events = read_trace(buf)
    cid_tx = next(e for e in events if e["ev"] == "tx" and e["frame"] == "CID")
    energy = next(e for e in events if e["ev"] == "energy")
    energy["e_rem"] -= 1e-3
    events.insert(events.index(cid_tx) + 1, dict(cid_tx))
    problems = validate_trace(events)
    assert any("CID" in p for p in problems)
    assert any("energy" in p for p in problems)
    events[5]["t"] = -1
    assert any("time" in p for p in validate_trace(events))


def test_same_seed_same_result():
    a = run_scenario(_small_scenario(protocol="oppbcast"), 4)
    b = run_scenario(_small_scenario(protocol="oppbcast"), 4)
    assert a.record == b.record


def test_greedy_picks_best_lower_level_link():
    nt = NeighborTable()
    nt.add(4, 160, corona_level=2)
    nt.add(7, 120, corona_level=2)
    assert greedy_unicast_next_hop(nt, 3) == 4
    same = NeighborTable()
    same.add(4, 200, corona_level=3)
    assert greedy_unicast_next_hop(same, 3) is None
    lone = NeighborTable()
    lone.add(9, 10, corona_level=1)
    assert greedy_unicast_next_hop(lone, 3) == 9


def test_oppbcast_delay_within_window():
    rng = RngStream(1, 0)
    assert all(0 <= oppbcast_delay_us(5000, rng) < 5000 for _ in range(1000))
    with pytest.raises(ValueError):
        oppbcast_delay_us(0, rng)


def test_empty_run_advances_clock():
    net = Network(LINE, 0, OpserNode, prop=STILL)
    rec = net.run_until(100.0)
    assert net.sim.now_us == 100_000_000
    assert rec.sent_by_sources == 0 and rec.received_at_sink == 0
