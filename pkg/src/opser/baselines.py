"""Comparison protocols sharing the OPSER engine and CID bootstrap.

OppBcast floods every data packet with plain randomized holding timers.
GreedyUnicast follows the single best lower-level link found during CID.
"""

from __future__ import annotations

from .network import BaseNode, Candidate, Job
from .packet import BROADCAST, Packet
from .protocol import NeighborTable
from .radio import RxReport


def oppbcast_delay_us(contention_window_us: int, rng) -> int:
    if contention_window_us <= 0:
        raise ValueError("contention window must be positive")
    return rng.randrange(contention_window_us)


def greedy_unicast_next_hop(nt: NeighborTable, own_cl: int | None) -> int | None:
    """Lower-level neighbour with the best average LQI, lowest id on ties."""
    best = None
    for e in nt:
        if own_cl is None or e.corona_level is None or e.corona_level >= own_cl:
            continue
        if best is None or e.lqi_avg > best.lqi_avg or (
                e.lqi_avg == best.lqi_avg and e.forwarder_id < best.forwarder_id):
            best = e
    return None if best is None else best.forwarder_id


class OppBcastNode(BaseNode):
    protocol_name = "oppbcast"

    def send_data(self, pkt: Packet) -> None:
        self.enqueue(self.data_job(pkt, BROADCAST, role="send"))

    def on_data(self, pkt: Packet, rx: RxReport, addressed: bool) -> None:
        if self.cl is None or self.cl > pkt.cl:
            return
        if pkt.destination_id != self.net.sink_id:
            self.net.drop("unknown_destination", self.id, pkt.key)
            return
        if not self.eligible():
            return
        self.mark_seen(pkt.key)
        window = int(round(self.net.proto.contention_window_s * 1e6))
        self.schedule_candidate(pkt, oppbcast_delay_us(window, self.rng_dhd),
                                self.net.csma.mac_min_be, self.net.csma.mac_max_be)

    def on_candidate_fire(self, cand: Candidate) -> Job:
        job = self.data_job(cand.packet, BROADCAST, cand.min_be, cand.max_be, "forward",
                            cand.trigger, abortable=True)
        self.enqueue(job)
        return job


class GreedyUnicastNode(BaseNode):
    protocol_name = "greedy_unicast"

    def _unicast(self, pkt: Packet, role: str, trigger: int | None) -> None:
        nh = greedy_unicast_next_hop(self.nt, self.cl)
        if nh is None:
            self.net.drop("void", self.id, pkt.key)
            return
        self.enqueue(self.data_job(pkt, nh, role=role, trigger=trigger))

    def send_data(self, pkt: Packet) -> None:
        self._unicast(pkt, "send", None)

    def on_data(self, pkt: Packet, rx: RxReport, addressed: bool) -> None:
        if not addressed:
            return
        if self.cl is None or self.cl > pkt.cl:
            return
        if pkt.destination_id != self.net.sink_id:
            self.net.drop("unknown_destination", self.id, pkt.key)
            return
        if not self.eligible():
            return
        self.mark_seen(pkt.key)
        self._unicast(pkt, "forward", pkt.prev_hop_id)

    def on_candidate_fire(self, cand: Candidate) -> Job | None:
        return None
