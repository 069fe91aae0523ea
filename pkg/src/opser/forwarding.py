"""OPSER node: hybrid opportunistic/unicast forwarding on top of ``BaseNode``."""

from __future__ import annotations

from .network import BaseNode, Candidate, Job
from .packet import BROADCAST, Packet
from .protocol import (
    RouteStatus,
    TrustDegree,
    TrustEvent,
    TRUST_THRESHOLD,
    choose_send_mode,
    compute_dhd_us,
    fuzzy_priority,
    lqi_normalize,
    trust_degree,
    trust_update,
)
from .radio import RxReport


class OpserNode(BaseNode):
    protocol_name = "opser"

    def send_data(self, pkt: Packet) -> None:
        self._dispatch(pkt, first=pkt.packet_id == 1 or self.data_sent == 0, role="send")

    def _dispatch(self, pkt: Packet, first: bool, role: str, trigger: int | None = None,
                  min_be: int | None = None, max_be: int | None = None,
                  abortable: bool = False, front: bool = False) -> Job:
        mode, next_hop = choose_send_mode(first, self.nt, self.route_status, self.cl,
                                          self.net.proto.lqi_tl)
        job = self.data_job(pkt, BROADCAST if next_hop is None else next_hop, min_be, max_be,
                            role, trigger, abortable)
        self.data_sent += 1
        self.net.trace("mode", self.id, src=pkt.source_id, pid=pkt.packet_id, mode=mode.value,
                       nh=next_hop, max_tv=self.nt.max_trust(), route=self.route_status.value,
                       first=first)
        self.enqueue(job, front=front)
        return job

    def on_data(self, pkt: Packet, rx: RxReport, addressed: bool) -> None:
        if self.cl is None or self.cl > pkt.cl:
            self.net.trace("cl_drop", self.id, src=pkt.source_id, pid=pkt.packet_id, cl=self.cl,
                           pkt_cl=pkt.cl)
            return
        if pkt.destination_id != self.net.sink_id:
            self.net.drop("unknown_destination", self.id, pkt.key)
            return
        if not self.eligible():
            self.net.trace("energy_drop", self.id, src=pkt.source_id, pid=pkt.packet_id)
            return
        if addressed:
            # unicast hand-over: forward with the standard backoff bounds
            self.mark_seen(pkt.key)
            self._dispatch(pkt, first=self.data_sent == 0, role="forward", trigger=pkt.prev_hop_id)
            return
        proto = self.net.proto
        count = self.nt.trustworthy_count(self.cl)
        degree = trust_degree(count)
        same_level = self.cl == pkt.cl
        if degree is TrustDegree.INELIGIBLE and not same_level:
            self.net.trace("ineligible", self.id, src=pkt.source_id, pid=pkt.packet_id)
            return
        level = lqi_normalize(rx.lqi, proto.lqi_tl, proto.lqi_th)
        decision = fuzzy_priority(level, degree if not same_level else None, same_level)
        delay = compute_dhd_us(decision.priority_level, proto.hold_t_us, self.rng_dhd)
        self.mark_seen(pkt.key)
        self.schedule_candidate(pkt, delay, decision.mac_min_be, decision.mac_max_be,
                                decision.priority_level)

    def on_candidate_fire(self, cand: Candidate) -> Job:
        return self._dispatch(cand.packet, first=self.data_sent == 0, role="forward",
                              trigger=cand.trigger, min_be=cand.min_be, max_be=cand.max_be,
                              abortable=True)

    def on_passive_ack(self, job: Job, by: int, by_cl: int | None, rx: RxReport) -> None:
        entry = self.nt.get(by)
        if entry is None:
            entry = self.nt.add(by, rx.lqi, by_cl)
            event = "new"
        else:
            if entry.trust_value < TRUST_THRESHOLD:
                entry.trust_value = trust_update(entry.trust_value, TrustEvent.OPPORTUNISTIC_WIN_RESET)
                event = "reset"
            else:
                entry.trust_value = trust_update(entry.trust_value, TrustEvent.SUCCESS)
                event = "success"
            entry.add_lqi(rx.lqi)
            if by_cl is not None:
                entry.corona_level = by_cl
        self.route_status = RouteStatus.ACTIVE
        self.net.trace("trust", self.id, nb=by, tv=entry.trust_value, event=event)

    def on_unicast_result(self, job: Job, ok: bool, rx: RxReport | None, caf: bool) -> None:
        entry = self.nt.get(job.next_hop)
        if ok:
            if entry is not None:
                entry.trust_value = trust_update(entry.trust_value, TrustEvent.SUCCESS)
                if rx is not None:
                    entry.add_lqi(rx.lqi)
            self.route_status = RouteStatus.ACTIVE
            self.net.trace("trust", self.id, nb=job.next_hop,
                           tv=None if entry is None else entry.trust_value, event="success")
            self.finish(job)
            return
        if entry is not None:
            entry.trust_value = trust_update(entry.trust_value, TrustEvent.FAILURE)
        self.route_status = RouteStatus.FAILED
        self.net.trace("trust", self.id, nb=job.next_hop,
                       tv=None if entry is None else entry.trust_value, event="failure", caf=caf)
        self.finish(job)
        # the same packet goes out again opportunistically, ahead of newer traffic
        self._dispatch(job.packet, first=False, role=job.role, trigger=job.trigger, front=True)
