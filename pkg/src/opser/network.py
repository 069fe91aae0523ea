"""Packet-level wireless network simulation.

``Network`` owns the event engine, the shared channel and the run counters.
``BaseNode`` implements everything the routing protocols have in common:
the half-duplex radio with frame locking and capture, the CSMA/CA transmit
queue with unicast ACK/retry, corona interest dissemination, and the
holding-timer / passive-ACK bookkeeping used by broadcast forwarding.
Protocol classes override the ``send_data``, ``on_data`` and ``on_*`` hooks.
"""

from __future__ import annotations

import math
from collections import Counter, OrderedDict, deque
from dataclasses import dataclass
from typing import Sequence

from .energy import EnergyAccount, PowerProfile, RadioState, is_eligible
from .engine import EventKind, SimulationError, Simulator, Stream, node_stream, to_us
from .mac import ACK_WAIT_US, CCA_US, TURNAROUND_US, CsmaConfig, CsmaProcedure, airtime_us
from .metrics import MetricsRecord, build_record
from .packet import BROADCAST, CID_BYTES, DATA_BYTES, Packet, PacketKind, ack_packet, cid_packet, data_packet
from .protocol import NeighborTable, OpserConfig, RouteStatus, dhd_max_us
from .radio import PropagationModel, PropagationParams, RxReport, mean_rssi, rssi_to_lqi, survives_interference


QUEUE_LIMIT = 64
# links whose mean RSSI sits this many sigmas below the detection floor are ignored
SHADOWING_CUTOFF_SIGMAS = 3.0

_ENERGY_STATE = {
    "idle": RadioState.IDLE,
    "rx": RadioState.RX,
    "tx": RadioState.TX,
    "turnaround": RadioState.IDLE,
    "sleep": RadioState.SLEEP,
}


class ConfigurationError(ValueError):
    pass


class Frame:
    __slots__ = ("fid", "tx", "packet", "start_us", "end_us", "receivers", "job")

    def __init__(self, fid, tx, packet, start_us, end_us, job):
        self.fid = fid
        self.tx = tx
        self.packet = packet
        self.start_us = start_us
        self.end_us = end_us
        self.receivers = []
        self.job = job


class Job:
    """One outgoing frame and its channel-access / acknowledgement state."""

    __slots__ = ("packet", "key", "unicast", "next_hop", "min_be", "max_be", "role", "trigger",
                 "attempts", "proc", "aborted", "transmitted", "acked", "timer", "state", "abortable")

    def __init__(self, packet: Packet, min_be: int, max_be: int, role: str,
                 trigger: int | None = None, abortable: bool = False):
        self.packet = packet
        self.key = packet.key
        self.unicast = packet.next_hop_id != BROADCAST
        self.next_hop = packet.next_hop_id if self.unicast else None
        self.min_be = min_be
        self.max_be = max_be
        self.role = role
        self.trigger = trigger
        self.attempts = 0
        self.proc = None
        self.aborted = False
        self.transmitted = False
        self.acked = False
        self.timer = None
        self.state = "queued"
        self.abortable = abortable


@dataclass
class Candidate:
    packet: Packet
    trigger: int
    timer: object
    min_be: int
    max_be: int
    priority: int | None = None
    job: Job | None = None


class BaseNode:
    protocol_name = "base"

    def __init__(self, net: "Network", node_id: int, pos: tuple[float, float]):
        self.net = net
        self.id = node_id
        self.pos = pos
        self.is_sink = node_id == net.sink_id
        self.energy = EnergyAccount(e_initial_j=net.e_initial_j)
        self.radio = "idle"
        self.alive = True
        # frames currently arriving: fid -> received power (mW)
        self.active: dict[int, float] = {}
        self.in_cca = False
        self.cca_peak = 0.0
        self.locked: Frame | None = None
        self.lock_rssi = 0.0
        self.lock_interf = 0.0
        self.cid_locks = 0
        self.cl: int | None = 1 if self.is_sink else None
        self.cid_seen: set[int] = set()
        self.cid_tx: Counter = Counter()
        self.nt = NeighborTable()
        self.route_status = RouteStatus.ACTIVE
        self.queue: deque[Job] = deque()
        self.current: Job | None = None
        self.seen: OrderedDict = OrderedDict()
        self.pending: dict[tuple[int, int], Candidate] = {}
        # broadcast frames sent and still waiting to overhear their relay
        self.awaiting: dict[tuple[int, int], Job] = {}
        self.wake_event = None
        self.data_sent = 0
        self.packet_counter = 0
        seed = net.seed
        self.rng_channel = node_stream(seed, node_id, Stream.CHANNEL)
        self.rng_backoff = node_stream(seed, node_id, Stream.BACKOFF)
        self.rng_dhd = node_stream(seed, node_id, Stream.DHD)
        self.rng_cid = node_stream(seed, node_id, Stream.CID)
        self.rng_error = node_stream(seed, node_id, Stream.ERROR)
        self.rng_traffic = node_stream(seed, node_id, Stream.TRAFFIC)

    # ------------------------------------------------------------------ radio

    @property
    def now_us(self) -> int:
        return self.net.sim.now_us

    def _set_radio(self, state: str) -> None:
        if not self.alive or state == self.radio:
            return
        if self.locked is not None and state != "rx":
            self.net.trace("rx_lost", self.id, fid=self.locked.fid, why=state)
            self.locked = None
        self.radio = state
        self.energy.transition(self.net.power, _ENERGY_STATE[state], self.now_us)
        if self.energy.dead:
            self._die()

    def _die(self) -> None:
        self.alive = False
        self.radio = "dead"
        self.locked = None
        for cand in self.pending.values():
            cand.timer.cancel()
        self.pending.clear()
        for job in self.awaiting.values():
            if job.timer is not None:
                job.timer.cancel()
        self.awaiting.clear()
        if self.current is not None and self.current.timer is not None:
            self.current.timer.cancel()
        self.current = None
        self.queue.clear()
        if self.wake_event is not None:
            self.wake_event.cancel()
        self.net.trace("dead", self.id)

    def eligible(self) -> bool:
        if not self.alive:
            return False
        self.energy.charge_until(self.net.power, self.now_us)
        if self.energy.dead:
            self._die()
            return False
        return is_eligible(self.energy, self.net.power)

    def channel_mw(self) -> float:
        return sum(self.active.values())

    def frame_start(self, frame: Frame, rssi: float) -> None:
        mw = 10.0 ** (rssi / 10.0)
        active = self.active
        active[frame.fid] = mw
        if self.in_cca:
            total = sum(active.values())
            if total > self.cca_peak:
                self.cca_peak = total
        if self.locked is not None:
            self.lock_interf += mw
        elif self.radio == "idle" and rssi >= self.net.prop.rx_thresh_dbm:
            self.lock_interf = sum(active.values()) - mw
            self.locked = frame
            self.lock_rssi = rssi
            if frame.packet.kind is PacketKind.CID:
                self.cid_locks += 1
            self._set_radio("rx")

    def frame_end(self, frame: Frame) -> None:
        self.active.pop(frame.fid, None)
        if self.locked is not frame:
            return
        self.locked = None
        self._set_radio("idle")
        if not self.alive:
            return
        prop = self.net.prop
        rssi = self.lock_rssi
        ok = survives_interference(rssi, self.lock_interf)
        collided = not ok
        if ok and prop.model is PropagationModel.TWO_RAY_GROUND_WITH_ERROR and prop.error_rate > 0:
            ok = self.rng_error.random() >= prop.error_rate
        lqi = rssi_to_lqi(rssi, prop.ed_min_dbm, prop.ed_max_dbm)
        report = RxReport(rssi, lqi, ok, collided)
        if ok:
            self.net.trace("rx", self.id, fid=frame.fid, src=frame.tx, lqi=lqi)
            self.receive(frame.packet, report)
        else:
            self.net.trace("rx_fail", self.id, fid=frame.fid, src=frame.tx, collided=collided)

    def sleep_until(self, t_us: int, then=None) -> None:
        if not self.alive or t_us <= self.now_us:
            if then is not None:
                then()
            return
        if self.wake_event is not None:
            self.wake_event.cancel()
        self._set_radio("sleep")
        self.net.trace("sleep", self.id, until=t_us)
        self.wake_event = self.net.sim.schedule_at(t_us, self._wake, then, target=self.id)

    def _wake(self, then) -> None:
        self.wake_event = None
        if not self.alive:
            return
        self._set_radio("idle")
        if then is not None:
            then()

    # -------------------------------------------------------------------- MAC

    def enqueue(self, job: Job, front: bool = False) -> None:
        if not self.alive:
            return
        if len(self.queue) >= QUEUE_LIMIT:
            self.net.drop("queue_overflow", self.id, job.key)
            return
        if front:
            self.queue.appendleft(job)
        else:
            self.queue.append(job)
        self._kick()

    def _kick(self) -> None:
        if self.current is None and self.queue and self.alive:
            job = self.queue.popleft()
            self.current = job
            self._begin_access(job)

    def _begin_access(self, job: Job) -> None:
        csma = self.net.csma
        min_be, max_be = job.min_be, job.max_be
        if self.net.be_override is not None and job.packet.kind is not PacketKind.CID:
            min_be, max_be = self.net.be_override
        job.proc = CsmaProcedure(min_be, max_be, csma.max_csma_backoffs, self.rng_backoff)
        self._schedule_backoff(job)

    def _schedule_backoff(self, job: Job) -> None:
        units = job.proc.next_backoff()
        job.state = "csma"
        if job.packet.kind is PacketKind.CID and self.locked is None:
            # receiver off between clear-channel checks while flooding levels
            self._set_radio("sleep")
        job.timer = self.net.sim.schedule(units * self.net.backoff_unit_us, self._cca_start, job,
                                          target=self.id)

    def _cca_start(self, job: Job) -> None:
        if job is not self.current or not self.alive:
            return
        if self.radio == "sleep":
            self._set_radio("idle")
        self.in_cca = True
        self.cca_peak = self.channel_mw()
        job.timer = self.net.sim.schedule(CCA_US, self._cca_end, job, target=self.id,
                                          action=EventKind.CCA_CHECK)

    def _cca_end(self, job: Job) -> None:
        self.in_cca = False
        if job is not self.current or not self.alive:
            return
        busy = (self.radio not in ("idle", "rx")
                or max(self.cca_peak, self.channel_mw()) >= self.net.cs_mw)
        if job.proc.on_cca(busy):
            job.state = "turnaround"
            self._set_radio("turnaround")
            job.timer = self.net.sim.schedule(TURNAROUND_US, self._start_tx, job, target=self.id)
        elif job.proc.failed:
            self.net.count_caf(self.id, job)
            self.on_caf(job)
        else:
            self._schedule_backoff(job)

    def _start_tx(self, job: Job) -> None:
        if job is not self.current or not self.alive:
            return
        job.state = "tx"
        job.attempts += 1
        if not job.transmitted and job.packet.kind is PacketKind.DATA and job.trigger is not None:
            self.net.note_forward(job.key, job.trigger, self.id)
        job.transmitted = True
        if not job.unicast and job.packet.kind is PacketKind.DATA:
            self.awaiting[job.key] = job
        self.net.transmit(self, job.packet, job)

    def _tx_done(self, frame: Frame) -> None:
        if not self.alive:
            return
        self._set_radio("idle")
        job = frame.job
        if job is None or job is not self.current:
            return
        if job.packet.kind is PacketKind.CID:
            self.on_cid_sent(job)
        elif job.unicast:
            job.state = "await_ack"
            job.timer = self.net.sim.schedule(ACK_WAIT_US, self._ack_timeout, job, target=self.id)
        else:
            self.on_broadcast_sent(job)

    def _ack_timeout(self, job: Job) -> None:
        if job is not self.current or not self.alive:
            return
        if job.attempts <= self.net.csma.mac_retries:
            self.net.trace("mac_retry", self.id, src=job.key[0], pid=job.key[1], attempt=job.attempts)
            self._begin_access(job)
        else:
            self.on_unicast_result(job, False, None, False)

    def send_ack(self, to: int, key: tuple[int, int]) -> None:
        self.net.sim.schedule(TURNAROUND_US, self._ack_now, to, key, target=self.id)

    def _ack_now(self, to: int, key: tuple[int, int]) -> None:
        if not self.alive or self.radio not in ("idle", "rx"):
            return
        self.net.transmit(self, ack_packet(self.id, to, key), None)

    def finish(self, job: Job) -> None:
        job.state = "done"
        if job.timer is not None:
            job.timer.cancel()
            job.timer = None
        if self.current is job:
            self.current = None
        self._kick()

    def abort_job(self, job: Job) -> bool:
        """Withdraw a frame that has not reached the air yet."""
        if job.transmitted or job.state in ("turnaround", "tx"):
            return False
        job.aborted = True
        if job is self.current:
            self.finish(job)
        else:
            try:
                self.queue.remove(job)
            except ValueError:
                pass
        return True

    # --------------------------------------------------------------------- CID

    def originate_cid(self, seq: int) -> None:
        if not self.is_sink:
            raise ConfigurationError(f"node {self.id} is not the sink and cannot originate CID")
        self.cl = 1
        self.cid_seen.add(seq)
        pkt = cid_packet(self.id, seq, self.net.proto.cid_ttl)
        self.net.trace("cid_origin", self.id, seq=seq, ttl=pkt.cid_ttl)
        self.enqueue(Job(pkt, self.net.csma.mac_min_be, self.net.csma.mac_max_be, "cid"))

    def cid_receive(self, pkt: Packet, rx: RxReport) -> None:
        seq = pkt.cid_seq_number
        if seq in self.cid_seen:
            self.net.trace("cid_dup", self.id, seq=seq, src=pkt.prev_hop_id)
            return
        self.cid_seen.add(seq)
        self.cl = pkt.cl + 1
        self.route_status = RouteStatus.ACTIVE
        entry = self.nt.get(pkt.prev_hop_id)
        if entry is None:
            self.nt.add(pkt.prev_hop_id, rx.lqi, pkt.cl, destination_id=pkt.cid_source_id,
                        seq_num=seq, next_hop_id=pkt.next_hop_id)
        else:
            entry.add_lqi(rx.lqi)
            entry.corona_level = pkt.cl
            entry.seq_num = seq
        self.net.trace("cid_cl", self.id, seq=seq, cl=self.cl, src=pkt.prev_hop_id, lqi=rx.lqi)
        cid_end = self.net.traffic_start_us
        if pkt.cid_ttl <= 1:
            self.net.trace("cid_ttl_drop", self.id, seq=seq)
            self.sleep_until(cid_end)
            return
        out = Packet(PacketKind.CID, prev_hop_id=self.id, length_bytes=CID_BYTES,
                     cid_source_id=pkt.cid_source_id, cid_seq_number=seq,
                     cid_ttl=pkt.cid_ttl - 1, cl=self.cl)
        proto = self.net.proto
        slot = (self.net.cid_start_us + (self.cl - 1) * to_us(proto.epoch_s)
                + self.rng_cid.randrange(max(1, to_us(proto.cid_jitter_s))))
        slot = max(slot, self.now_us)
        # nothing to learn until our own slot: sleep through the rest of the level
        self.sleep_until(slot, lambda: self._cid_contend(out))

    def _cid_contend(self, pkt: Packet) -> None:
        self.enqueue(Job(pkt, self.net.csma.mac_min_be, self.net.csma.mac_max_be, "cid"))

    def on_cid_sent(self, job: Job) -> None:
        seq = job.packet.cid_seq_number
        self.cid_tx[seq] += 1
        self.finish(job)
        self.sleep_until(self.net.traffic_start_us)

    # -------------------------------------------------------------- reception

    def receive(self, pkt: Packet, rx: RxReport) -> None:
        if not self.alive:
            return
        kind = pkt.kind
        if kind is PacketKind.CID:
            self.cid_receive(pkt, rx)
        elif kind is PacketKind.ACK:
            self._ack_receive(pkt, rx)
        else:
            self._data_receive(pkt, rx)

    def _ack_receive(self, pkt: Packet, rx: RxReport) -> None:
        key = (pkt.source_id, pkt.packet_id)
        job = self.current
        if pkt.next_hop_id == self.id:
            if (job is not None and job.unicast and job.key == key and job.state == "await_ack"
                    and pkt.prev_hop_id == job.next_hop):
                job.timer.cancel()
                job.timer = None
                self.on_unicast_result(job, True, rx, False)
                return
            waiting = self.awaiting.get(key)
            if waiting is not None:
                # explicit end-to-end ACK from the sink acts as the passive ACK
                self._passive_ack(waiting, pkt.prev_hop_id, 1, rx)
                return
        if pkt.prev_hop_id == self.net.sink_id:
            # a link-layer ACK only proves reception; the sink's ACK proves delivery
            self._overheard(key, pkt.prev_hop_id)

    def _data_receive(self, pkt: Packet, rx: RxReport) -> None:
        key = pkt.key
        addressed = pkt.next_hop_id == self.id
        if addressed:
            self.send_ack(pkt.prev_hop_id, key)
        if self.is_sink:
            if addressed or pkt.is_broadcast:
                self.net.deliver(pkt)
                if pkt.is_broadcast:
                    self.send_ack(pkt.prev_hop_id, key)
            return
        job = self.awaiting.get(key)
        if job is not None and pkt.prev_hop_id != job.trigger:
            self._passive_ack(job, pkt.prev_hop_id, pkt.cl, rx)
            return
        if addressed:
            # a unicast hand-over supersedes any holding timer for the same packet
            cand = self.pending.get(key)
            if cand is not None:
                if cand.job is not None and not self.abort_job(cand.job):
                    return
                cand.timer.cancel()
                del self.pending[key]
                self.net.trace("dhd_cancel", self.id, src=key[0], pid=key[1], by=pkt.prev_hop_id,
                               prio=cand.priority, handover=True)
            elif key in self.seen:
                return
            self.on_data(pkt, rx, True)
            return
        if self._overheard(key, pkt.prev_hop_id, pkt.cl):
            return
        if key in self.seen or not pkt.is_broadcast:
            return
        self.on_data(pkt, rx, False)

    def _overheard(self, key, sender: int, sender_cl: int | None = None) -> bool:
        cand = self.pending.get(key)
        if cand is None:
            return False
        if sender == cand.trigger:
            return True
        if sender_cl is not None and self.cl is not None and sender_cl > self.cl:
            # a relay further from the sink does not make our copy redundant
            return True
        if cand.job is not None and not self.abort_job(cand.job):
            return True
        cand.timer.cancel()
        del self.pending[key]
        self.net.trace("dhd_cancel", self.id, src=key[0], pid=key[1], by=sender, prio=cand.priority)
        return True

    def _passive_ack(self, job: Job, by: int, by_cl: int | None, rx: RxReport) -> None:
        del self.awaiting[job.key]
        self.pending.pop(job.key, None)
        if job.state in ("turnaround", "tx"):
            job.acked = True
        elif job is self.current:
            self.finish(job)
        else:
            job.state = "done"
            if job.timer is not None:
                job.timer.cancel()
                job.timer = None
            try:
                self.queue.remove(job)
            except ValueError:
                pass
        self.net.trace("passive_ack", self.id, src=job.key[0], pid=job.key[1], by=by)
        self.on_passive_ack(job, by, by_cl, rx)

    def mark_seen(self, key) -> None:
        seen = self.seen
        seen[key] = True
        seen.move_to_end(key)
        if len(seen) > self.net.proto.seen_cache_size:
            seen.popitem(last=False)

    # --------------------------------------------------- broadcast forwarding

    def schedule_candidate(self, pkt: Packet, delay_us: int, min_be: int, max_be: int,
                           priority: int | None = None) -> None:
        key = pkt.key
        timer = self.net.sim.schedule(delay_us, self._candidate_fire, key, target=self.id)
        self.pending[key] = Candidate(pkt, pkt.prev_hop_id, timer, min_be, max_be, priority)
        self.net.trace("dhd_set", self.id, src=key[0], pid=key[1], prio=priority,
                       fire=self.now_us + delay_us, trig=pkt.prev_hop_id)

    def _candidate_fire(self, key) -> None:
        cand = self.pending.get(key)
        if cand is None or not self.alive:
            return
        self.net.trace("dhd_fire", self.id, src=key[0], pid=key[1], prio=cand.priority)
        cand.job = self.on_candidate_fire(cand)
        if cand.job is None:
            self.pending.pop(key, None)

    def on_broadcast_sent(self, job: Job) -> None:
        # the radio is free again; the relay is awaited off the transmit queue
        self.finish(job)
        if job.acked or self.awaiting.get(job.key) is not job:
            return
        job.state = "await_passive"
        job.timer = self.net.sim.schedule(self.net.passive_wait_us, self._passive_timeout, job,
                                          target=self.id)

    def _passive_timeout(self, job: Job) -> None:
        job.timer = None
        if self.awaiting.get(job.key) is not job or not self.alive:
            return
        if job.attempts <= self.net.csma.mac_retries:
            self.net.trace("bcast_retry", self.id, src=job.key[0], pid=job.key[1], attempt=job.attempts)
            job.state = "queued"
            self.enqueue(job, front=True)
        else:
            del self.awaiting[job.key]
            self.pending.pop(job.key, None)
            self.net.drop("no_passive_ack", self.id, job.key)

    def on_caf(self, job: Job) -> None:
        kind = job.packet.kind
        if kind is PacketKind.CID:
            # every node must announce its level once: try again after a fresh jitter
            self.finish(job)
            jitter = 1 + self.rng_cid.randrange(max(1, to_us(self.net.proto.cid_jitter_s)))
            packet = job.packet
            self.sleep_until(self.now_us + jitter, lambda: self._cid_contend(packet))
            return
        if job.unicast:
            self.on_unicast_result(job, False, None, True)
            return
        if job.abortable and not job.transmitted:
            self.pending.pop(job.key, None)
            self.net.drop("caf", self.id, job.key)
            self.finish(job)
            return
        job.attempts += 1
        if job.attempts <= self.net.csma.mac_retries:
            self._begin_access(job)
        else:
            self.pending.pop(job.key, None)
            self.awaiting.pop(job.key, None)
            self.net.drop("caf", self.id, job.key)
            self.finish(job)

    def data_job(self, pkt: Packet, next_hop: int, min_be: int | None = None, max_be: int | None = None,
                 role: str = "send", trigger: int | None = None, abortable: bool = False) -> Job:
        csma = self.net.csma
        out = pkt.relayed(self.id, self.cl, next_hop)
        return Job(out, csma.mac_min_be if min_be is None else min_be,
                   csma.mac_max_be if max_be is None else max_be, role, trigger, abortable)

    # ------------------------------------------------------------ app / hooks

    def generate(self) -> None:
        self.packet_counter += 1
        pkt = data_packet(self.id, self.packet_counter, self.net.sink_id, self.cl or 0, self.now_us,
                          self.net.data_bytes)
        self.net.note_generated(pkt)
        if not self.alive:
            self.net.drop("dead_source", self.id, pkt.key)
            return
        if self.cl is None:
            self.net.drop("no_route", self.id, pkt.key)
            return
        self.mark_seen(pkt.key)
        self.send_data(pkt)

    def send_data(self, pkt: Packet) -> None:
        raise NotImplementedError

    def on_data(self, pkt: Packet, rx: RxReport, addressed: bool) -> None:
        raise NotImplementedError

    def on_candidate_fire(self, cand: Candidate) -> Job | None:
        raise NotImplementedError

    def on_passive_ack(self, job: Job, by: int, by_cl: int | None, rx: RxReport) -> None:
        pass

    def on_unicast_result(self, job: Job, ok: bool, rx: RxReport | None, caf: bool) -> None:
        if not ok:
            self.net.drop("unicast_failed", self.id, job.key)
        self.finish(job)


class Network:
    """A deployed network plus its event engine and run counters."""

    def __init__(
        self,
        positions: Sequence[tuple[float, float]],
        sink_id: int,
        node_cls: type[BaseNode],
        *,
        seed: int = 1,
        prop: PropagationParams | None = None,
        csma: CsmaConfig | None = None,
        power: PowerProfile | None = None,
        proto: OpserConfig | None = None,
        e_initial_j: float = 3.6,
        cid_start_s: float = 0.0,
        traffic_start_s: float = 2.0,
        data_bytes: int = DATA_BYTES,
        be_override: tuple[int, int] | None = None,
        trace: bool = False,
        meta: dict | None = None,
    ):
        if not positions:
            raise ConfigurationError("no nodes deployed")
        if not 0 <= sink_id < len(positions):
            raise ConfigurationError(f"sink id {sink_id} does not exist")
        self.seed = seed
        self.prop = prop or PropagationParams()
        self.csma = csma or CsmaConfig()
        self.power = power or PowerProfile()
        self.proto = proto or OpserConfig()
        self.e_initial_j = e_initial_j
        self.sink_id = sink_id
        self.data_bytes = data_bytes
        if be_override is not None and not 0 <= be_override[0] <= be_override[1]:
            raise ConfigurationError("backoff override needs 0 <= min <= max")
        self.be_override = be_override
        self.sim = Simulator()
        self.cid_start_us = to_us(cid_start_s)
        self.traffic_start_us = to_us(traffic_start_s)
        self.backoff_unit_us = self.csma.backoff_unit_us
        self.cs_mw = 10.0 ** (self.prop.cs_thresh_dbm / 10.0)
        self.floor_dbm = min(self.prop.rx_thresh_dbm, self.prop.cs_thresh_dbm)
        self.passive_wait_us = dhd_max_us(self.proto.hold_t_us, airtime_us(data_bytes))
        self.tracing = trace
        self.records: list[tuple] = []
        self.meta = dict(meta or {})
        self._fid = 0
        self.positions = [tuple(map(float, p)) for p in positions]
        self.nodes: list[BaseNode] = [node_cls(self, i, p) for i, p in enumerate(self.positions)]
        self.links = self._build_links()
        self.sources: list[int] = []
        # run counters
        self.generated: dict[tuple[int, int], int] = {}
        self.deliveries: dict[tuple[int, int], int] = {}
        self.dup_at_sink = 0
        self.caf_count = 0
        self.drops: Counter = Counter()
        self.forwards: Counter = Counter()
        self.cid_snapshot: dict | None = None
        self.sim.schedule_at(self.traffic_start_us, self._snapshot_cid, target=-1)
        self.trace("meta", -1, n_nodes=len(self.nodes), sink=sink_id, seed=seed,
                   protocol=node_cls.protocol_name, e_initial=e_initial_j, **self.meta)

    # -------------------------------------------------------------- topology

    def _build_links(self) -> list[list[tuple[int, float]]]:
        prop = self.prop
        sigma = prop.sigma_db if prop.model is PropagationModel.LOG_NORMAL_SHADOWING else 0.0
        cutoff = self.floor_dbm - SHADOWING_CUTOFF_SIGMAS * sigma
        links = []
        pos = self.positions
        for i, (xi, yi) in enumerate(pos):
            row = []
            for j, (xj, yj) in enumerate(pos):
                if i == j:
                    continue
                d = math.hypot(xi - xj, yi - yj)
                if d <= 0:
                    raise ConfigurationError(f"nodes {i} and {j} share a position")
                mu = mean_rssi(prop, d)
                if mu >= cutoff:
                    row.append((j, mu))
            links.append(row)
        return links

    def connectivity(self) -> list[list[int]]:
        """Neighbours whose mean RSSI clears the receiver sensitivity."""
        thr = self.prop.rx_thresh_dbm
        return [[j for j, mu in row if mu >= thr] for row in self.links]

    # ----------------------------------------------------------------- setup

    def start_cid(self, seq: int = 1, at_s: float | None = None) -> None:
        at = self.cid_start_us if at_s is None else to_us(at_s)
        self.sim.schedule_at(at, self.nodes[self.sink_id].originate_cid, seq, target=self.sink_id)

    def add_cbr_source(self, node_id: int, rate_pps: float, start_s: float, stop_s: float) -> None:
        if node_id == self.sink_id:
            raise ConfigurationError("the sink cannot be a traffic source")
        if not 0 <= node_id < len(self.nodes):
            raise ConfigurationError(f"source {node_id} does not exist")
        if rate_pps <= 0:
            raise ConfigurationError("packet rate must be positive")
        node = self.nodes[node_id]
        interval = to_us(1.0 / rate_pps)
        first = to_us(start_s) + node.rng_traffic.randrange(interval)
        stop = to_us(stop_s)
        self.sources.append(node_id)
        if first < stop:
            self.sim.schedule_at(first, self._app_tick, node, interval, stop, target=node_id,
                                 action=EventKind.APP_PACKET_GENERATE)

    def _app_tick(self, node: BaseNode, interval: int, stop: int) -> None:
        node.generate()
        nxt = self.sim.now_us + interval
        if nxt < stop:
            self.sim.schedule_at(nxt, self._app_tick, node, interval, stop, target=node.id,
                                 action=EventKind.APP_PACKET_GENERATE)

    # --------------------------------------------------------------- channel

    def transmit(self, node: BaseNode, packet: Packet, job: Job | None) -> Frame:
        now = self.sim.now_us
        dur = airtime_us(packet.length_bytes)
        node._set_radio("tx")
        self._fid += 1
        frame = Frame(self._fid, node.id, packet, now, now + dur, job)
        sigma = self.prop.sigma_db if self.prop.model is PropagationModel.LOG_NORMAL_SHADOWING else 0.0
        floor = self.floor_dbm
        nodes = self.nodes
        receivers = frame.receivers
        for j, mu in self.links[node.id]:
            rx = nodes[j]
            if not rx.alive:
                continue
            rssi = mu + rx.rng_channel.normal(0.0, sigma) if sigma > 0 else mu
            if rssi < floor:
                continue
            receivers.append(rx)
            rx.frame_start(frame, rssi)
        if self.tracing:
            self.trace("tx", node.id, fid=frame.fid, frame=packet.kind.value, to=packet.next_hop_id,
                       src=packet.source_id, pid=packet.packet_id, seq=packet.cid_seq_number,
                       cl=packet.cl, dur=dur)
        self.sim.schedule(dur, self._frame_end, frame, target=node.id, action=EventKind.FRAME_END_RX)
        return frame

    def _frame_end(self, frame: Frame) -> None:
        for rx in frame.receivers:
            rx.frame_end(frame)
        self.nodes[frame.tx]._tx_done(frame)

    # -------------------------------------------------------------- counters

    def trace(self, event: str, node: int, /, **fields) -> None:
        if self.tracing:
            self.records.append((self.sim.now_us, node, event, fields))

    def note_generated(self, pkt: Packet) -> None:
        self.generated[pkt.key] = pkt.gen_us
        self.trace("gen", pkt.source_id, src=pkt.source_id, pid=pkt.packet_id)

    def deliver(self, pkt: Packet) -> None:
        key = pkt.key
        if key in self.deliveries:
            self.dup_at_sink += 1
            self.trace("deliver", self.sink_id, src=key[0], pid=key[1], dup=True, by=pkt.prev_hop_id)
            return
        delay = self.sim.now_us - self.generated[key]
        self.deliveries[key] = delay
        self.trace("deliver", self.sink_id, src=key[0], pid=key[1], dup=False, delay_us=delay,
                   by=pkt.prev_hop_id)

    def note_forward(self, key, trigger: int, node: int) -> None:
        self.forwards[(key, trigger)] += 1
        self.trace("fwd", node, src=key[0], pid=key[1], trig=trigger)

    def count_caf(self, node: int, job: Job) -> None:
        self.caf_count += 1
        key = job.key or (None, None)
        self.trace("caf", node, src=key[0], pid=key[1], frame=job.packet.kind.value)

    def drop(self, reason: str, node: int, key) -> None:
        self.drops[reason] += 1
        key = key or (None, None)
        self.trace("drop", node, reason=reason, src=key[0], pid=key[1])

    def _snapshot_cid(self) -> None:
        now = self.sim.now_us
        per_node = []
        for n in self.nodes:
            n.energy.charge_until(self.power, now)
            ps = n.energy.per_state_j
            per_node.append({
                "tx_j": ps[RadioState.TX],
                "rx_j": ps[RadioState.RX],
                "cid_tx": sum(n.cid_tx.values()),
                "cid_locks": n.cid_locks,
            })
        self.cid_snapshot = {"t_us": now, "nodes": per_node}

    # ------------------------------------------------------------------- run

    def run_until(self, end_s: float) -> MetricsRecord:
        end_us = to_us(end_s)
        if end_us < 0:
            raise SimulationError("end time must be non-negative")
        self.sim.run_until(end_us)
        for n in self.nodes:
            n.energy.charge_until(self.power, self.sim.now_us)
        energies = [(n.energy.e_initial_j, n.energy.e_rem_j) for n in self.nodes]
        for n in self.nodes:
            ps = n.energy.per_state_j
            self.trace("energy", n.id, e_initial=n.energy.e_initial_j, e_rem=n.energy.e_rem_j,
                       tx=ps[RadioState.TX], rx=ps[RadioState.RX], idle=ps[RadioState.IDLE],
                       sleep=ps[RadioState.SLEEP])
        return build_record(
            sent=len(self.generated),
            delays_us=list(self.deliveries.values()),
            energies=energies,
            duplicates_at_sink=self.dup_at_sink,
            duplicate_tx=sum(c - 1 for c in self.forwards.values() if c > 1),
            caf_count=self.caf_count,
            drops=dict(self.drops),
        )
