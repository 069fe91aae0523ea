"""Wire formats for CID, DATA and ACK frames."""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

BROADCAST = -1

DATA_BYTES = 70
CID_BYTES = 25
ACK_BYTES = 11


class PacketKind(str, enum.Enum):
    CID = "CID"
    DATA = "DATA"
    ACK = "ACK"


DATA_ROUTING_FIELDS = ("cl", "packet_id", "destination_id", "source_id")


@dataclass(frozen=True, slots=True)
class Packet:
    kind: PacketKind
    prev_hop_id: int
    next_hop_id: int = BROADCAST
    length_bytes: int = DATA_BYTES
    # CID header
    cid_source_id: int | None = None
    cid_seq_number: int | None = None
    cid_ttl: int | None = None
    # corona level of the transmitter (CID and DATA)
    cl: int | None = None
    # DATA header
    packet_id: int | None = None
    destination_id: int | None = None
    source_id: int | None = None
    # simulation bookkeeping, not part of the header
    gen_us: int = 0

    @property
    def key(self) -> tuple[int, int] | None:
        if self.source_id is None:
            return None
        return (self.source_id, self.packet_id)

    @property
    def is_broadcast(self) -> bool:
        return self.next_hop_id == BROADCAST

    @property
    def sender_cl(self) -> int | None:
        return self.cl

    def routing_header(self) -> dict:
        """Routing fields carried on the wire (no forwarder list for DATA)."""
        if self.kind is PacketKind.DATA:
            return {f: getattr(self, f) for f in DATA_ROUTING_FIELDS}
        if self.kind is PacketKind.CID:
            return {
                "cid_source_id": self.cid_source_id,
                "cid_seq_number": self.cid_seq_number,
                "cl": self.cl,
                "prev_hop_id": self.prev_hop_id,
                "next_hop_id": self.next_hop_id,
                "cid_ttl": self.cid_ttl,
            }
        return {"source_id": self.source_id, "packet_id": self.packet_id}

    def relayed(self, by: int, cl: int, next_hop: int = BROADCAST) -> "Packet":
        """Copy for onward transmission with the relay's corona level."""
        return replace(self, prev_hop_id=by, cl=cl, next_hop_id=next_hop)


def cid_packet(sink_id: int, seq: int, ttl: int) -> Packet:
    if ttl < 1:
        raise ValueError("CID ttl must be >= 1")
    return Packet(PacketKind.CID, prev_hop_id=sink_id, next_hop_id=BROADCAST, length_bytes=CID_BYTES,
                  cid_source_id=sink_id, cid_seq_number=seq, cid_ttl=ttl, cl=1)


def data_packet(source_id: int, packet_id: int, sink_id: int, cl: int, gen_us: int,
                length_bytes: int = DATA_BYTES) -> Packet:
    return Packet(PacketKind.DATA, prev_hop_id=source_id, next_hop_id=BROADCAST, length_bytes=length_bytes,
                  cl=cl, packet_id=packet_id, destination_id=sink_id, source_id=source_id, gen_us=gen_us)


def ack_packet(sender: int, to: int, key: tuple[int, int]) -> Packet:
    return Packet(PacketKind.ACK, prev_hop_id=sender, next_hop_id=to, length_bytes=ACK_BYTES,
                  source_id=key[0], packet_id=key[1])
