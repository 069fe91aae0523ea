"""Run-level delivery and energy metrics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence


@dataclass(frozen=True)
class MetricsRecord:
    sent_by_sources: int = 0
    received_at_sink: int = 0
    per_packet_delay_s: tuple[float, ...] = ()
    tec_j: float = 0.0
    n_nodes: int = 0
    duplicates_at_sink: int = 0
    caf_count: int = 0
    drops_by_reason: dict = field(default_factory=dict)
    duplicate_tx: int = 0
    node_energy: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.received_at_sink > self.sent_by_sources:
            raise ValueError("more unique receptions than packets sent")
        if len(self.per_packet_delay_s) != self.received_at_sink:
            raise ValueError("one delay per unique reception is required")


def total_energy(energies: Iterable[tuple[float, float]]) -> float:
    """Sum of (initial - remaining) over nodes, accumulated in node order."""
    tec = 0.0
    for e_initial, e_rem in energies:
        tec += e_initial - e_rem
    return tec


def build_record(*, sent: int, delays_us: Sequence[int], energies: Sequence[tuple[float, float]],
                 duplicates_at_sink: int = 0, duplicate_tx: int = 0, caf_count: int = 0,
                 drops: dict | None = None) -> MetricsRecord:
    """Assemble a record; used both at run end and when replaying a trace."""
    energies = tuple((float(a), float(b)) for a, b in energies)
    return MetricsRecord(
        sent_by_sources=sent,
        received_at_sink=len(delays_us),
        per_packet_delay_s=tuple(d / 1e6 for d in delays_us),
        tec_j=total_energy(energies),
        n_nodes=len(energies),
        duplicates_at_sink=duplicates_at_sink,
        caf_count=caf_count,
        drops_by_reason=dict(sorted((drops or {}).items())),
        duplicate_tx=duplicate_tx,
        node_energy=energies,
    )


def pdr(record: MetricsRecord) -> float | None:
    if record.sent_by_sources == 0:
        return None
    return record.received_at_sink / record.sent_by_sources


def avg_e2e_delay(record: MetricsRecord) -> float | None:
    if record.received_at_sink == 0:
        return None
    return sum(record.per_packet_delay_s) / record.received_at_sink


def energy_metrics(record: MetricsRecord) -> tuple[float, float | None]:
    """Average energy per node and energy per delivered packet (None without deliveries)."""
    if record.n_nodes <= 0:
        raise ValueError("record has no nodes")
    avg = record.tec_j / record.n_nodes
    nec = record.tec_j / record.received_at_sink if record.received_at_sink else None
    return avg, nec
