"""Hybrid opportunistic/unicast forwarding logic.

The pure decision functions (trust ladder, LQI and trust-degree fuzzification,
the priority table and holding delays) are kept free of simulator state so
they can be checked in isolation; ``OpserNode`` wires them into the network.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple

from .engine import RngStream

TV_INIT = 0.5
TV_MAX = 1.0
TV_MIN = 0.0
TRUST_THRESHOLD = 0.5


class TrustEvent(enum.Enum):
    SUCCESS = "success"
    FAILURE = "failure"
    OPPORTUNISTIC_WIN_RESET = "reset"


def trust_update(tv: float, event: TrustEvent) -> float:
    if not 0.0 <= tv <= 1.0:
        raise ValueError(f"trust value out of range: {tv}")
    if event is TrustEvent.SUCCESS:
        return min(TV_MAX, tv + 0.10 * tv)
    if event is TrustEvent.FAILURE:
        return max(TV_MIN, tv - 0.50 * tv)
    return TV_INIT


class LqiLevel(str, enum.Enum):
    LOW = "LOW"
    MED = "MED"
    HIGH = "HIGH"


class TrustDegree(str, enum.Enum):
    HIGH = "HIGH"
    LOW = "LOW"
    INELIGIBLE = "Ineligible"


def lqi_normalize(lqi: float, lqi_tl: float, lqi_th: float) -> LqiLevel:
    if not lqi_tl < lqi_th:
        raise ValueError("lqi_tl must be below lqi_th")
    if lqi <= lqi_tl:
        return LqiLevel.LOW
    if lqi >= lqi_th:
        return LqiLevel.HIGH
    return LqiLevel.MED


def trust_degree(trustworthy_count: int) -> TrustDegree:
    if trustworthy_count < 0:
        raise ValueError("count must be non-negative")
    if trustworthy_count > 2:
        return TrustDegree.HIGH
    if trustworthy_count >= 1:
        return TrustDegree.LOW
    return TrustDegree.INELIGIBLE


class FuzzyDecision(NamedTuple):
    lqi_norm: LqiLevel | None
    deg_trust: TrustDegree | None
    priority_level: int
    mac_min_be: int
    mac_max_be: int


# (LQI level, trust degree) -> (priority, macMinBE, macMaxBE)
PRIORITY_TABLE = {
    (LqiLevel.HIGH, TrustDegree.HIGH): (1, 2, 4),
    (LqiLevel.HIGH, TrustDegree.LOW): (2, 3, 5),
    (LqiLevel.MED, TrustDegree.HIGH): (3, 4, 6),
    (LqiLevel.MED, TrustDegree.LOW): (4, 5, 7),
    (LqiLevel.LOW, TrustDegree.HIGH): (5, 6, 8),
    (LqiLevel.LOW, TrustDegree.LOW): (6, 7, 9),
}
SAME_LEVEL_PRIORITY = (7, 8, 10)


def fuzzy_priority(lqi_norm: LqiLevel | None, deg_trust: TrustDegree | None,
                   same_level_fallback: bool = False) -> FuzzyDecision:
    if same_level_fallback:
        return FuzzyDecision(lqi_norm, deg_trust, *SAME_LEVEL_PRIORITY)
    try:
        row = PRIORITY_TABLE[(LqiLevel(lqi_norm), TrustDegree(deg_trust))]
    except (KeyError, ValueError):
        raise ValueError(f"no priority for ({lqi_norm}, {deg_trust})") from None
    return FuzzyDecision(lqi_norm, deg_trust, *row)


def compute_dhd_us(priority: int, hold_t_us: int, rng: RngStream) -> int:
    """Holding delay in microseconds: ``(priority - 1) * T + tau`` with tau in ``[0, T)``."""
    if not 1 <= priority <= 7:
        raise ValueError("priority must be within 1..7")
    if hold_t_us <= 0:
        raise ValueError("holding time must be positive")
    return (priority - 1) * hold_t_us + rng.randrange(hold_t_us)


def compute_dhd(priority: int, hold_t_s: float, rng: RngStream) -> float:
    return compute_dhd_us(priority, int(round(hold_t_s * 1e6)), rng) / 1e6


@dataclass
class NeighborEntry:
    forwarder_id: int
    trust_value: float = TV_INIT
    lqi_avg: float = 0.0
    lqi_samples: int = 0
    corona_level: int | None = None
    destination_id: int | None = None
    seq_num: int | None = None
    next_hop_id: int | None = None

    def add_lqi(self, lqi: float) -> None:
        # running arithmetic mean
        self.lqi_samples += 1
        self.lqi_avg += (lqi - self.lqi_avg) / self.lqi_samples


@dataclass
class NeighborTable:
    entries: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.entries)

    def __contains__(self, node_id):
        return node_id in self.entries

    def __iter__(self):
        return iter(self.entries.values())

    def get(self, node_id: int) -> NeighborEntry | None:
        return self.entries.get(node_id)

    def add(self, node_id: int, lqi: float, corona_level: int | None, **kw) -> NeighborEntry:
        entry = NeighborEntry(node_id, corona_level=corona_level, **kw)
        entry.add_lqi(lqi)
        self.entries[node_id] = entry
        return entry

    def max_trust(self) -> float:
        return max((e.trust_value for e in self.entries.values()), default=0.0)

    def trustworthy_count(self, own_cl: int | None) -> int:
        return sum(
            1 for e in self.entries.values()
            if e.trust_value >= TRUST_THRESHOLD and own_cl is not None
            and e.corona_level is not None and e.corona_level < own_cl
        )

    def unicast_candidate(self, own_cl: int | None, lqi_tl: float) -> NeighborEntry | None:
        """Most trusted lower-level neighbour passing the trust and LQI gates."""
        best = None
        for e in sorted(self.entries.values(), key=lambda e: e.forwarder_id):
            if e.trust_value < TRUST_THRESHOLD or e.lqi_avg < lqi_tl:
                continue
            if own_cl is None or e.corona_level is None or e.corona_level >= own_cl:
                continue
            if best is None or (e.trust_value, e.lqi_avg) > (best.trust_value, best.lqi_avg):
                best = e
        return best


class SendMode(str, enum.Enum):
    OPPORTUNISTIC = "opportunistic"
    UNICAST = "unicast"


class RouteStatus(str, enum.Enum):
    ACTIVE = "Active"
    FAILED = "Failed"


def choose_send_mode(first_packet: bool, nt: NeighborTable, route_status: RouteStatus,
                     own_cl: int | None, lqi_tl: float) -> tuple[SendMode, int | None]:
    """Opportunistic for the first packet, without trusted neighbours, or after a failure."""
    if first_packet or nt.max_trust() < TRUST_THRESHOLD or route_status is RouteStatus.FAILED:
        return SendMode.OPPORTUNISTIC, None
    cand = nt.unicast_candidate(own_cl, lqi_tl)
    if cand is None:
        return SendMode.OPPORTUNISTIC, None
    return SendMode.UNICAST, cand.forwarder_id


@dataclass(frozen=True)
class OpserConfig:
    hold_t_s: float = 0.005
    lqi_tl: float = 85.0
    lqi_th: float = 170.0
    cid_ttl: int = 32
    epoch_s: float = 0.05
    cid_jitter_s: float = 0.01
    seen_cache_size: int = 256
    contention_window_s: float = 0.005

    def __post_init__(self):
        if self.hold_t_s <= 0:
            raise ValueError("hold_t_s must be positive")
        if not self.lqi_tl < self.lqi_th:
            raise ValueError("lqi_tl must be below lqi_th")
        if self.cid_ttl < 1:
            raise ValueError("cid_ttl must be >= 1")
        if self.contention_window_s <= 0:
            raise ValueError("contention_window_s must be positive")

    @property
    def hold_t_us(self) -> int:
        return int(round(self.hold_t_s * 1e6))


def dhd_max_us(hold_t_us: int, frame_airtime_us: int) -> int:
    """Passive-ACK wait: one full band beyond the lowest priority plus one frame."""
    return 7 * hold_t_us + frame_airtime_us
