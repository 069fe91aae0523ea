"""Closed-form oracles for delivery probability and CID flooding energy.

Link outcomes are treated as independent Bernoulli trials.  The
opportunistic form accepts a different candidate set for every hop; with
the same set repeated on each hop it reduces to the classic single-set form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence


@dataclass(frozen=True)
class HopLinkProfile:
    per_hop_link_probs: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        probs = tuple(tuple(float(p) for p in hop) for hop in self.per_hop_link_probs)
        if not probs:
            raise ValueError("a route needs at least one hop")
        for hop in probs:
            if not hop:
                raise ValueError("every hop needs at least one candidate")
            for p in hop:
                if not 0.0 <= p < 1.0:
                    raise ValueError(f"link probability {p} outside [0, 1)")
        object.__setattr__(self, "per_hop_link_probs", probs)

    @property
    def n_hops(self) -> int:
        return len(self.per_hop_link_probs)

    @classmethod
    def uniform(cls, candidates: Sequence[float], n_hops: int) -> HopLinkProfile:
        if n_hops < 1:
            raise ValueError("n_hops must be at least 1")
        return cls(tuple(tuple(candidates) for _ in range(n_hops)))


def hop_success_prob(candidates: Sequence[float]) -> float:
    miss = 1.0
    for p in candidates:
        miss *= 1.0 - p
    # 1 - (1 - p) loses tiny p to rounding; the union is never below its best member
    return max(1.0 - miss, max(candidates))


def opportunistic_delivery_prob(profile: HopLinkProfile) -> float:
    prob = 1.0
    for hop in profile.per_hop_link_probs:
        prob *= hop_success_prob(hop)
    return prob


def unicast_delivery_prob(p: float, n_hops: int) -> float:
    if not 0.0 <= p < 1.0:
        raise ValueError(f"link probability {p} outside [0, 1)")
    if n_hops < 1:
        raise ValueError("n_hops must be at least 1")
    return p ** n_hops


def best_link_unicast_prob(profile: HopLinkProfile) -> float:
    """Unicast along the best candidate of every hop."""
    prob = 1.0
    for hop in profile.per_hop_link_probs:
        prob *= max(hop)
    return prob


def delivery_prob_dominance_check(profile: HopLinkProfile) -> bool:
    return opportunistic_delivery_prob(profile) >= best_link_unicast_prob(profile)


@dataclass(frozen=True)
class CidEnergyCost:
    per_node_j: tuple[float, ...]
    total_j: float
    bound_j: float


def cid_energy_bound(n_nodes: int, e_tx_j: float, e_rx_j: float, log_base: float = math.e) -> float:
    """Flood cost when every node hears log(N) neighbours."""
    if n_nodes < 1:
        raise ValueError("n_nodes must be at least 1")
    return n_nodes * e_tx_j + n_nodes * math.log(n_nodes, log_base) * e_rx_j


def cid_energy_cost(n_nodes: int, degrees: Sequence[int], e_tx_j: float, e_rx_j: float,
                    rounds: int = 1, log_base: float = math.e) -> CidEnergyCost:
    if rounds < 1:
        raise ValueError("rounds must be at least 1")
    if len(degrees) != n_nodes:
        raise ValueError("need one degree per node")
    per_node = tuple(rounds * (e_tx_j + d * e_rx_j) for d in degrees)
    total = 0.0
    for c in per_node:
        total += c
    return CidEnergyCost(per_node, total, cid_energy_bound(n_nodes, e_tx_j, e_rx_j, log_base))
