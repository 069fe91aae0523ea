"""Per-node radio energy accounting."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field


class RadioState(str, enum.Enum):
    TX = "Tx"
    RX = "Rx"
    IDLE = "Idle"
    SLEEP = "Sleep"


@dataclass(frozen=True)
class PowerProfile:
    p_tx_w: float = 0.02955
    p_rx_w: float = 0.0255
    p_idle_w: float = 0.0255
    p_sleep_w: float = 3e-6
    e_min_j: float = 0.18

    def __post_init__(self):
        if min(self.p_tx_w, self.p_rx_w, self.p_idle_w, self.p_sleep_w) < 0:
            raise ValueError("power draws must be non-negative")
        if not (self.p_sleep_w < self.p_idle_w <= self.p_rx_w):
            raise ValueError("need p_sleep < p_idle <= p_rx")

    def power(self, state: RadioState) -> float:
        if state is RadioState.TX:
            return self.p_tx_w
        if state is RadioState.RX:
            return self.p_rx_w
        if state is RadioState.IDLE:
            return self.p_idle_w
        return self.p_sleep_w


@dataclass
class EnergyAccount:
    """Lazily charged battery.

    Consumption is accumulated per state only; the remaining energy is
    derived from the per-state total so the two can never drift apart.
    """

    e_initial_j: float = 3.6
    state: RadioState = RadioState.IDLE
    state_entry_us: int = 0
    per_state_j: dict = field(default_factory=lambda: {s: 0.0 for s in RadioState})
    dead: bool = False

    @property
    def consumed_j(self) -> float:
        ps = self.per_state_j
        return ps[RadioState.TX] + ps[RadioState.RX] + ps[RadioState.IDLE] + ps[RadioState.SLEEP]

    @property
    def e_rem_j(self) -> float:
        if self.dead:
            return 0.0
        return max(0.0, self.e_initial_j - self.consumed_j)

    @property
    def state_entry_time(self) -> float:
        return self.state_entry_us / 1e6

    def charge_until(self, profile: PowerProfile, now_us: int) -> float:
        if now_us < self.state_entry_us:
            raise ValueError("energy accounting cannot move backwards in time")
        if self.dead:
            self.state_entry_us = now_us
            return 0.0
        dt_s = (now_us - self.state_entry_us) / 1e6
        cost = profile.power(self.state) * dt_s
        budget = self.e_initial_j - self.consumed_j
        if cost >= budget:
            cost = budget
            self.dead = True
        if cost:
            self.per_state_j[self.state] += cost
        self.state_entry_us = now_us
        return cost

    def transition(self, profile: PowerProfile, new_state: RadioState, now_us: int) -> float:
        cost = self.charge_until(profile, now_us)
        self.state = RadioState(new_state)
        return cost


def transition(account: EnergyAccount, profile: PowerProfile, new_state: RadioState, now_s: float) -> EnergyAccount:
    """Charge the time spent in the current state, then enter ``new_state``."""
    account.transition(profile, new_state, int(round(now_s * 1e6)))
    return account


def is_eligible(account: EnergyAccount, profile: PowerProfile) -> bool:
    return not account.dead and account.e_rem_j >= profile.e_min_j
