"""Unslotted IEEE 802.15.4 CSMA/CA with per-priority backoff-exponent bounds."""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple

from .engine import RngStream

SYMBOL_RATE = 62_500
DATA_RATE_BPS = 250_000
UNIT_BACKOFF_SYMBOLS = 20
CCA_SYMBOLS = 8
TURNAROUND_SYMBOLS = 12

UNIT_BACKOFF_US = UNIT_BACKOFF_SYMBOLS * 1_000_000 // SYMBOL_RATE  # 320
CCA_US = CCA_SYMBOLS * 1_000_000 // SYMBOL_RATE  # 128
TURNAROUND_US = TURNAROUND_SYMBOLS * 1_000_000 // SYMBOL_RATE  # 192
ACK_BYTES = 11
ACK_WAIT_US = 864


def airtime(frame_bytes: int, data_rate_bps: float = DATA_RATE_BPS) -> float:
    """Seconds needed to put ``frame_bytes`` on the air."""
    if frame_bytes <= 0:
        raise ValueError("frame_bytes must be positive")
    if data_rate_bps <= 0:
        raise ValueError("data rate must be positive")
    return 8.0 * frame_bytes / data_rate_bps


def airtime_us(frame_bytes: int, data_rate_bps: int = DATA_RATE_BPS) -> int:
    if frame_bytes <= 0 or data_rate_bps <= 0:
        raise ValueError("frame size and data rate must be positive")
    return (8 * frame_bytes * 1_000_000 + data_rate_bps - 1) // data_rate_bps


@dataclass(frozen=True)
class CsmaConfig:
    mac_min_be: int = 3
    mac_max_be: int = 5
    max_csma_backoffs: int = 7
    mac_retries: int = 3
    backoff_unit_s: float = UNIT_BACKOFF_SYMBOLS / SYMBOL_RATE
    symbol_rate: int = SYMBOL_RATE

    def __post_init__(self):
        if self.mac_min_be < 0 or self.mac_max_be < self.mac_min_be:
            raise ValueError("need 0 <= mac_min_be <= mac_max_be")
        if self.backoff_unit_s <= 0:
            raise ValueError("backoff_unit_s must be positive")
        if self.max_csma_backoffs < 0 or self.mac_retries < 0:
            raise ValueError("backoff and retry budgets must be non-negative")

    @property
    def backoff_unit_us(self) -> int:
        return int(round(self.backoff_unit_s * 1_000_000))

    def with_be(self, min_be: int, max_be: int) -> "CsmaConfig":
        return replace(self, mac_min_be=min_be, mac_max_be=max_be)


class TxOutcome(enum.Enum):
    SENT = "sent"
    CHANNEL_ACCESS_FAILURE = "caf"
    ABORTED = "aborted"


@dataclass(frozen=True)
class TxAttemptResult:
    outcome: TxOutcome
    total_backoff_s: float
    cca_attempts: int
    be_trace: tuple[int, ...] = ()


class CsmaProcedure:
    """One CSMA/CA channel-access attempt, advanced by CCA outcomes.

    ``next_backoff()`` returns the number of unit periods to wait before the
    next CCA; ``on_cca(busy)`` returns ``True`` when the frame may be sent,
    ``False`` to back off again, and sets ``failed`` once NB exceeds the budget.
    """

    __slots__ = ("min_be", "max_be", "max_backoffs", "rng", "nb", "be", "cca_attempts",
                 "backoff_units", "failed", "be_trace")

    def __init__(self, min_be: int, max_be: int, max_backoffs: int, rng: RngStream):
        self.min_be = min_be
        self.max_be = max_be
        self.max_backoffs = max_backoffs
        self.rng = rng
        self.nb = 0
        self.be = min_be
        self.cca_attempts = 0
        self.backoff_units = 0
        self.failed = False
        self.be_trace: list[int] = []

    def next_backoff(self) -> int:
        self.be_trace.append(self.be)
        units = self.rng.randint(0, (1 << self.be) - 1)
        self.backoff_units += units
        return units

    def on_cca(self, busy: bool) -> bool:
        self.cca_attempts += 1
        if not busy:
            return True
        self.nb += 1
        self.be = min(self.be + 1, self.max_be)
        if self.nb > self.max_backoffs:
            self.failed = True
        return False


def csma_transmit(
    config: CsmaConfig,
    channel_busy: Callable[[float], bool],
    rng: RngStream,
    should_abort: Callable[[float], bool] | None = None,
) -> TxAttemptResult:
    """Run one channel-access attempt against a channel probe.

    ``channel_busy(t)`` is queried at each CCA with the elapsed time in
    seconds since the attempt started; ``should_abort(t)`` models the routing
    layer overhearing the same packet before the CCA.
    """
    unit = config.backoff_unit_s
    cca = CCA_SYMBOLS / config.symbol_rate
    proc = CsmaProcedure(config.mac_min_be, config.mac_max_be, config.max_csma_backoffs, rng)
    elapsed = 0.0
    while True:
        elapsed += proc.next_backoff() * unit
        if should_abort is not None and should_abort(elapsed):
            return TxAttemptResult(TxOutcome.ABORTED, proc.backoff_units * unit, proc.cca_attempts,
                                   tuple(proc.be_trace))
        if proc.on_cca(channel_busy(elapsed)):
            return TxAttemptResult(TxOutcome.SENT, proc.backoff_units * unit, proc.cca_attempts,
                                   tuple(proc.be_trace))
        elapsed += cca
        if proc.failed:
            return TxAttemptResult(TxOutcome.CHANNEL_ACCESS_FAILURE, proc.backoff_units * unit,
                                   proc.cca_attempts, tuple(proc.be_trace))


class AckOutcome(enum.Enum):
    ACKED = "acked"
    FAILED = "failed"


class UnicastResult(NamedTuple):
    outcome: AckOutcome
    attempts: int
    attempt_results: tuple[TxAttemptResult, ...]


def unicast_with_ack(
    config: CsmaConfig,
    ack_timeout_s: float,
    rng: RngStream,
    channel_busy: Callable[[float], bool] = lambda t: False,
    ack_received: Callable[[int], bool] = lambda attempt: True,
) -> UnicastResult:
    """Transmit with up to ``1 + mac_retries`` attempts, each waiting for an ACK.

    A channel access failure ends the loop immediately.
    """
    if ack_timeout_s <= 0:
        raise ValueError("ack_timeout_s must be positive")
    results = []
    for attempt in range(1, config.mac_retries + 2):
        res = csma_transmit(config, channel_busy, rng)
        results.append(res)
        if res.outcome is not TxOutcome.SENT:
            return UnicastResult(AckOutcome.FAILED, attempt, tuple(results))
        if ack_received(attempt):
            return UnicastResult(AckOutcome.ACKED, attempt, tuple(results))
    return UnicastResult(AckOutcome.FAILED, config.mac_retries + 1, tuple(results))
