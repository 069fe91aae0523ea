"""Deterministic discrete-event core.

Time is kept internally as integer microseconds so that every protocol
duration (backoff units, airtimes, holding delays) is exactly representable
and event ordering never depends on floating-point rounding.
"""

from __future__ import annotations

import enum
import heapq
import random
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

US_PER_S = 1_000_000


def to_us(seconds: float) -> int:
    """Convert seconds to the engine's integer microsecond grid."""
    return int(round(seconds * US_PER_S))


def to_s(us: int) -> float:
    return us / US_PER_S


class SimulationError(RuntimeError):
    """Fatal engine inconsistency; the run cannot continue."""


class EventKind(enum.Enum):
    FRAME_START_RX = "frame-start-rx"
    FRAME_END_RX = "frame-end-rx"
    TIMER_EXPIRY = "timer-expiry"
    CCA_CHECK = "cca-check"
    APP_PACKET_GENERATE = "app-packet-generate"
    SIM_END = "sim-end"


GLOBAL = -1


@dataclass(order=True)
class SimEvent:
    fire_us: int
    sequence: int
    target: int = field(compare=False)
    action: EventKind = field(compare=False)
    callback: Callable[..., Any] | None = field(compare=False, default=None, repr=False)
    args: tuple = field(compare=False, default=(), repr=False)
    cancelled: bool = field(compare=False, default=False)

    @property
    def fire_time(self) -> float:
        return to_s(self.fire_us)

    def cancel(self) -> None:
        # idempotent; the queue drops cancelled entries lazily
        self.cancelled = True


class Simulator:
    """Priority event queue with a monotone virtual clock.

    Events with equal fire time are dispatched in insertion order.
    """

    def __init__(self, record_events: bool = False):
        self._queue: list[SimEvent] = []
        self._seq = 0
        self.now_us = 0
        self.dispatched = 0
        self.event_log: list[tuple[int, int, int, str]] | None = [] if record_events else None

    @property
    def now(self) -> float:
        return to_s(self.now_us)

    def schedule_at(
        self,
        fire_us: int,
        callback: Callable[..., Any] | None,
        *args: Any,
        target: int = GLOBAL,
        action: EventKind = EventKind.TIMER_EXPIRY,
    ) -> SimEvent:
        if fire_us < self.now_us:
            raise SimulationError(
                f"event scheduled in the past: fire={fire_us}us now={self.now_us}us "
                f"target={target} action={action.value}"
            )
        ev = SimEvent(fire_us, self._seq, target, action, callback, args)
        self._seq += 1
        heapq.heappush(self._queue, ev)
        return ev

    def schedule(self, delay_us: int, callback, *args, target: int = GLOBAL,
                 action: EventKind = EventKind.TIMER_EXPIRY) -> SimEvent:
        return self.schedule_at(self.now_us + delay_us, callback, *args, target=target, action=action)

    def pending(self) -> int:
        return sum(1 for ev in self._queue if not ev.cancelled)

    def run_until(self, end_us: int) -> int:
        """Dispatch every live event with ``fire_us <= end_us``; the clock ends at ``end_us``."""
        if end_us < self.now_us:
            raise SimulationError(f"cannot run backwards to {end_us}us from {self.now_us}us")
        queue = self._queue
        count = 0
        while queue and queue[0].fire_us <= end_us:
            ev = heapq.heappop(queue)
            if ev.cancelled:
                continue
            if ev.fire_us < self.now_us:
                raise SimulationError("clock would move backwards")
            self.now_us = ev.fire_us
            if self.event_log is not None:
                self.event_log.append((ev.fire_us, ev.sequence, ev.target, ev.action.value))
            count += 1
            if ev.callback is not None:
                ev.callback(*ev.args)
        self.now_us = end_us
        self.dispatched += count
        return count


class Stream(enum.IntEnum):
    """Purposes for independent per-node random streams."""

    CHANNEL = 1
    BACKOFF = 2
    DHD = 3
    TRAFFIC = 4
    CID = 5
    ERROR = 6
    TOPOLOGY = 7


class RngStream:
    """Reproducible random stream keyed by ``(seed, stream_id)``.

    Seeds are expanded with numpy's ``SeedSequence`` so streams are
    statistically independent; draws come from a Mersenne Twister, whose
    output for a given seed is stable across platforms and Python versions.
    """

    __slots__ = ("seed", "stream_id", "_rand")

    def __init__(self, seed: int, stream_id: tuple[int, ...] | int = ()):
        if isinstance(stream_id, int):
            stream_id = (stream_id,)
        self.seed = int(seed)
        self.stream_id = tuple(int(s) & 0xFFFFFFFF for s in stream_id)
        state = np.random.SeedSequence(self.seed & (2**64 - 1), spawn_key=self.stream_id).generate_state(4)
        self._rand = random.Random(int.from_bytes(state.tobytes(), "little"))

    def normal(self, mu: float = 0.0, sigma: float = 1.0) -> float:
        return self._rand.gauss(mu, sigma)

    def uniform(self, a: float = 0.0, b: float = 1.0) -> float:
        return a + (b - a) * self._rand.random()

    def random(self) -> float:
        return self._rand.random()

    def randint(self, a: int, b: int) -> int:
        """Uniform integer in the closed range ``[a, b]``."""
        return self._rand.randint(a, b)

    def randrange(self, n: int) -> int:
        return self._rand.randrange(n)


def node_stream(seed: int, node_id: int, purpose: Stream) -> RngStream:
    return RngStream(seed, (node_id + 1, int(purpose)))
