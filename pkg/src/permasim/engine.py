"""Deterministic discrete-event core: clock, event queue, seeded random streams.

Time is kept in integer microseconds so that event ordering and tie-breaking
are exact across platforms.  Every consumer of randomness gets its own stream
keyed by (master_seed, label), which keeps draw sequences independent of the
order in which other components draw.
"""

from __future__ import annotations

import hashlib
import heapq
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Optional

import numpy as np

US_PER_S = 1_000_000


def us(seconds: float) -> int:
    """Convert seconds to integer microseconds."""
    return int(round(seconds * US_PER_S))


def seconds(t_us: int) -> float:
    return t_us / US_PER_S


class SimulationError(Exception):
    """Programming fault inside a run; halts the run with a diagnostic."""


class EventKind(Enum):
    MEASUREMENT_ROUND = "measurement_round"
    LINK_TRANSITION = "link_transition"
    MESSAGE_DELIVERY = "message_delivery"
    CONSENSUS_TIMEOUT = "consensus_timeout"
    DTN_FLUSH = "dtn_flush"
    ENTANGLEMENT_TICK = "entanglement_tick"
    TRANSACTION_DEADLINE = "transaction_deadline"


@dataclass
class Event:
    at_us: int
    seq: int
    kind: EventKind
    fn: Callable[["Event"], None]
    data: Any = None
    cancelled: bool = False


class Simulator:
    """Sequential event loop.  Events at equal times fire in schedule order."""

    def __init__(self) -> None:
        self.now_us: int = 0
        self._heap: list[tuple[int, int, Event]] = []
        self._seq = 0
        self.processed = 0

    def schedule(self, at_us: int, kind: EventKind, fn: Callable[[Event], None],
                 data: Any = None) -> Event:
        if at_us < self.now_us:
            raise SimulationError(
                f"event {kind.value} scheduled at {at_us} us, before clock {self.now_us} us")
        ev = Event(at_us, self._seq, kind, fn, data)
        self._seq += 1
        heapq.heappush(self._heap, (at_us, ev.seq, ev))
        return ev

    def schedule_at_s(self, at_s: float, kind: EventKind, fn: Callable[[Event], None],
                      data: Any = None) -> Event:
        return self.schedule(us(at_s), kind, fn, data)

    def cancel(self, ev: Event) -> None:
        ev.cancelled = True

    def run(self, until_us: Optional[int] = None) -> None:
        """Process events in (time, seq) order; `until_us` is inclusive."""
        heap = self._heap
        while heap:
            at, _, ev = heap[0]
            if until_us is not None and at > until_us:
                break
            heapq.heappop(heap)
            if ev.cancelled:
                continue
            if at < self.now_us:
                raise SimulationError("clock went backwards")
            self.now_us = at
            self.processed += 1
            ev.fn(ev)


# ---------------------------------------------------------------------------
# Random streams
# ---------------------------------------------------------------------------

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix64(x: int) -> int:
    x &= _MASK64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _MASK64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _MASK64
    x ^= x >> 31
    return x


def label_key(label: str) -> int:
    """Stable 64-bit key for a stream label."""
    return int.from_bytes(hashlib.blake2b(label.encode(), digest_size=8).digest(), "little")


def keyed_u64(master_seed: int, *parts: int) -> int:
    """Stateless counter-style draw: same key tuple, same value, always."""
    h = _mix64((master_seed & _MASK64) ^ _GOLDEN)
    for p in parts:
        h = _mix64(h ^ ((int(p) + _GOLDEN) & _MASK64))
    return h


def keyed_uniform(master_seed: int, *parts: int) -> float:
    return keyed_u64(master_seed, *parts) / 18446744073709551616.0


def keyed_u64_array(master_seed: int, fixed: tuple[int, ...], idx: np.ndarray) -> np.ndarray:
    """Vectorised keyed_u64 over one varying index array (uint64)."""
    h = _mix64((master_seed & _MASK64) ^ _GOLDEN)
    for p in fixed:
        h = _mix64(h ^ ((p + _GOLDEN) & _MASK64))
    golden = np.uint64(_GOLDEN)
    x = np.uint64(h) ^ (idx.astype(np.uint64) + golden)
    # uint64 array arithmetic wraps silently; only scalar ops would warn
    x ^= x >> np.uint64(30)
    x *= np.uint64(0xBF58476D1CE4E5B9)
    x ^= x >> np.uint64(27)
    x *= np.uint64(0x94D049BB133111EB)
    x ^= x >> np.uint64(31)
    return x


def keyed_uniform_array(master_seed: int, fixed: tuple[int, ...], idx: np.ndarray) -> np.ndarray:
    return keyed_u64_array(master_seed, fixed, idx) / 18446744073709551616.0


class RandomStream:
    """Named deterministic stream: (master_seed, stream_id) -> same sequence."""

    def __init__(self, master_seed: int, stream_id: str) -> None:
        self.master_seed = master_seed
        self.stream_id = stream_id
        ss = np.random.SeedSequence(entropy=master_seed & _MASK64,
                                    spawn_key=(label_key(stream_id),))
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def uniform(self) -> float:
        return float(self._gen.random())

    def exponential(self, mean: float) -> float:
        return float(self._gen.exponential(mean))

    def poisson(self, lam: float) -> int:
        return int(self._gen.poisson(lam))

    def integers(self, low: int, high: int) -> int:
        return int(self._gen.integers(low, high))

    def shuffle(self, items: list) -> None:
        self._gen.shuffle(items)


@dataclass
class RunStats:
    """Per-run result container: transaction resolutions plus traffic counters."""

    seed: int = 0
    resolutions: list = field(default_factory=list)
    counters: dict = field(default_factory=dict)

    def bump(self, key: str, n: int = 1) -> None:
        self.counters[key] = self.counters.get(key, 0) + n
