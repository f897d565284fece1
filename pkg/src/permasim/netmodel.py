"""Classical communication models.

Each concentrator area owns one shared LoRa FIFO channel and one NVIS uplink
towards the control center.  The NVIS uplink alternates Up/Down following an
availability process; messages offered while the link is Down go to a
delay-tolerant buffer and are re-offered when the link recovers.

Transmission losses are modelled per (link, time window): one fade draw per
window decides the fate of every message transmitted in it, with a loss
probability that scales with message size.  A window that kills an 800-bit
report can still pass a 200-bit residual, and all redundant copies crossing
the same link in the same window share fate.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Any, Optional

from .engine import US_PER_S, RandomStream, keyed_uniform, label_key, us

FADE_KEY = label_key("link-fade")


def airtime(size_bits: int, capacity_bps: float) -> float:
    """Serialization time in seconds."""
    if capacity_bps <= 0:
        raise ValueError("capacity must be positive")
    return size_bits / capacity_bps


def loss_probability(base_loss: float, size_bits: int, ref_bits: int = 800) -> float:
    """Per-window loss probability for a message, scaled by size.

    `base_loss` is the loss probability of a reference-size (`ref_bits`)
    message; smaller frames survive proportionally more fade windows.
    """
    if base_loss <= 0.0:
        return 0.0
    if base_loss >= 1.0:
        return 1.0
    return 1.0 - (1.0 - base_loss) ** (size_bits / ref_bits)


class MessageKind(Enum):
    DATA_REPORT = "data_report"
    PRE_PREPARE = "pre_prepare"
    PREPARE = "prepare"
    COMMIT = "commit"
    REP_FEEDBACK = "rep_feedback"
    FQC_COORDINATION = "fqc_coordination"
    ACK = "ack"


@dataclass
class Message:
    src: int
    dst: int
    kind: MessageKind
    size_bits: int
    tx_id: tuple = ()

    def __post_init__(self) -> None:
        if self.size_bits <= 0:
            raise ValueError("message size must be positive")


@dataclass
class LinkParams:
    capacity_bps: float
    buffer_slots: int = 128
    base_loss: float = 0.0
    ref_bits: int = 800

    def __post_init__(self) -> None:
        if self.capacity_bps <= 0:
            raise ValueError("capacity must be positive")
        if self.buffer_slots < 1:
            raise ValueError("buffer_slots must be >= 1")
        if not 0.0 <= self.base_loss <= 1.0:
            raise ValueError("base_loss must be in [0, 1]")


class Phase(Enum):
    UP = "up"
    DOWN = "down"


def nvis_next_transition(phase: Phase, availability: float, mean_down_s: float,
                         stream: RandomStream) -> float:
    """Duration of the current phase before the next transition, in seconds.

    Down durations are exponential with mean `mean_down_s`; Up durations are
    exponential with mean `mean_down_s * A / (1 - A)`, which makes the long-run
    Up fraction converge to A.  A == 1.0 never leaves Up.
    """
    if phase is Phase.DOWN:
        return stream.exponential(mean_down_s)
    if availability >= 1.0:
        return math.inf
    mean_up = mean_down_s * availability / (1.0 - availability)
    return stream.exponential(mean_up)


class AvailabilityProcess:
    """Alternating Up/Down timeline for one NVIS uplink, starting Up at t=0."""

    def __init__(self, availability: float, mean_down_s: float, stream: RandomStream) -> None:
        if not 0.0 < availability <= 1.0:
            raise ValueError("availability must be in (0, 1]")
        self.availability = availability
        self.mean_down_s = mean_down_s
        self._stream = stream
        # _times[i] is the time (us) of the i-th transition; even index -> goes Down.
        self._times: list[int] = []
        self._horizon_us = 0

    def extend_to(self, t_us: int) -> None:
        while self._horizon_us <= t_us:
            if self.availability >= 1.0:
                self._horizon_us = 1 << 62
                return
            phase = Phase.UP if len(self._times) % 2 == 0 else Phase.DOWN
            dur = nvis_next_transition(phase, self.availability, self.mean_down_s, self._stream)
            self._horizon_us += us(dur)
            self._times.append(self._horizon_us)

    def is_up(self, t_us: int) -> bool:
        self.extend_to(t_us)
        return bisect_right(self._times, t_us) % 2 == 0

    def next_up_at(self, t_us: int) -> int:
        """First instant >= t_us at which the link is Up."""
        self.extend_to(t_us)
        idx = bisect_right(self._times, t_us)
        if idx % 2 == 0:
            return t_us
        return self._times[idx]

    def up_through(self, t0_us: int, t1_us: int) -> bool:
        """True when the link stays Up for the whole [t0, t1] span."""
        self.extend_to(t1_us)
        idx = bisect_right(self._times, t0_us)
        if idx % 2 != 0:
            return False
        return idx >= len(self._times) or self._times[idx] > t1_us

    def transitions_until(self, t_us: int) -> list[tuple[int, Phase]]:
        """(time, new-phase) pairs up to t_us, for event scheduling."""
        self.extend_to(t_us)
        out = []
        for i, t in enumerate(self._times):
            if t > t_us:
                break
            out.append((t, Phase.DOWN if i % 2 == 0 else Phase.UP))
        return out


class DtnBuffer:
    """FIFO store-and-forward buffer; bundles older than ttl are never delivered."""

    def __init__(self, ttl_s: float) -> None:
        self.ttl_us = us(ttl_s)
        self.bundles: deque[tuple[Any, int, int]] = deque()  # (payload, size_bits, enqueue_us)
        self.expired = 0

    def push(self, payload: Any, size_bits: int, enqueue_us: int) -> None:
        self.bundles.append((payload, size_bits, enqueue_us))

    def __len__(self) -> int:
        return len(self.bundles)


class TransmitStatus(Enum):
    DELIVERED = "delivered"
    DROPPED_CONGESTION = "dropped_congestion"
    DROPPED_LOSS = "dropped_loss"
    BUFFERED_DTN = "buffered_dtn"


@dataclass
class TransmitOutcome:
    status: TransmitStatus
    deliver_at_us: int = 0


class FifoLink:
    """Shared drop-tail FIFO channel with per-window fade losses.

    The queue is tracked analytically: `_finish` holds the departure times of
    queued messages, so occupancy at any instant is exact without per-message
    timer events.
    """

    def __init__(self, link_id: int, params: LinkParams, master_seed: int,
                 window_us: int = 3_600 * US_PER_S,
                 availability: Optional[AvailabilityProcess] = None,
                 dtn: Optional[DtnBuffer] = None) -> None:
        self.link_id = link_id
        self.params = params
        self.master_seed = master_seed
        self.window_us = window_us
        self.availability = availability
        self.dtn = dtn
        self._finish: deque[int] = deque()
        self._next_free = 0
        self.delivered = 0
        self.dropped_congestion = 0
        self.dropped_loss = 0
        self.offered = 0

    def queue_len(self, now_us: int) -> int:
        q = self._finish
        while q and q[0] <= now_us:
            q.popleft()
        return len(q)

    def fade_u(self, window: int) -> float:
        return keyed_uniform(self.master_seed, FADE_KEY, self.link_id, window)

    def offer(self, payload: Any, size_bits: int, now_us: int) -> TransmitOutcome:
        """Offer one message; returns its fate.  Drops are outcomes, not errors.

        `offered` counts entries to the transmission path: a bundle parked in
        the DTN buffer is counted when the flush re-offers it, so that
        offered == delivered + dropped_congestion + dropped_loss holds."""
        start = now_us if self._next_free <= now_us else self._next_free
        if self.availability is not None and not self.availability.is_up(start):
            if self.dtn is not None:
                self.dtn.push(payload, size_bits, now_us)
                return TransmitOutcome(TransmitStatus.BUFFERED_DTN)
            self.offered += 1
            self.dropped_loss += 1
            return TransmitOutcome(TransmitStatus.DROPPED_LOSS)
        self.offered += 1
        if self.queue_len(now_us) >= self.params.buffer_slots:
            self.dropped_congestion += 1
            return TransmitOutcome(TransmitStatus.DROPPED_CONGESTION)
        fin = start + max(1, us(airtime(size_bits, self.params.capacity_bps)))
        self._finish.append(fin)
        self._next_free = fin
        p_loss = loss_probability(self.params.base_loss, size_bits, self.params.ref_bits)
        if p_loss > 0.0 and self.fade_u(start // self.window_us) < p_loss:
            self.dropped_loss += 1
            return TransmitOutcome(TransmitStatus.DROPPED_LOSS)
        self.delivered += 1
        return TransmitOutcome(TransmitStatus.DELIVERED, fin)

    def admit_burst(self, count: int, size_bits: int, now_us: int) -> tuple[int, int, int]:
        """Admit a batch of same-size messages offered at one instant.

        Drop-tail: only the queue headroom at `now_us` is admitted; the rest is
        counted as congestion drops.  Returns (admitted, start_us, airtime_us).
        Fade fate is decided separately by the caller for the whole window.
        """
        self.offered += count
        start = now_us if self._next_free <= now_us else self._next_free
        free = self.params.buffer_slots - self.queue_len(now_us)
        admitted = min(count, max(0, free))
        dropped = count - admitted
        self.dropped_congestion += dropped
        air = max(1, us(airtime(size_bits, self.params.capacity_bps)))
        if admitted:
            fin = start + air * admitted
            self._finish.extend(range(start + air, fin + 1, air))
            self._next_free = fin
        return admitted, start, air

    def paced_burst(self, count: int, size_bits: int, now_us: int) -> tuple[int, int]:
        """Admit a batch whose sender paces itself to the medium (each message
        is offered as the queue frees), so drop-tail never triggers.  Returns
        (start_us, airtime_us); fade fate is settled by the caller."""
        self.offered += count
        start = now_us if self._next_free <= now_us else self._next_free
        air = max(1, us(airtime(size_bits, self.params.capacity_bps)))
        if count:
            fin = start + air * count
            self._finish.extend(range(start + air, fin + 1, air))
            self._next_free = fin
        return start, air

    def count_burst_fate(self, admitted: int, size_bits: int, window: int) -> bool:
        """Settle the fade fate of an admitted burst; True when it survives."""
        p_loss = loss_probability(self.params.base_loss, size_bits, self.params.ref_bits)
        if p_loss > 0.0 and self.fade_u(window) < p_loss:
            self.dropped_loss += admitted
            return False
        self.delivered += admitted
        return True


def link_transmit(link: FifoLink, msg: Message, now_us: int) -> TransmitOutcome:
    return link.offer(msg, msg.size_bits, now_us)


def dtn_flush(link: FifoLink, now_us: int) -> list[tuple[Any, TransmitOutcome]]:
    """Drain the link's DTN buffer FIFO through the link; expired bundles are
    discarded and counted.  Stops early if the link goes Down again."""
    buf = link.dtn
    results: list[tuple[Any, TransmitOutcome]] = []
    if buf is None:
        return results
    while buf.bundles:
        payload, size_bits, enq = buf.bundles[0]
        if now_us - enq > buf.ttl_us:
            buf.bundles.popleft()
            buf.expired += 1
            continue
        out = link.offer(payload, size_bits, now_us)
        if out.status is TransmitStatus.BUFFERED_DTN:
            # link went Down again before this bundle could start; the offer
            # re-queued it at the tail, so restore FIFO order and stop.
            buf.bundles.popleft()
            requeued = buf.bundles.pop()
            buf.bundles.appendleft((requeued[0], requeued[1], enq))
            break
        buf.bundles.popleft()
        results.append((payload, out))
    return results
