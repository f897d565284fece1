"""Abstract quantum-Internet link layer.

Entangled pairs are generated at a Poisson rate into a bounded buffer and
consumed per quantum-assisted transmission.  Two success boosts are modelled:
combining channel uses super-additively (an exponent on the joint failure
probability) and superposing two path trajectories (a bounded two-path
combiner).  Both closed forms are the simplest families that dominate the
independent-combination baseline; they are isolated here so alternative laws
can be swapped in.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Optional

from .engine import US_PER_S, RandomStream
from .netmodel import TransmitOutcome, TransmitStatus


def superadditive_success(ps: Iterable[float], alpha: float) -> float:
    """Joint success of several channel uses with super-additive gain.

    Returns 1 - prod(1 - p_i)^alpha, clamped to [0, 1].  alpha = 1 is the
    plain independent combination; alpha > 1 models the joint uses carrying
    more than their individual capacities.
    """
    ps = list(ps)
    if not ps:
        raise ValueError("need at least one channel-use probability")
    if alpha < 1.0:
        raise ValueError("alpha must be >= 1")
    fail = 1.0
    for p in ps:
        if not 0.0 <= p <= 1.0:
            raise ValueError("probabilities must be in [0, 1]")
        fail *= (1.0 - p)
    return min(1.0, max(0.0, 1.0 - fail ** alpha))


def superposed_success(p1: float, p2: float, beta: float) -> float:
    """Success over a superposition of two path trajectories.

    max(p1, p2) + beta * min(p1, p2) * (1 - max(p1, p2)): never worse than the
    best single path, never better than two independent paths; beta in [0, 1]
    interpolates between those bounds.  Symmetric in (p1, p2).
    """
    for p in (p1, p2):
        if not 0.0 <= p <= 1.0:
            raise ValueError("probabilities must be in [0, 1]")
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must be in [0, 1]")
    hi, lo = (p1, p2) if p1 >= p2 else (p2, p1)
    return hi + beta * lo * (1.0 - hi)


@dataclass
class QuantumLink:
    """Entanglement plane between one concentrator area and the control center."""

    gen_rate: float = 10.0          # pairs per second
    buffer_cap: int = 1000
    pairs_per_msg: int = 2
    p_channel: float = 0.8
    alpha: float = 1.2
    beta: float = 0.5
    classical_overhead_rho: float = 0.25
    pair_buffer: int = 0
    last_regen_us: int = 0
    pairs_generated: int = 0
    pairs_consumed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_channel <= 1.0:
            raise ValueError("p_channel must be in [0, 1]")
        if self.alpha < 1.0:
            raise ValueError("alpha must be >= 1")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must be in [0, 1]")
        if not 0.0 < self.classical_overhead_rho <= 1.0:
            raise ValueError("classical_overhead_rho must be in (0, 1]")

    def effective_success(self) -> float:
        """Per-message success after both boosts."""
        q = superadditive_success([self.p_channel] * self.pairs_per_msg, self.alpha)
        return superposed_success(q, q, self.beta)

    def entanglement_step(self, dt_s: float, stream: RandomStream) -> int:
        """Generate Poisson(gen_rate * dt) pairs, truncated at the buffer cap."""
        if dt_s <= 0:
            raise ValueError("dt must be positive")
        raw = stream.poisson(self.gen_rate * dt_s) if self.gen_rate > 0 else 0
        added = min(raw, self.buffer_cap - self.pair_buffer)
        self.pair_buffer += added
        self.pairs_generated += added
        return added

    def regen_to(self, now_us: int, stream: RandomStream) -> None:
        """Lazily account generation since the last consumption instant."""
        dt = (now_us - self.last_regen_us) / US_PER_S
        if dt > 0:
            if self.pair_buffer < self.buffer_cap:
                self.entanglement_step(dt, stream)
            self.last_regen_us = now_us

    def try_consume(self, now_us: int, stream: RandomStream) -> bool:
        self.regen_to(now_us, stream)
        if self.pair_buffer >= self.pairs_per_msg:
            self.pair_buffer -= self.pairs_per_msg
            self.pairs_consumed += self.pairs_per_msg
            return True
        return False


@dataclass
class QuantumOutcome:
    quantum_ok: bool
    fallback: bool
    classical: Optional[TransmitOutcome]

    @property
    def delivered(self) -> bool:
        return self.classical is not None and self.classical.status is TransmitStatus.DELIVERED

    @property
    def deliver_at_us(self) -> int:
        return self.classical.deliver_at_us if self.classical else 0


def quantum_transmit(qlink: QuantumLink, size_bits: int, now_us: int,
                     success_u: float,
                     classical_send: Callable[[int], TransmitOutcome],
                     stream: RandomStream) -> QuantumOutcome:
    """Quantum-assisted transmission of one message.

    Consumes entangled pairs when available; on quantum success only the
    residual classical payload (size * rho) rides the classical path.  With an
    empty pair buffer the message falls back to a fully classical transmission
    of the original size.  `success_u` is the caller-supplied uniform draw
    deciding the boosted success, so outcomes stay keyed to stable stream ids.
    """
    if not qlink.try_consume(now_us, stream):
        return QuantumOutcome(False, True, classical_send(size_bits))
    if success_u < qlink.effective_success():
        residual = max(1, int(round(size_bits * qlink.classical_overhead_rho)))
        return QuantumOutcome(True, False, classical_send(residual))
    return QuantumOutcome(False, False, None)
