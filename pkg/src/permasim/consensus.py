"""Cluster-level agreement.

Two mechanisms share the same value semantics (modal proposal, f-bounded
byzantine tolerance) and differ in transport: the classical three-phase voting
protocol floods the shared access medium with a quadratic number of messages,
while the fast quantum variant coordinates over the entanglement plane with a
linear message count and a single expected round.

`pbft_instance`/`fqc_instance` run one cluster at message granularity.  The
`*_round` executors run every cluster of a concentrator area for one
measurement round with identical rules but batched queue arithmetic; a
measurement period at high redundancy offers thousands of messages and the
per-message path would dominate the simulation budget.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np

from .engine import US_PER_S, RandomStream, keyed_uniform_array, label_key, us
from .netmodel import FifoLink, TransmitStatus, loss_probability
from .quantum import QuantumLink

QTX_KEY = label_key("fqc-quantum-tx")

CONSENSUS_MSG_BITS = 512
FQC_LINEAR_COEFF = 4


def byzantine_tolerance(n: int) -> int:
    """Tolerated byzantine members of an n-strong group: floor((n-1)/3)."""
    if n < 1:
        raise ValueError("group size must be >= 1")
    return (n - 1) // 3


def pbft_message_count(n: int) -> int:
    """Messages offered by one classical instance: pre-prepare multicast,
    prepare multicasts, commit multicasts: (n-1) + (n-1)^2 + n(n-1)."""
    if n < 1:
        raise ValueError("group size must be >= 1")
    return (n - 1) + (n - 1) ** 2 + n * (n - 1)


def fqc_message_count(n: int, c: int = FQC_LINEAR_COEFF) -> int:
    """Messages offered by one fast-quantum instance: c * n."""
    if n < 1:
        raise ValueError("group size must be >= 1")
    return c * n


def majority_value(proposals: Sequence[tuple[int, float]]):
    """Modal proposed value; ties break to the lowest proposing sensor id."""
    if not proposals:
        raise ValueError("proposals must not be empty")
    groups: dict[float, tuple[int, int]] = {}
    for sensor, value in proposals:
        cnt, lowest = groups.get(value, (0, sensor))
        groups[value] = (cnt + 1, min(lowest, sensor))
    best_value = None
    best = (-1, 0)
    for value, (cnt, lowest) in groups.items():
        key = (cnt, -lowest)
        if key > best:
            best = key
            best_value = value
    return best_value


@dataclass
class ConsensusParams:
    n: int
    timeout_s: float = 600.0
    max_retries: int = 2

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("group size must be >= 1")
        self.f = byzantine_tolerance(self.n)


class FailReason(Enum):
    TIMEOUT = "timeout"
    INSUFFICIENT_QUORUM = "insufficient_quorum"


@dataclass
class ConsensusOutcome:
    decided: bool
    value: Optional[float]
    reason: Optional[FailReason]
    msg_count: int
    latency_s: float
    decided_at_us: int = 0


def _split_byzantine(proposals: Sequence[tuple[int, float]]):
    modal = majority_value(proposals)
    byz = sum(1 for _, v in proposals if v != modal)
    return modal, byz


# ---------------------------------------------------------------------------
# Message-level instances
# ---------------------------------------------------------------------------

def pbft_instance(proposals: Sequence[tuple[int, float]], params: ConsensusParams,
                  medium: FifoLink, now_us: int,
                  msg_bits: int = CONSENSUS_MSG_BITS) -> ConsensusOutcome:
    """One classical instance at message granularity.

    The lowest-id member acts as primary.  Every phase multicast is offered to
    the medium (the load the count formula promises); validity gating follows
    delivery: a prepare only counts if its sender held the pre-prepare, a
    commit only counts from a prepared sender.  Transport failures retry with
    a fresh timeout; a byzantine overrun cannot be retried away.
    """
    n = len(proposals)
    if n != params.n:
        raise ValueError("proposal count must equal group size")
    modal, byz = _split_byzantine(proposals)
    if n == 1:
        return ConsensusOutcome(True, proposals[0][1], None, 0, 0.0, now_us)
    timeout_us = us(params.timeout_s)
    msg_count = 0
    order = sorted(range(n), key=lambda i: proposals[i][0])
    f = params.f

    if byz > f:
        # votes are exchanged before the group can observe the overrun
        for _ in range(pbft_message_count(n)):
            medium.offer(None, msg_bits, now_us)
        return ConsensusOutcome(False, None, FailReason.INSUFFICIENT_QUORUM,
                                pbft_message_count(n), params.timeout_s)

    attempt_start = now_us
    for _attempt in range(params.max_retries + 1):
        t = attempt_start
        pp_ok = [True] + [False] * (n - 1)
        last_fin = t
        for i in range(1, n):
            out = medium.offer(None, msg_bits, t)
            msg_count += 1
            if out.status is TransmitStatus.DELIVERED:
                pp_ok[i] = True
                last_fin = max(last_fin, out.deliver_at_us)
        t = max(t, last_fin)
        pr_ok = [[False] * n for _ in range(n)]
        for i in range(1, n):
            for j in range(n):
                if j == i:
                    continue
                out = medium.offer(None, msg_bits, t)
                msg_count += 1
                if out.status is TransmitStatus.DELIVERED:
                    pr_ok[i][j] = True
                    last_fin = max(last_fin, out.deliver_at_us)
        t = max(t, last_fin)
        prepared = [False] * n
        for j in range(n):
            received = sum(1 for i in range(1, n) if i != j and pp_ok[i] and pr_ok[i][j])
            prepared[j] = (j == 0 and pp_ok[0]) or (pp_ok[j] and received >= 2 * f)
        cm_ok = [[False] * n for _ in range(n)]
        for j in range(n):
            for k in range(n):
                if k == j:
                    continue
                out = medium.offer(None, msg_bits, t)
                msg_count += 1
                if out.status is TransmitStatus.DELIVERED:
                    cm_ok[j][k] = True
                    last_fin = max(last_fin, out.deliver_at_us)
        committed = 0
        for k in range(n):
            if not prepared[k]:
                continue
            received = sum(1 for j in range(n) if j != k and prepared[j] and cm_ok[j][k])
            if received + 1 >= 2 * f + 1:
                committed += 1
        completion = last_fin
        if committed >= 2 * f + 1 and completion - attempt_start <= timeout_us:
            return ConsensusOutcome(True, modal, None, msg_count,
                                    (completion - now_us) / US_PER_S, completion)
        attempt_start += timeout_us
    return ConsensusOutcome(False, None, FailReason.TIMEOUT, msg_count,
                            (attempt_start - now_us) / US_PER_S)


def fqc_instance(proposals: Sequence[tuple[int, float]], params: ConsensusParams,
                 qlink: QuantumLink, medium: FifoLink, now_us: int,
                 stream: RandomStream,
                 success_u: Optional[Callable[[int], float]] = None,
                 msg_bits: int = CONSENSUS_MSG_BITS,
                 c: int = FQC_LINEAR_COEFF) -> ConsensusOutcome:
    """One fast-quantum instance: c coordination messages per member, carried
    over the entanglement plane with a classical residual.  Decides in a single
    round when at least 2f+1 members' coordination survives; retries once.
    Pair starvation falls back to fully classical carriage (still linear)."""
    n = len(proposals)
    if n != params.n:
        raise ValueError("proposal count must equal group size")
    modal, byz = _split_byzantine(proposals)
    f = params.f
    msg_count = 0
    p_eff = qlink.effective_success()
    draw = success_u if success_u is not None else (lambda _i: stream.uniform())
    residual = max(1, int(round(msg_bits * qlink.classical_overhead_rho)))

    if byz > f:
        for i in range(fqc_message_count(n, c)):
            if qlink.try_consume(now_us, stream):
                draw(i)
                medium.offer(None, residual, now_us)
            else:
                medium.offer(None, msg_bits, now_us)
        return ConsensusOutcome(False, None, FailReason.INSUFFICIENT_QUORUM,
                                fqc_message_count(n, c), 0.0)

    attempt_start = now_us
    idx = 0
    for _attempt in range(2):
        ok_members = 0
        last_fin = attempt_start
        for _member in range(n):
            member_ok = True
            for _m in range(c):
                msg_count += 1
                if qlink.try_consume(attempt_start, stream):
                    q_ok = draw(idx) < p_eff
                    idx += 1
                    out = medium.offer(None, residual, attempt_start)
                else:
                    q_ok = True  # plain classical carriage, no quantum stage
                    out = medium.offer(None, msg_bits, attempt_start)
                delivered = out.status is TransmitStatus.DELIVERED
                if delivered:
                    last_fin = max(last_fin, out.deliver_at_us)
                if not (q_ok and delivered):
                    member_ok = False
            if member_ok:
                ok_members += 1
        if n == 1 or ok_members >= 2 * f + 1:
            return ConsensusOutcome(True, modal, None, msg_count,
                                    (last_fin - now_us) / US_PER_S, last_fin)
        attempt_start = last_fin
    return ConsensusOutcome(False, None, FailReason.TIMEOUT, msg_count,
                            (attempt_start - now_us) / US_PER_S)


# ---------------------------------------------------------------------------
# Batched per-round executors
# ---------------------------------------------------------------------------

@dataclass
class RoundInstance:
    key: int                       # spot identifier
    proposals: Optional[list]      # [(sensor_id, value)] sorted by sensor id
    params: ConsensusParams
    modal: Optional[float] = None  # precomputed modal value / mismatch count;
    byz: Optional[int] = None      # computed from proposals when absent

    def split(self):
        if self.byz is None:
            return _split_byzantine(self.proposals)
        return self.modal, self.byz


def pbft_round(instances: list[RoundInstance], medium: FifoLink, now_us: int,
               msg_bits: int = CONSENSUS_MSG_BITS) -> dict[int, ConsensusOutcome]:
    """All classical instances of one concentrator area for one round.

    Instances share the access medium; phases run in lockstep (every
    instance's phase-k burst is offered when phase k-1 has drained), which is
    how simultaneous cluster instances interleave on one FIFO channel.  An
    instance survives transport when its bursts are fully admitted, the fade
    window passes, and its commit block drains inside the timeout.
    """
    results: dict[int, ConsensusOutcome] = {}
    pending: list[RoundInstance] = []
    for inst in instances:
        modal, byz = inst.split()
        n = inst.params.n
        if n == 1:
            results[inst.key] = ConsensusOutcome(True, modal, None, 0, 0.0, now_us)
        elif byz > inst.params.f:
            total = pbft_message_count(n)
            medium.admit_burst(total, msg_bits, now_us)
            results[inst.key] = ConsensusOutcome(
                False, None, FailReason.INSUFFICIENT_QUORUM, total, inst.params.timeout_s)
        else:
            pending.append(inst)
    if not pending:
        return results

    timeout_us = us(pending[0].params.timeout_s)
    max_retries = pending[0].params.max_retries
    msg_counts = {inst.key: 0 for inst in pending}
    attempt_start = now_us
    for _attempt in range(max_retries + 1):
        if not pending:
            break
        fully_admitted = {inst.key: True for inst in pending}
        completion = {}
        window = attempt_start // medium.window_us
        phase_at = attempt_start
        admitted_total = 0
        for phase in range(3):
            counts = []
            for inst in pending:
                n = inst.params.n
                counts.append((n - 1) if phase == 0 else
                              (n - 1) ** 2 if phase == 1 else n * (n - 1))
            total = sum(counts)
            admitted, start, air = medium.admit_burst(total, msg_bits, phase_at)
            admitted_total += admitted
            pos = 0
            for inst, cnt in zip(pending, counts):
                msg_counts[inst.key] += cnt
                if pos + cnt > admitted:
                    fully_admitted[inst.key] = False
                pos += cnt
                if phase == 2:
                    completion[inst.key] = start + air * min(pos, admitted)
            phase_at = start + air * admitted
        survived_fade = medium.count_burst_fate(admitted_total, msg_bits, window)
        still_pending = []
        # the instances share the medium in lockstep, so the round either
        # drains its commit phase inside the timeout or every cluster's
        # replicas are still waiting when it expires
        in_time = phase_at - attempt_start <= timeout_us
        for inst in pending:
            ok = (survived_fade and in_time and fully_admitted[inst.key])
            if ok:
                modal, _ = inst.split()
                results[inst.key] = ConsensusOutcome(
                    True, modal, None, msg_counts[inst.key],
                    (completion[inst.key] - now_us) / US_PER_S, completion[inst.key])
            else:
                still_pending.append(inst)
        pending = still_pending
        attempt_start += timeout_us
    for inst in pending:
        results[inst.key] = ConsensusOutcome(
            False, None, FailReason.TIMEOUT, msg_counts[inst.key],
            (attempt_start - now_us) / US_PER_S)
    return results


def fqc_round(instances: list[RoundInstance], qlink: QuantumLink, medium: FifoLink,
              now_us: int, master_seed: int, round_idx: int,
              stream: RandomStream, msg_bits: int = CONSENSUS_MSG_BITS,
              c: int = FQC_LINEAR_COEFF) -> dict[int, ConsensusOutcome]:
    """All fast-quantum instances of one concentrator area for one round.

    Coordination is a single exchange per instance, so the whole round is one
    batch: pairs are consumed in instance order, residuals ride the access
    medium in one burst, and quantum success draws are keyed by (link, round,
    message index) so outcomes do not depend on draw order elsewhere.  An
    instance decides when at least 2f+1 of its members had every coordination
    message carried; failed instances retry once as a second batch.
    """
    results: dict[int, ConsensusOutcome] = {}
    p_eff = qlink.effective_success()
    residual = max(1, int(round(msg_bits * qlink.classical_overhead_rho)))
    p_res = loss_probability(medium.params.base_loss, residual, medium.params.ref_bits)
    p_full = loss_probability(medium.params.base_loss, msg_bits, medium.params.ref_bits)
    msg_idx = 0
    msg_counts: dict[int, int] = {}

    group: list[tuple[RoundInstance, bool]] = []  # (instance, counts toward quorum)
    for inst in instances:
        modal, byz = inst.split()
        n = inst.params.n
        total = fqc_message_count(n, c)
        msg_counts[inst.key] = total
        if n == 1:
            # single-member group decides locally; its coordination traffic is
            # announcement-only and cannot block the decision
            results[inst.key] = ConsensusOutcome(True, modal, None, total, 0.0, now_us)
            group.append((inst, False))
        elif byz > inst.params.f:
            results[inst.key] = ConsensusOutcome(
                False, None, FailReason.INSUFFICIENT_QUORUM, total, 0.0)
            group.append((inst, False))
        else:
            group.append((inst, True))

    attempt_at = now_us
    for attempt in (0, 1):
        if not group:
            break
        totals = [fqc_message_count(inst.params.n, c) for inst, _ in group]
        grand = sum(totals)
        if attempt == 1:
            for inst, _ in group:
                msg_counts[inst.key] += fqc_message_count(inst.params.n, c)
        qlink.regen_to(attempt_at, stream)
        quantum_n = min(grand, qlink.pair_buffer // qlink.pairs_per_msg)
        qlink.pair_buffer -= quantum_n * qlink.pairs_per_msg
        qlink.pairs_consumed += quantum_n * qlink.pairs_per_msg
        classical_n = grand - quantum_n
        end_q = end_c = start_q = start_c = attempt_at
        air_q = air_c = 0
        if quantum_n:
            start_q, air_q = medium.paced_burst(quantum_n, residual, attempt_at)
            end_q = start_q + air_q * quantum_n
        if classical_n:
            start_c, air_c = medium.paced_burst(classical_n, msg_bits, attempt_at)
            end_c = start_c + air_c * classical_n
        window = attempt_at // medium.window_us
        u = medium.fade_u(window)
        res_ok = u >= p_res
        full_ok = u >= p_full
        if quantum_n:
            if res_ok:
                medium.delivered += quantum_n
            else:
                medium.dropped_loss += quantum_n
        if classical_n:
            if full_ok:
                medium.delivered += classical_n
            else:
                medium.dropped_loss += classical_n
        ok_vec = np.empty(grand, dtype=bool)
        if quantum_n:
            draws = keyed_uniform_array(master_seed, (QTX_KEY, medium.link_id, round_idx),
                                        np.arange(msg_idx, msg_idx + quantum_n))
            msg_idx += quantum_n
            ok_vec[:quantum_n] = (draws < p_eff) & res_ok
        if classical_n:
            ok_vec[quantum_n:] = full_ok
        member_ok = ok_vec.reshape(-1, c).all(axis=1)
        member_starts = np.cumsum([0] + [inst.params.n for inst, _ in group][:-1])
        ok_counts = np.add.reduceat(member_ok, member_starts) if len(group) else []
        batch_end = max(end_q, end_c)
        # per-instance completion: its last coordination message's drain time
        offs = np.cumsum([0] + totals)
        retry = []
        timeout_us = us(group[0][0].params.timeout_s)
        for i, (inst, live) in enumerate(group):
            if not live:
                continue
            lo, hi = int(offs[i]), int(offs[i + 1])
            fin = attempt_at
            if lo < quantum_n:
                fin = max(fin, start_q + air_q * min(hi, quantum_n))
            if hi > quantum_n:
                fin = max(fin, start_c + air_c * (hi - quantum_n))
            in_time = fin - attempt_at <= timeout_us
            if in_time and int(ok_counts[i]) >= 2 * inst.params.f + 1:
                modal, _ = inst.split()
                results[inst.key] = ConsensusOutcome(
                    True, modal, None, msg_counts[inst.key],
                    (fin - now_us) / US_PER_S, fin)
            else:
                retry.append((inst, True))
        group = retry
        attempt_at = max(batch_end, attempt_at)
    for inst, _ in group:
        results[inst.key] = ConsensusOutcome(
            False, None, FailReason.TIMEOUT, msg_counts[inst.key],
            (attempt_at - now_us) / US_PER_S)
    return results

