"""Scenario actors and mode orchestration.

Five concentrator areas serve the measuring spots round-robin.  Each
measurement round, every spot runs one transaction: its redundant sensors
measure, the configured (social, consensus) mode decides what crosses the
LoRa area channel and the NVIS backhaul, and the control center accepts the
first value that arrives.  A transaction succeeds when the accepted value is
correct and arrived before the deadline.

All stochastic draws are keyed by (purpose, entity, round) rather than by
draw order, so two runs of different modes on the same master seed share
sensor faults, fade windows and availability timelines.  Mode comparisons in
the result grids are therefore paired, not independent.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .engine import (US_PER_S, EventKind, RandomStream, RunStats, Simulator,
                     keyed_uniform, keyed_uniform_array, label_key, us)
from .netmodel import (AvailabilityProcess, DtnBuffer, FifoLink, LinkParams,
                       TransmitStatus, dtn_flush, loss_probability)
from .quantum import QuantumLink
from .consensus import ConsensusParams, RoundInstance, fqc_round, pbft_round

FAULT_KEY = label_key("sensor-fault")
OFFSET_KEY = label_key("fault-offset")
SHUFFLE_KEY = label_key("round-shuffle")
DEGRADED_KEY = label_key("degraded-assign")
AVAIL_KEY = label_key("nvis-availability-draw")
QREPORT_KEY = label_key("qsocial-report-tx")
QFEEDBACK_KEY = label_key("qsocial-feedback-tx")

N_CONCENTRATORS = 5


class Layer(Enum):
    NONE = "none"
    CLASSICAL = "classical"
    QUANTUM = "quantum"


@dataclass(frozen=True)
class Mode:
    social: Layer
    consensus: Layer

    @property
    def label(self) -> str:
        social = {Layer.NONE: "", Layer.CLASSICAL: "social",
                  Layer.QUANTUM: "quantum-social"}[self.social]
        cons = {Layer.NONE: "", Layer.CLASSICAL: "consensus",
                Layer.QUANTUM: "quantum-consensus"}[self.consensus]
        if not social and not cons:
            return "standard"
        if social and cons:
            return f"{social}+{cons}"
        return social or cons


NINE_MODES = [
    Mode(Layer.NONE, Layer.NONE),
    Mode(Layer.CLASSICAL, Layer.NONE),
    Mode(Layer.NONE, Layer.CLASSICAL),
    Mode(Layer.CLASSICAL, Layer.CLASSICAL),
    Mode(Layer.NONE, Layer.QUANTUM),
    Mode(Layer.CLASSICAL, Layer.QUANTUM),
    Mode(Layer.QUANTUM, Layer.NONE),
    Mode(Layer.QUANTUM, Layer.CLASSICAL),
    Mode(Layer.QUANTUM, Layer.QUANTUM),
]

MODE_LABELS = [m.label for m in NINE_MODES]


def parse_mode(label: str) -> Mode:
    for m in NINE_MODES:
        if m.label == label:
            return m
    raise ValueError(f"unknown mode label: {label!r} (expected one of {MODE_LABELS})")


class Outcome(Enum):
    SUCCESS = "success"
    FAIL_WRONG_VALUE = "fail_wrong_value"
    FAIL_DEADLINE = "fail_deadline"
    FAIL_NO_DELIVERY = "fail_no_delivery"


@dataclass
class SensorReading:
    spot: int
    sensor: int
    round_idx: int
    value: float
    faulty: bool   # simulation-side bookkeeping, invisible to protocol logic


@dataclass
class TransactionResolution:
    spot: int
    round_idx: int
    outcome: Outcome
    decided_at_us: int = 0


class Topology:
    """Spots assigned round-robin to the five concentrators; sensor global ids
    are spot * redundancy + k, so a spot's sensors are contiguous."""

    def __init__(self, spots: int, redundancy: int,
                 concentrators: int = N_CONCENTRATORS) -> None:
        if spots < 1 or redundancy < 1:
            raise ValueError("spots and redundancy must be >= 1")
        self.spots = spots
        self.redundancy = redundancy
        self.concentrators = concentrators
        self.spots_of_conc: list[list[int]] = [[] for _ in range(concentrators)]
        for s in range(spots):
            self.spots_of_conc[s % concentrators].append(s)

    @property
    def sensor_count(self) -> int:
        return self.spots * self.redundancy

    def sensors_of_spot(self, spot: int) -> list[int]:
        base = spot * self.redundancy
        return list(range(base, base + self.redundancy))

    def conc_of_spot(self, spot: int) -> int:
        return spot % self.concentrators


def ground_truth(spot: int, round_idx: int) -> float:
    """Per-spot constant plus slow drift; only correctness classification
    matters, not the physics."""
    return 100.0 + 7.25 * spot + 1e-4 * round_idx


def fault_offset(u: float, tolerance: float) -> float:
    """Offset outside the tolerance band: magnitude uniform in [5, 10]
    tolerance units, sign from the same draw."""
    x = 2.0 * u - 1.0
    sign = 1.0 if x >= 0 else -1.0
    return sign * (5.0 + 5.0 * abs(x)) * tolerance


def sense(spot: int, sensor: int, round_idx: int, truth: float, pb0: float,
          stream: RandomStream, tolerance: float = 1.0) -> SensorReading:
    """One measurement: faulty with probability pb0, else exact truth."""
    if not 0.0 <= pb0 <= 1.0:
        raise ValueError("pb0 must be in [0, 1]")
    if stream.uniform() < pb0:
        return SensorReading(spot, sensor, round_idx,
                             truth + fault_offset(stream.uniform(), tolerance), True)
    return SensorReading(spot, sensor, round_idx, truth, False)


class Acceptor:
    """Control-center accept rule: first arrival wins per (spot, round)."""

    def __init__(self) -> None:
        self._first: dict[tuple[int, int], tuple[int, float]] = {}

    def accept(self, spot: int, round_idx: int, value: float, at_us: int) -> None:
        key = (spot, round_idx)
        cur = self._first.get(key)
        if cur is None or at_us < cur[0]:
            self._first[key] = (at_us, value)

    def first_arrival(self, spot: int, round_idx: int) -> Optional[tuple[int, float]]:
        return self._first.get((spot, round_idx))

    def resolve_deadline(self, spot: int, round_idx: int, truth: float,
                         deadline_us: int, tolerance: float = 1.0) -> TransactionResolution:
        got = self._first.pop((spot, round_idx), None)
        if got is None:
            return TransactionResolution(spot, round_idx, Outcome.FAIL_NO_DELIVERY)
        at, value = got
        if at > deadline_us:
            return TransactionResolution(spot, round_idx, Outcome.FAIL_DEADLINE, at)
        if abs(value - truth) <= tolerance:
            return TransactionResolution(spot, round_idx, Outcome.SUCCESS, at)
        return TransactionResolution(spot, round_idx, Outcome.FAIL_WRONG_VALUE, at)


class _RepState:
    """Vectorised short/long-term opinion state.

    Semantics mirror social.ReputationTable exactly (the behavioural contract
    lives there and the equivalence is unit-tested); arrays keep the per-round
    bookkeeping off the Python hot path.
    """

    def __init__(self, n: int, window: int, w_short: float, w_long: float,
                 theta: float) -> None:
        self.window = window
        self.w_short = w_short
        self.w_long = w_long
        self.theta = theta
        self.win = np.zeros((n, window), dtype=np.int8)
        self.pos = np.zeros(n, dtype=np.int64)
        self.win_sum = np.zeros(n, dtype=np.int64)
        self.tot_sum = np.zeros(n, dtype=np.int64)

    def record_batch(self, idx: np.ndarray, bits: np.ndarray) -> None:
        slots = self.pos[idx] % self.window
        old = self.win[idx, slots]
        self.win[idx, slots] = bits
        self.win_sum[idx] += bits - old
        self.tot_sum[idx] += bits
        self.pos[idx] += 1

    def reputations(self, idx: np.ndarray) -> np.ndarray:
        w = self.window
        pos = self.pos[idx]
        filled = np.minimum(pos, w)
        s = (self.win_sum[idx] + 0.5 * (w - filled)) / w
        tot = self.tot_sum[idx]
        l_small = (tot + 0.5 * (w - pos)) / w
        l_big = tot / np.maximum(pos, 1)
        lng = np.where(pos >= w, l_big, l_small)
        return self.w_short * s + self.w_long * lng


class _ConcState:
    """Precomputed per-concentrator layout (spot-major sensor ordering)."""

    def __init__(self, topo: Topology, conc: int) -> None:
        self.conc = conc
        self.spot_ids = topo.spots_of_conc[conc]
        gids = []
        for spot in self.spot_ids:
            gids.extend(topo.sensors_of_spot(spot))
        self.gids = np.asarray(gids, dtype=np.int64)
        # per-spot helpers: the lowest sensor id keys the round shuffle, and
        # the full selection is reused whenever no sensor is excluded
        self.rep_gids = np.asarray(self.spot_ids, dtype=np.int64) * topo.redundancy
        self.full_sel = [np.arange(s * topo.redundancy, (s + 1) * topo.redundancy)
                         for s in self.spot_ids]


class Scenario:
    """One fully parameterised run; ties the media, the quantum plane, the
    reputation layer and the consensus executors to the event loop."""

    def __init__(self, cfg, master_seed: int) -> None:
        self.cfg = cfg
        self.seed = master_seed
        self.mode: Mode = cfg.mode
        self.topo = Topology(cfg.spots, cfg.redundancy)
        self.period_us = us(cfg.period_s)
        self.deadline_us = us(cfg.deadline_s)
        self.rounds = int(cfg.duration_days * 86_400 // cfg.period_s)
        self.horizon_us = self.rounds * self.period_us + self.deadline_us + US_PER_S
        self.tolerance = cfg.tolerance

        # per-sensor fault rates: a fixed fraction of the fleet is degraded
        # hardware whose fault rate dwarfs the baseline whenever faults are
        # enabled at all (pb0 = 0 models a pristine bench)
        n_sensors = self.topo.sensor_count
        rates = np.full(n_sensors, float(cfg.pb0))
        if cfg.pb0 > 0.0 and cfg.degraded_fraction > 0.0:
            gids = np.arange(n_sensors)
            deg = keyed_uniform_array(master_seed, (DEGRADED_KEY,), gids) < cfg.degraded_fraction
            rates[deg] = max(cfg.pb0, cfg.degraded_rate)
        for gid, rate in (getattr(cfg, "pb0_overrides", ()) or ()):
            rates[gid] = rate
        self.fault_rates = rates

        availability = cfg.nvis_availability
        if availability is None:
            availability = 0.70 + 0.30 * keyed_uniform(master_seed, AVAIL_KEY)
        self.availability = availability

        self.concs = [_ConcState(self.topo, c) for c in range(self.topo.concentrators)]
        self.lora: list[FifoLink] = []
        self.nvis: list[FifoLink] = []
        self.qlinks: list[QuantumLink] = []
        self.qstreams: list[RandomStream] = []
        for c in range(self.topo.concentrators):
            self.lora.append(FifoLink(
                c, LinkParams(cfg.lora_capacity_bps, cfg.buffer_slots,
                              cfg.lora_base_loss, cfg.report_bits),
                master_seed, window_us=self.period_us))
            proc = AvailabilityProcess(availability, cfg.nvis_mean_down_s,
                                       RandomStream(master_seed, f"nvis-proc-{c}"))
            self.nvis.append(FifoLink(
                100 + c, LinkParams(cfg.nvis_capacity_bps, cfg.buffer_slots,
                                    cfg.nvis_base_loss, cfg.report_bits),
                master_seed, window_us=self.period_us,
                availability=proc, dtn=DtnBuffer(cfg.dtn_ttl_s)))
            self.qlinks.append(QuantumLink(
                gen_rate=cfg.q_gen_rate, buffer_cap=cfg.q_buffer_cap,
                pairs_per_msg=cfg.q_pairs_per_msg, p_channel=cfg.q_p_channel,
                alpha=cfg.q_alpha, beta=cfg.q_beta,
                classical_overhead_rho=cfg.q_rho))
            self.qstreams.append(RandomStream(master_seed, f"qplane-{c}"))

        self.social_on = self.mode.social is not Layer.NONE
        self.rep: Optional[_RepState] = None
        if self.social_on:
            self.rep = _RepState(n_sensors, cfg.rep_window, cfg.rep_w_short,
                                 cfg.rep_w_long, cfg.rep_theta)

        self._all_gids = np.arange(n_sensors, dtype=np.int64)
        self._all_true = np.ones(n_sensors, dtype=bool)
        self._spot_starts = np.arange(self.topo.spots) * self.topo.redundancy
        self._truth_base_all = 100.0 + 7.25 * np.arange(self.topo.spots)

        self.acceptor = Acceptor()
        self.stats = RunStats(seed=master_seed)
        self.sim = Simulator()
        self.keep_resolutions = bool(getattr(cfg, "keep_resolutions", True))
        self._qreport_idx = [0] * self.topo.concentrators
        self._res_loss = {}  # cached loss probabilities per size
        self._params_cache: dict[int, ConsensusParams] = {}

    # -- transport helpers ----------------------------------------------------

    def _loss_prob(self, link: FifoLink, size_bits: int) -> float:
        key = (link.link_id, size_bits)
        p = self._res_loss.get(key)
        if p is None:
            p = loss_probability(link.params.base_loss, size_bits, link.params.ref_bits)
            self._res_loss[key] = p
        return p

    def _cc_arrival(self, payload, at_us: int) -> None:
        kind = payload[0]
        if kind == "rpt":
            _, spot, round_idx, value = payload
            self.acceptor.accept(spot, round_idx, value, at_us)
        elif kind == "fb":
            if self.rep is not None:
                _, idx, bits = payload
                self.rep.record_batch(idx, bits)
                self.stats.bump("feedback_recorded", len(idx))

    def _nvis_send(self, conc: int, payload, size_bits: int, at_us: int) -> None:
        link = self.nvis[conc]
        out = link.offer(payload, size_bits, at_us)
        if out.status is TransmitStatus.DELIVERED:
            self._cc_arrival(payload, out.deliver_at_us)
        # buffered bundles are re-offered by the Up-transition flush events

    def _forward_reports(self, conc: int, round_idx: int, chunks) -> None:
        """Forward LoRa-delivered reports over the backhaul.

        `chunks` is a list of (arrival times, spots, values, size_bits) with
        uniform size per chunk, concatenated in arrival order.  When the
        uplink is Up for the whole span with an idle queue and no DTN backlog,
        delivery times follow directly and only the first report per spot
        needs accepting; otherwise each message goes through the full offer
        path (outages, DTN, queueing).
        """
        chunks = [ch for ch in chunks if ch[0]]
        if not chunks:
            return
        link = self.nvis[conc]
        proc = link.availability
        first_at = min(ch[0][0] for ch in chunks)
        last_at = max(ch[0][-1] for ch in chunks)
        cap = link.params.capacity_bps
        max_air = us(max(ch[3] for ch in chunks) / cap)
        fast = (link._next_free <= first_at and not link.dtn.bundles
                and proc.up_through(first_at, last_at + max_air))
        if not fast:
            for ats, spots, vals, size_bits in chunks:
                for at, spot, value in zip(ats, spots, vals):
                    self._nvis_send(conc, ("rpt", spot, round_idx, value),
                                    size_bits, at)
            return
        window = first_at // link.window_us
        u = link.fade_u(window)
        seen = set()
        accept = self.acceptor.accept
        delivered = 0
        offered = 0
        for ats, spots, vals, size_bits in chunks:
            offered += len(ats)
            if u < self._loss_prob(link, size_bits):
                continue
            delivered += len(ats)
            air = us(size_bits / cap)
            for at, spot, value in zip(ats, spots, vals):
                if spot not in seen:
                    seen.add(spot)
                    accept(spot, round_idx, value, at + air)
        link.offered += offered
        link.delivered += delivered
        link.dropped_loss += offered - delivered
        link._next_free = max(link._next_free, last_at + max_air)

    def _params_for(self, n: int) -> ConsensusParams:
        p = self._params_cache.get(n)
        if p is None:
            p = ConsensusParams(n, self.cfg.consensus_timeout_s,
                                self.cfg.consensus_max_retries)
            self._params_cache[n] = p
        return p

    def _quantum_batch(self, conc: int, count: int, at_us: int) -> tuple[int, np.ndarray]:
        """Consume pairs for `count` messages in order; returns how many got a
        quantum carriage and their boosted-success draws."""
        qlink = self.qlinks[conc]
        qlink.regen_to(at_us, self.qstreams[conc])
        quantum_n = min(count, qlink.pair_buffer // qlink.pairs_per_msg)
        qlink.pair_buffer -= quantum_n * qlink.pairs_per_msg
        qlink.pairs_consumed += quantum_n * qlink.pairs_per_msg
        base = self._qreport_idx[conc]
        self._qreport_idx[conc] = base + quantum_n
        draws = keyed_uniform_array(self.seed, (QREPORT_KEY, conc),
                                    np.arange(base, base + quantum_n))
        if count > quantum_n:
            self.stats.bump("quantum_fallback", count - quantum_n)
        return quantum_n, draws

    # -- sensing ---------------------------------------------------------------

    def _round_context(self, round_idx: int):
        """Faults, values and the trusted mask for every sensor this round.

        One keyed draw covers the whole fleet; the fault offset reuses the
        fault draw (given u < rate, u/rate is again uniform).  Arrays are
        global (indexed by sensor id); concentrators fancy-index their part.
        """
        u = keyed_uniform_array(self.seed, (FAULT_KEY, round_idx), self._all_gids)
        rates = self.fault_rates
        faulty = u < rates
        truth_spot = self._truth_base_all + 1e-4 * round_idx
        values = np.repeat(truth_spot, self.topo.redundancy)
        if faulty.any():
            off_u = u[faulty] / rates[faulty]
            x = 2.0 * off_u - 1.0
            values[faulty] += np.where(x >= 0, 1.0, -1.0) * (5.0 + 5.0 * np.abs(x)) \
                * self.tolerance
        if self.social_on:
            reps = self.rep.reputations(self._all_gids)
            mask = reps >= self.rep.theta
            counts = np.add.reduceat(mask, self._spot_starts)
            starving = np.nonzero(counts == 0)[0]
            for s in starving:
                lo = self._spot_starts[s]
                hi = lo + self.topo.redundancy
                mask[lo + int(np.argmax(reps[lo:hi]))] = True
            if len(starving):
                counts[starving] = 1
        else:
            mask = self._all_true
            counts = None
        part_counts = byz_counts = None
        if self.mode.consensus is not Layer.NONE:
            part_counts = counts if counts is not None else \
                np.full(self.topo.spots, self.topo.redundancy, dtype=np.int64)
            byz_counts = np.add.reduceat(faulty & mask, self._spot_starts)
        shuffle_u = keyed_uniform_array(self.seed, (SHUFFLE_KEY, round_idx),
                                        self._all_gids)
        return values, faulty, mask, truth_spot, shuffle_u, part_counts, byz_counts

    # -- round orchestration -----------------------------------------------------

    def _conc_round_reports(self, conc: int, round_idx: int, t_us: int, ctx) -> None:
        """Non-consensus modes: every participant's report races individually,
        LoRa then NVIS; first arrival at the control center wins the spot."""
        values, faulty, mask, truth_spot, shuffle_u, _pc, _bc = ctx
        cfg = self.cfg
        g = self.concs[conc]
        gids = g.gids
        part = gids[mask[gids]] if self.social_on else gids
        n = len(part)
        if n == 0:
            return
        order = np.argsort(shuffle_u[part])  # positions into part

        lora = self.lora[conc]
        window = t_us // lora.window_us
        report_bits = cfg.report_bits
        delivered = np.zeros(n, dtype=bool)
        arrive = np.zeros(n, dtype=np.int64)
        chunks = []  # (positions-into-part, size_bits), in arrival order

        if self.mode.social is Layer.QUANTUM:
            quantum_n, draws = self._quantum_batch(conc, n, t_us)
            p_eff = self.qlinks[conc].effective_success()
            residual_bits = max(1, int(round(
                report_bits * self.qlinks[conc].classical_overhead_rho)))
            q_ok = draws < p_eff
            self.stats.bump("quantum_lost", int(quantum_n - int(q_ok.sum())))
            res_pos = order[:quantum_n][q_ok]
            full_pos = order[quantum_n:]
            if len(res_pos):
                adm, start, air = lora.admit_burst(len(res_pos), residual_bits, t_us)
                if lora.count_burst_fate(adm, residual_bits, window):
                    ok = res_pos[:adm]
                    delivered[ok] = True
                    arrive[ok] = start + air * (1 + np.arange(len(ok)))
                    chunks.append((ok, residual_bits))
            if len(full_pos):
                adm, start, air = lora.admit_burst(len(full_pos), report_bits, t_us)
                if lora.count_burst_fate(adm, report_bits, window):
                    ok = full_pos[:adm]
                    delivered[ok] = True
                    arrive[ok] = start + air * (1 + np.arange(len(ok)))
                    chunks.append((ok, report_bits))
        else:
            adm, start, air = lora.admit_burst(n, report_bits, t_us)
            if lora.count_burst_fate(adm, report_bits, window):
                ok = order[:adm]
                delivered[ok] = True
                arrive[ok] = start + air * (1 + np.arange(adm))
                chunks.append((ok, report_bits))

        red = self.topo.redundancy
        out_chunks = []
        t_fb = t_us
        for ok, size_bits in chunks:
            sel = part[ok]
            ats = arrive[ok].tolist()
            if ats:
                t_fb = max(t_fb, ats[-1])
            out_chunks.append((ats, (sel // red).tolist(), values[sel].tolist(),
                               size_bits))
        self._forward_reports(conc, round_idx, out_chunks)

        if self.social_on:
            self._feedback_from_reports(conc, round_idx, part, values, faulty,
                                        delivered, t_fb)

    def _feedback_from_reports(self, conc: int, round_idx: int,
                               part: np.ndarray, values, faulty, delivered,
                               t_fb: int) -> None:
        """Concentrator-side opinion bits: a participant is positive when its
        reading arrived and matched the spot's reference value (the median of
        the delivered readings)."""
        honest = ~faulty[part]
        bits = (delivered & honest).astype(np.int8)
        spot_of = part // self.topo.redundancy
        starts = np.searchsorted(spot_of, self.concs[conc].spot_ids)
        d_counts = np.add.reduceat(delivered, starts)
        hd_counts = np.add.reduceat(bits, starts)
        minority = np.nonzero((2 * hd_counts < d_counts))[0]
        for i in minority:
            lo = starts[i]
            hi = starts[i + 1] if i + 1 < len(starts) else len(part)
            seg = slice(lo, hi)
            vals = np.sort(values[part[seg]][delivered[seg]])
            ref = vals[len(vals) // 2]
            bits[seg] = (delivered[seg] & (values[part[seg]] == ref)).astype(np.int8)
        self._send_feedback(conc, round_idx, part, bits, t_fb)

    def _send_feedback(self, conc: int, round_idx: int, idx: np.ndarray,
                       bits: np.ndarray, t_fb: int) -> None:
        cfg = self.cfg
        payload = ("fb", idx, bits)
        if self.mode.social is Layer.QUANTUM:
            qlink = self.qlinks[conc]
            if qlink.try_consume(t_fb, self.qstreams[conc]):
                u = keyed_uniform(self.seed, QFEEDBACK_KEY, conc, round_idx)
                if u < qlink.effective_success():
                    residual = max(1, int(round(
                        cfg.feedback_bits * qlink.classical_overhead_rho)))
                    self._nvis_send(conc, payload, residual, t_fb)
                else:
                    self.stats.bump("feedback_lost")
                return
        self._nvis_send(conc, payload, cfg.feedback_bits, t_fb)

    def _conc_round_consensus(self, conc: int, round_idx: int, t_us: int, ctx) -> None:
        """Consensus modes: clusters agree first (LoRa for the classical
        protocol, entanglement plane for the quantum one), then a single
        report with the decided value crosses the backhaul."""
        values, faulty, mask, truth_spot, shuffle_u, part_counts, byz_counts = ctx
        cfg = self.cfg
        g = self.concs[conc]
        red = self.topo.redundancy
        spot_ids = g.spot_ids
        spot_order = np.argsort(shuffle_u[g.rep_gids])
        instances = []
        need_sel = self.social_on
        local_parts: dict[int, np.ndarray] = {}
        for li in spot_order:
            spot = spot_ids[li]
            n = int(part_counts[spot])
            byz = int(byz_counts[spot])
            honest = n - byz
            sel = None
            if need_sel or honest <= 1:
                lo = spot * red
                sel = (lo + np.nonzero(mask[lo:lo + red])[0]) if n < red \
                    else g.full_sel[li]
                local_parts[spot] = sel
            if honest >= 2 or honest == n:
                # honest proposals are identical; distinct faulty singletons
                # cannot outvote two or more of them
                modal = float(truth_spot[spot])
            else:
                modal = float(values[sel[0]])
                byz = int((values[sel] != modal).sum())
            instances.append(RoundInstance(
                spot, None, self._params_for(n), modal=modal, byz=byz))
        lora = self.lora[conc]
        if self.mode.consensus is Layer.CLASSICAL:
            outcomes = pbft_round(instances, lora, t_us, cfg.consensus_bits)
        else:
            outcomes = fqc_round(instances, self.qlinks[conc], lora, t_us,
                                 self.seed, round_idx, self.qstreams[conc],
                                 cfg.consensus_bits, cfg.fqc_c)

        decided_entries = []  # (at, spot, value)
        failed_spots = []
        for inst in instances:
            out = outcomes[inst.key]
            self.stats.bump("consensus_msgs", out.msg_count)
            if not out.decided:
                self.stats.bump("consensus_failed_" + out.reason.value)
                failed_spots.append(inst.key)
                continue
            self.stats.bump("consensus_decided")
            decided_entries.append((max(out.decided_at_us, t_us), inst.key, out.value))
        decided_entries.sort()

        if self.mode.social is Layer.QUANTUM and decided_entries:
            quantum_n, draws = self._quantum_batch(conc, len(decided_entries),
                                                   decided_entries[0][0])
            p_eff = self.qlinks[conc].effective_success()
            residual_bits = max(1, int(round(
                cfg.report_bits * self.qlinks[conc].classical_overhead_rho)))
            res_chunk = ([], [], [], residual_bits)
            full_chunk = ([], [], [], cfg.report_bits)
            for k, (at, spot, value) in enumerate(decided_entries):
                if k < quantum_n:
                    if draws[k] < p_eff:
                        ch = res_chunk
                    else:
                        self.stats.bump("quantum_lost")
                        continue
                else:
                    ch = full_chunk
                ch[0].append(at)
                ch[1].append(spot)
                ch[2].append(value)
            # residuals and full-size fallbacks interleave by decision time;
            # near-simultaneous decisions make per-chunk spans equivalent
            self._forward_reports(conc, round_idx, [res_chunk, full_chunk])
        else:
            ats = [e[0] for e in decided_entries]
            spots = [e[1] for e in decided_entries]
            vals = [e[2] for e in decided_entries]
            self._forward_reports(conc, round_idx,
                                  [(ats, spots, vals, cfg.report_bits)])

        if self.social_on:
            idx_list = []
            bit_list = []
            t_fb = t_us
            for at, spot, value in decided_entries:
                sel = local_parts[spot]
                idx_list.append(sel)
                bit_list.append((values[sel] == value).astype(np.int8))
                t_fb = max(t_fb, at)
            for spot in failed_spots:
                # no agreed value; the concentrator still saw the proposals,
                # so opinions fall back to the cluster-median reference
                sel = local_parts[spot]
                h = ~faulty[sel]
                if 2 * int(h.sum()) >= len(sel):
                    bits = h.astype(np.int8)
                else:
                    vals = np.sort(values[sel])
                    bits = (values[sel] == vals[len(vals) // 2]).astype(np.int8)
                idx_list.append(sel)
                bit_list.append(bits)
            if idx_list:
                self._send_feedback(conc, round_idx, np.concatenate(idx_list),
                                    np.concatenate(bit_list), t_fb)

    # -- event handlers ---------------------------------------------------------

    def _on_round(self, ev) -> None:
        round_idx = ev.data
        t_us = ev.at_us
        ctx = self._round_context(round_idx)
        if self.mode.consensus is Layer.NONE:
            for conc in range(self.topo.concentrators):
                self._conc_round_reports(conc, round_idx, t_us, ctx)
        else:
            for conc in range(self.topo.concentrators):
                self._conc_round_consensus(conc, round_idx, t_us, ctx)

    def _on_deadline(self, ev) -> None:
        round_idx = ev.data
        deadline_us = ev.at_us
        resolutions = self.stats.resolutions
        keep = self.keep_resolutions
        bump = self.stats.bump
        first = self.acceptor._first
        tol = self.tolerance
        for spot in range(self.topo.spots):
            if keep:
                res = self.acceptor.resolve_deadline(
                    spot, round_idx, ground_truth(spot, round_idx),
                    deadline_us, tol)
                resolutions.append(res)
                bump(res.outcome.value)
                continue
            got = first.pop((spot, round_idx), None)
            if got is None:
                bump("fail_no_delivery")
            elif got[0] > deadline_us:
                bump("fail_deadline")
            elif abs(got[1] - ground_truth(spot, round_idx)) <= tol:
                bump("success")
            else:
                bump("fail_wrong_value")

    def _on_transition(self, ev) -> None:
        conc, now_up = ev.data
        if not now_up:
            return
        link = self.nvis[conc]
        if link.dtn is not None and link.dtn.bundles:
            self.sim.schedule(ev.at_us, EventKind.DTN_FLUSH, self._on_flush, conc)

    def _on_flush(self, ev) -> None:
        link = self.nvis[ev.data]
        for payload, out in dtn_flush(link, ev.at_us):
            if out.status is TransmitStatus.DELIVERED:
                self._cc_arrival(payload, out.deliver_at_us)

    # -- run ----------------------------------------------------------------------

    def run(self) -> RunStats:
        sim = self.sim
        for r in range(self.rounds):
            t = r * self.period_us
            sim.schedule(t, EventKind.MEASUREMENT_ROUND, self._on_round, r)
            sim.schedule(t + self.deadline_us, EventKind.TRANSACTION_DEADLINE,
                         self._on_deadline, r)
        for conc in range(self.topo.concentrators):
            proc = self.nvis[conc].availability
            for t, phase in proc.transitions_until(self.horizon_us):
                sim.schedule(t, EventKind.LINK_TRANSITION, self._on_transition,
                             (conc, phase.value == "up"))
        sim.run(self.horizon_us)
        self._harvest_counters()
        return self.stats

    def _harvest_counters(self) -> None:
        s = self.stats
        for name, links in (("lora", self.lora), ("nvis", self.nvis)):
            for link in links:
                s.bump(f"{name}_offered", link.offered)
                s.bump(f"{name}_delivered", link.delivered)
                s.bump(f"{name}_dropped_congestion", link.dropped_congestion)
                s.bump(f"{name}_dropped_loss", link.dropped_loss)
        for link in self.nvis:
            if link.dtn is not None:
                s.bump("dtn_expired", link.dtn.expired)
                s.bump("dtn_pending", len(link.dtn))
        for q in self.qlinks:
            s.bump("pairs_generated", q.pairs_generated)
            s.bump("pairs_consumed", q.pairs_consumed)
        s.counters["availability"] = self.availability


def run_simulation(cfg, master_seed: int) -> RunStats:
    """Build and execute one run; identical (cfg, seed) gives identical stats."""
    return Scenario(cfg, master_seed).run()
