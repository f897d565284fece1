"""Scenario actors: sensing, acceptance rule, topology, mode dispatch, runs."""

from dataclasses import replace

import pytest

from permasim.engine import RandomStream, us
from permasim.harness import SimConfig
from permasim.metrics import successful_transaction_rate
from permasim.telemetry import (MODE_LABELS, NINE_MODES, Acceptor, Layer, Mode,
                                Outcome, Topology, parse_mode,
                                run_simulation, sense)


# "ideal" idles every loss source: faults, fades on both media, outages, and
# the quantum channel (a perfect channel succeeds with probability 1)
IDEAL = dict(pb0=0.0, lora_base_loss=0.0, nvis_base_loss=0.0,
             nvis_availability=1.0, q_p_channel=1.0)


def ideal_config(**kw):
    return replace(SimConfig(), **{**IDEAL, **kw})


# -- sensing -------------------------------------------------------------------

def test_sense_zero_pb0_is_exact_truth():
    r = sense(0, 0, 0, 100.0, 0.0, RandomStream(1, "s"))
    assert r.value == 100.0 and not r.faulty


def test_sense_pb0_one_always_faulty():
    stream = RandomStream(1, "s")
    for _ in range(50):
        r = sense(0, 0, 0, 100.0, 1.0, stream)
        assert r.faulty
        assert abs(r.value - 100.0) >= 5.0  # outside tolerance by construction


def test_sense_fault_fraction_monte_carlo():
    stream = RandomStream(2, "s")
    n = 100_000
    faults = sum(sense(0, 0, 0, 0.0, 0.1, stream).faulty for _ in range(n))
    assert faults / n == pytest.approx(0.10, abs=0.01)


def test_sense_rejects_bad_pb0():
    with pytest.raises(ValueError):
        sense(0, 0, 0, 0.0, 1.5, RandomStream(1, "s"))


# -- mode table ------------------------------------------------------------------

def test_nine_modes_cover_cross_product():
    assert len(NINE_MODES) == 9
    assert len(set(NINE_MODES)) == 9
    socials = {m.social for m in NINE_MODES}
    cons = {m.consensus for m in NINE_MODES}
    assert socials == set(Layer) and cons == set(Layer)


def test_mode_labels_roundtrip():
    for label in MODE_LABELS:
        assert parse_mode(label).label == label
    assert parse_mode("standard") == Mode(Layer.NONE, Layer.NONE)
    assert parse_mode("quantum-social+quantum-consensus") == \
        Mode(Layer.QUANTUM, Layer.QUANTUM)


def test_unknown_mode_rejected():
    with pytest.raises(ValueError):
        parse_mode("hyper-social")


# -- accept / resolve ---------------------------------------------------------------

def test_first_arrival_wins():
    a = Acceptor()
    a.accept(3, 0, 1.0, us(100.0))
    a.accept(3, 0, 2.0, us(50.0))   # earlier arrival processed later
    a.accept(3, 0, 3.0, us(200.0))
    at, value = a.first_arrival(3, 0)
    assert (at, value) == (us(50.0), 2.0)


def test_wrong_first_value_fails_even_if_correct_arrives_later():
    a = Acceptor()
    truth = 10.0
    a.accept(0, 0, truth + 8.0, us(10.0))
    a.accept(0, 0, truth, us(20.0))
    res = a.resolve_deadline(0, 0, truth, us(1000.0))
    assert res.outcome is Outcome.FAIL_WRONG_VALUE


def test_no_delivery_and_late_delivery_outcomes():
    a = Acceptor()
    assert a.resolve_deadline(0, 0, 1.0, us(10.0)).outcome is Outcome.FAIL_NO_DELIVERY
    a.accept(1, 0, 1.0, us(20.0))
    assert a.resolve_deadline(1, 0, 1.0, us(10.0)).outcome is Outcome.FAIL_DEADLINE


def test_correct_value_before_deadline_succeeds():
    a = Acceptor()
    a.accept(0, 5, 42.0, us(7200.0))
    res = a.resolve_deadline(0, 5, 42.0, us(86_400.0))
    assert res.outcome is Outcome.SUCCESS
    assert res.decided_at_us == us(7200.0)


# -- topology --------------------------------------------------------------------

def test_round_robin_assignment_and_counts():
    topo = Topology(32, 3)
    sizes = [len(s) for s in topo.spots_of_conc]
    assert sum(sizes) == 32
    assert sizes == [7, 7, 6, 6, 6]
    assert topo.sensor_count == 96
    for spot in range(32):
        assert spot in topo.spots_of_conc[spot % 5]


def test_topology_64_spots():
    topo = Topology(64, 5)
    assert [len(s) for s in topo.spots_of_conc] == [13, 13, 13, 13, 12]
    assert topo.sensor_count == 320
    assert topo.sensors_of_spot(2) == [10, 11, 12, 13, 14]


def test_topology_validation():
    with pytest.raises(ValueError):
        Topology(0, 3)
    with pytest.raises(ValueError):
        Topology(32, 0)


# -- whole runs -----------------------------------------------------------------

def test_ideal_run_is_perfect():
    # no fault source active: STR exactly 1.0
    cfg = ideal_config(duration_days=2.0, spots=32, redundancy=1)
    stats = run_simulation(cfg, 7)
    assert successful_transaction_rate(stats.resolutions) == 1.0


def test_same_seed_reproduces_bit_identical_stats():
    cfg = replace(SimConfig(), duration_days=3.0)
    a = run_simulation(cfg, 99)
    b = run_simulation(cfg, 99)
    assert a.counters == b.counters
    assert [(r.spot, r.round_idx, r.outcome, r.decided_at_us)
            for r in a.resolutions] == \
           [(r.spot, r.round_idx, r.outcome, r.decided_at_us)
            for r in b.resolutions]


def test_different_seeds_differ():
    cfg = replace(SimConfig(), duration_days=3.0)
    a = run_simulation(cfg, 1)
    b = run_simulation(cfg, 2)
    assert a.counters != b.counters


def test_zero_horizon_yields_no_transactions():
    cfg = replace(SimConfig(), duration_days=0.01)  # below one period
    stats = run_simulation(cfg, 1)
    assert stats.resolutions == []
    with pytest.raises(Exception):
        successful_transaction_rate(stats.resolutions)


def test_one_resolution_per_spot_round():
    cfg = replace(SimConfig(), duration_days=1.0, spots=32, redundancy=2)
    stats = run_simulation(cfg, 3)
    keys = [(r.spot, r.round_idx) for r in stats.resolutions]
    assert len(keys) == len(set(keys)) == 32 * 24


def test_dtn_outage_delivery_still_succeeds():
    # an outage shorter than the deadline only delays the round's reports
    cfg = ideal_config(duration_days=1.0, spots=5, redundancy=1,
                       nvis_availability=0.8, nvis_mean_down_s=7200.0)
    stats = run_simulation(cfg, 11)
    counts = stats.counters
    assert counts.get("fail_no_delivery", 0) == 0
    assert counts.get("fail_deadline", 0) == 0
    assert successful_transaction_rate(stats.resolutions) == 1.0


def test_mode_dispatch_runs_every_mode():
    cfg = replace(SimConfig(), duration_days=0.5, spots=10, redundancy=2)
    for mode in NINE_MODES:
        stats = run_simulation(replace(cfg, mode=mode), 5)
        assert len(stats.resolutions) == 10 * 12


def test_byzantine_flag_invisible_to_protocol():
    # a faulty reading differs in value only; resolutions never read the flag
    cfg = replace(SimConfig(), duration_days=0.5, spots=5, redundancy=3, pb0=0.3)
    stats = run_simulation(cfg, 13)
    assert len(stats.resolutions) == 5 * 12


def test_ideal_runs_perfect_for_all_nine_modes_small():
    cfg = ideal_config(duration_days=1.0, spots=10, redundancy=3)
    for mode in NINE_MODES:
        stats = run_simulation(replace(cfg, mode=mode), 17)
        assert successful_transaction_rate(stats.resolutions) == 1.0, mode.label


def test_link_conservation_over_a_run():
    # offered == delivered + dropped(congestion) + dropped(loss) on both media
    cfg = replace(SimConfig(), duration_days=5.0, spots=20, redundancy=4,
                  nvis_mean_down_s=7200.0)
    stats = run_simulation(cfg, 23)
    c = stats.counters
    for medium in ("lora", "nvis"):
        assert c[f"{medium}_offered"] == (
            c[f"{medium}_delivered"] + c[f"{medium}_dropped_congestion"]
            + c[f"{medium}_dropped_loss"]), medium


def test_chronically_faulty_sensor_sinks_to_cluster_minimum():
    # one sensor misreports at 0.1, the rest are clean: after a 30-day warm-up
    # its reputation is strictly the cluster minimum
    from permasim.telemetry import Scenario

    cfg = replace(SimConfig(), mode=parse_mode("social"), duration_days=30.0,
                  spots=5, redundancy=3, pb0=0.0, pb0_overrides=((0, 0.1),))
    sc = Scenario(cfg, 41)
    sc.run()
    cluster = sc.topo.sensors_of_spot(0)
    reps = {s: float(sc.rep.reputations(__import__("numpy").array([s]))[0])
            for s in cluster}
    assert 0 in cluster
    assert reps[0] < min(v for s, v in reps.items() if s != 0)


def test_consensus_round_traffic_split():
    # five-strong clusters: 40 voting messages each on the area channel, one
    # decided report each on the backhaul
    cfg = ideal_config(mode=parse_mode("consensus"), duration_days=0.25,
                       spots=5, redundancy=5)
    stats = run_simulation(cfg, 3)
    rounds = 6
    assert stats.counters["consensus_msgs"] == 40 * 5 * rounds
    assert stats.counters["lora_offered"] == 40 * 5 * rounds
    assert stats.counters["nvis_offered"] == 5 * rounds
    assert stats.counters["consensus_decided"] == 5 * rounds


def test_standard_round_traffic_split():
    # no agreement layer: every sensor's report crosses both media, nothing else
    cfg = ideal_config(duration_days=0.25, spots=5, redundancy=3)
    stats = run_simulation(cfg, 3)
    rounds = 6
    assert stats.counters.get("consensus_msgs", 0) == 0
    assert stats.counters["lora_offered"] == 15 * rounds
    assert stats.counters["nvis_offered"] == 15 * rounds
