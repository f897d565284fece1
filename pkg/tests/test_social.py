"""Reputation layer: opinion formula, trusted-set filtering, convergence."""

import random

import numpy as np
import pytest

from permasim.social import ReputationTable, UnknownSensorError
from permasim.telemetry import _RepState


def make_table(**kw):
    t = ReputationTable(**kw)
    for s in range(5):
        t.register(s)
    return t


def test_empty_history_is_neutral():
    t = make_table()
    assert t.reputation(0) == pytest.approx(0.5)


def test_all_positive_window():
    t = make_table()
    for _ in range(20):
        t.record_feedback(1, 1)
    assert t.reputation(1) == pytest.approx(1.0)


def test_short_long_split_example():
    # 10 successes then 10 failures with W=10: S=0, L=0.5 -> R=0.25
    t = make_table()
    for _ in range(10):
        t.record_feedback(2, 1)
    for _ in range(10):
        t.record_feedback(2, 0)
    assert t.reputation(2) == pytest.approx(0.25)


def test_history_append_only_and_counted():
    t = make_table()
    for _ in range(20):
        t.record_feedback(3, 1)
    assert t.history_len(3) == 20


def test_unknown_sensor_is_usage_error():
    t = make_table()
    with pytest.raises(UnknownSensorError):
        t.record_feedback(99, 1)
    with pytest.raises(UnknownSensorError):
        t.reputation(99)


def test_lost_feedback_never_recorded():
    # the loss rule lives at the transport layer: the call simply not arriving
    # must leave history untouched
    t = make_table()
    t.record_feedback(0, 1)
    before = t.reputation(0)
    # (dropped message: no call happens)
    assert t.reputation(0) == before
    assert t.history_len(0) == 1


def test_single_early_loss_does_not_exile_a_fresh_sensor():
    # the neutral prior decays with evidence instead of vanishing at the
    # first recorded bit
    t = make_table()
    t.record_feedback(4, 0)
    assert t.reputation(4) > 0.4


def test_fresh_cluster_is_fully_trusted():
    t = make_table(theta=0.4)
    assert t.trusted_set([0, 1, 2, 3, 4]) == [0, 1, 2, 3, 4]


def test_low_reputation_sensor_excluded():
    t = make_table(theta=0.4)
    for _ in range(10):
        t.record_feedback(0, 1)
        t.record_feedback(1, 1)
    for _ in range(10):
        t.record_feedback(0, 1)
        t.record_feedback(1, 0)
    assert t.reputation(1) == pytest.approx(0.25)
    assert 1 not in t.trusted_set([0, 1])
    assert 0 in t.trusted_set([0, 1])


def test_starvation_guard_keeps_best_sensor():
    t = make_table(theta=0.9)
    for _ in range(30):
        t.record_feedback(0, 0)
        t.record_feedback(1, 1)
        t.record_feedback(1, 0)
    kept = t.trusted_set([0, 1])
    assert kept == [1]  # highest reputation survives even below theta


def test_empty_cluster_rejected():
    t = make_table()
    with pytest.raises(ValueError):
        t.trusted_set([])


def test_raising_theta_never_enlarges_trusted_set():
    rng = random.Random(11)
    t = make_table(theta=0.0)
    for _ in range(200):
        s = rng.randrange(5)
        t.record_feedback(s, rng.randint(0, 1))
    cluster = [0, 1, 2, 3, 4]
    prev = None
    for theta in (0.0, 0.2, 0.4, 0.6, 0.8, 1.0):
        kept = t.trusted_set(cluster, theta)
        if len(kept) > 1 and prev is not None and len(prev) > 1:
            assert set(kept) <= set(prev)
        prev = kept


def test_long_term_opinion_converges_to_feedback_rate():
    # law of large numbers at 10^4 feedbacks, tolerance 0.02
    rng = random.Random(5)
    q = 0.73
    t = ReputationTable(w_short=0.0, w_long=1.0)
    t.register(0)
    for _ in range(10_000):
        t.record_feedback(0, 1 if rng.random() < q else 0)
    assert t.reputation(0) == pytest.approx(q, abs=0.02)


def test_vectorised_state_matches_reference_table():
    # the in-run array implementation must reproduce ReputationTable bit for bit
    rng = random.Random(21)
    n = 12
    table = ReputationTable()
    for s in range(n):
        table.register(s)
    state = _RepState(n, 10, 0.5, 0.5, 0.4)
    for _ in range(300):
        batch = [(s, rng.randint(0, 1)) for s in range(n) if rng.random() < 0.7]
        if not batch:
            continue
        for s, b in batch:
            table.record_feedback(s, b)
        idx = np.array([s for s, _ in batch])
        bits = np.array([b for _, b in batch], dtype=np.int8)
        state.record_batch(idx, bits)
        reps_ref = np.array([table.reputation(s) for s in range(n)])
        reps_vec = state.reputations(np.arange(n))
        assert np.allclose(reps_ref, reps_vec)
