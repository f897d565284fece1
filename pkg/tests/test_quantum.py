"""Quantum channel combiners: closed forms, bounds, Monte Carlo cross-checks."""

import random

import pytest

from permasim.engine import RandomStream, us
from permasim.netmodel import FifoLink, LinkParams
from permasim.quantum import (QuantumLink, quantum_transmit, superadditive_success,
                              superposed_success)


# -- super-additive combiner ---------------------------------------------------

def test_single_channel_identity():
    assert superadditive_success([0.37], 1.0) == pytest.approx(0.37)


def test_independent_combination_at_alpha_one():
    assert superadditive_success([0.5, 0.5], 1.0) == pytest.approx(0.75)


def test_superadditive_boost_closed_form():
    # 1 - 0.5^2.4 = 0.810542...; cross-checked by the Monte Carlo test below
    assert superadditive_success([0.5, 0.5], 1.2) == pytest.approx(0.8105, abs=2e-4)


def test_superadditive_rejects_bad_args():
    with pytest.raises(ValueError):
        superadditive_success([], 1.0)
    with pytest.raises(ValueError):
        superadditive_success([0.5], 0.9)
    with pytest.raises(ValueError):
        superadditive_success([1.5], 1.0)


# -- superposed-trajectory combiner ---------------------------------------------

def test_beta_zero_reduces_to_best_path():
    assert superposed_success(0.3, 0.7, 0.0) == pytest.approx(0.7)


def test_perfect_path_dominates():
    for p2 in (0.0, 0.4, 1.0):
        assert superposed_success(1.0, p2, 0.7) == pytest.approx(1.0)


def test_beta_one_equals_independent_two_path():
    assert superposed_success(0.5, 0.5, 1.0) == pytest.approx(0.75)


def test_superposed_symmetry():
    rng = random.Random(1)
    for _ in range(200):
        p1, p2, b = rng.random(), rng.random(), rng.random()
        assert superposed_success(p1, p2, b) == pytest.approx(
            superposed_success(p2, p1, b))


# -- bound and monotonicity properties (10^4 random draws) ----------------------

def test_boost_and_trajectory_bounds():
    rng = random.Random(42)
    for _ in range(10_000):
        ps = [rng.random() for _ in range(rng.randint(1, 4))]
        alpha = 1.0 + 3.0 * rng.random()
        independent = 1.0 - _prod(1.0 - p for p in ps)
        boosted = superadditive_success(ps, alpha)
        assert boosted >= independent - 1e-12
        p1, p2, beta = rng.random(), rng.random(), rng.random()
        s = superposed_success(p1, p2, beta)
        assert max(p1, p2) - 1e-12 <= s <= 1.0 - (1.0 - p1) * (1.0 - p2) + 1e-12


def test_combiners_monotone_in_every_argument():
    rng = random.Random(43)
    for _ in range(10_000):
        p = rng.random()
        q = rng.random()
        beta = rng.random()
        alpha = 1.0 + 2.0 * rng.random()
        dp = rng.random() * (1.0 - p)
        assert superadditive_success([p + dp, q], alpha) >= \
            superadditive_success([p, q], alpha) - 1e-12
        assert superadditive_success([p, q], alpha + 0.5) >= \
            superadditive_success([p, q], alpha) - 1e-12
        assert superposed_success(p + dp, q, beta) >= \
            superposed_success(p, q, beta) - 1e-12
        assert superposed_success(p, q, min(1.0, beta + 0.1)) >= \
            superposed_success(p, q, beta) - 1e-12


def _prod(it):
    out = 1.0
    for x in it:
        out *= x
    return out


def test_monte_carlo_matches_closed_forms_within_3_sigma():
    # boosted Bernoulli model: channel-use i fails with (1-p_i)^alpha;
    # trajectory model: best path, else beta-gated second path
    rng = random.Random(7)
    n = 200_000
    ps, alpha = [0.5, 0.5], 1.2
    hits = 0
    for _ in range(n):
        if any(rng.random() < 1.0 - (1.0 - p) ** alpha for p in ps):
            hits += 1
    p_hat = hits / n
    p_true = superadditive_success(ps, alpha)
    sigma = (p_true * (1 - p_true) / n) ** 0.5
    assert abs(p_hat - p_true) < 3 * sigma

    p1, p2, beta = 0.8, 0.5, 0.5
    hits = 0
    for _ in range(n):
        if rng.random() < max(p1, p2):
            hits += 1
        elif rng.random() < beta and rng.random() < min(p1, p2):
            hits += 1
    p_hat = hits / n
    p_true = superposed_success(p1, p2, beta)
    sigma = (p_true * (1 - p_true) / n) ** 0.5
    assert abs(p_hat - p_true) < 3 * sigma


# -- entanglement buffering -------------------------------------------------------

def test_zero_rate_generates_nothing():
    q = QuantumLink(gen_rate=0.0)
    assert q.entanglement_step(100.0, RandomStream(1, "q")) == 0


def test_full_buffer_adds_nothing():
    q = QuantumLink(gen_rate=10.0, buffer_cap=50, pair_buffer=50)
    assert q.entanglement_step(100.0, RandomStream(1, "q")) == 0
    assert q.pair_buffer == 50


def test_poisson_generation_mean():
    # mean of Poisson(gen_rate * dt) = 1000 at 10/s for 100 s (uncapped)
    stream = RandomStream(5, "poisson")
    total = 0
    trials = 10_000
    for _ in range(trials):
        q = QuantumLink(gen_rate=10.0, buffer_cap=10_000_000)
        total += q.entanglement_step(100.0, stream)
    assert total / trials == pytest.approx(1000.0, abs=10.0)


def test_pair_conservation_and_bounds():
    q = QuantumLink(gen_rate=5.0, buffer_cap=40, pairs_per_msg=2)
    stream = RandomStream(9, "pairs")
    consumed = 0
    for k in range(200):
        if q.try_consume(us(10.0 * k), stream):
            consumed += 2
        assert 0 <= q.pair_buffer <= q.buffer_cap
    assert consumed == q.pairs_consumed
    assert q.pairs_consumed <= q.pairs_generated + 0  # never from thin air


# -- quantum-assisted transmission --------------------------------------------------

def _classical(link, t):
    return lambda size: link.offer(None, size, t)


def test_effective_success_closed_form():
    # q = 1 - 0.2^2.4 = 0.978976...; p_eff = q + 0.5 q (1-q) = 0.989266...
    q = QuantumLink(p_channel=0.8, pairs_per_msg=2, alpha=1.2, beta=0.5)
    assert q.effective_success() == pytest.approx(0.98927, abs=2e-4)


def test_starved_plane_falls_back_full_size():
    qlink = QuantumLink(gen_rate=0.0, pair_buffer=0)
    link = FifoLink(1, LinkParams(4800.0, 8, 0.0), 3, window_us=10**9)
    out = quantum_transmit(qlink, 800, 0, 0.0, _classical(link, 0), RandomStream(1, "s"))
    assert out.fallback and not out.quantum_ok
    assert out.delivered
    # full classical airtime, not the residual's
    assert out.deliver_at_us == us(800 / 4800.0)


def test_success_sends_residual_fraction():
    qlink = QuantumLink(gen_rate=10.0, pair_buffer=10, classical_overhead_rho=0.25)
    link = FifoLink(1, LinkParams(4800.0, 8, 0.0), 3, window_us=10**9)
    out = quantum_transmit(qlink, 800, 0, 0.0, _classical(link, 0), RandomStream(1, "s"))
    assert out.quantum_ok
    assert out.deliver_at_us == us(200 / 4800.0)
    assert qlink.pairs_consumed == 2


def test_quantum_stage_failure_loses_message():
    qlink = QuantumLink(pair_buffer=10)
    link = FifoLink(1, LinkParams(4800.0, 8, 0.0), 3, window_us=10**9)
    out = quantum_transmit(qlink, 800, 0, 0.9999, _classical(link, 0),
                           RandomStream(1, "s"))
    assert not out.quantum_ok and not out.fallback
    assert out.classical is None


def test_perfect_channel_always_succeeds():
    qlink = QuantumLink(p_channel=1.0, pair_buffer=100)
    assert qlink.effective_success() == pytest.approx(1.0)
