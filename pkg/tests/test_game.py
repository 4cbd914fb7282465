import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gpata.dpfp import CongestionState, negotiate
from gpata.game import (SCORE_FLOOR, GameInstance, feasible, payoff, quality_score, tie_break, verify_equilibrium,
                        win_probabilities, wcet)
from gpata.model import Task
from gpata.privacy import Estimate


def task(comp=1.0):
    return Task(0, 1.0, 1.0, comp, 0.0)


def test_quality_examples():
    assert quality_score(Estimate(2.0, 0.5, 3.0), 1.0, 0.0) == 1.0
    assert quality_score(Estimate(1, 0.2, 0.1)) == quality_score(Estimate(1, 0.2, 0.1))
    assert quality_score(Estimate(1.0, 1.0, 0.5)) == SCORE_FLOOR


def test_clamped_scores_keep_tie_break_well_defined():
    grid = [Estimate(f, u, d) for f in (0.0, 0.5, 2.0) for u in (0.0, 0.5, 1.0) for d in (0.0, 0.5, 3.0)]
    scores = [quality_score(e) for e in grid]
    for n in (1, 2, 3):
        for combo in itertools.combinations(scores, n):
            p = win_probabilities(combo)
            assert np.all(p > 0) and np.all(np.isfinite(p))
            assert p.sum() == pytest.approx(1.0)


def test_tie_break_examples():
    assert tie_break({4: 0.3}, np.random.default_rng(0)) == 4
    assert win_probabilities([3, 1]) == pytest.approx([0.75, 0.25])


def test_tie_break_monte_carlo():
    rng = np.random.default_rng(2024)
    wins = sum(tie_break({"a": 3.0, "b": 1.0}, rng) == "a" for _ in range(100_000))
    assert abs(wins / 100_000 - 0.75) <= 0.01


@given(st.lists(st.floats(1e-6, 1e3), min_size=1, max_size=8), st.floats(1e-3, 1e3))
def test_tie_break_probabilities_sum_to_one_and_are_scale_invariant(scores, c):
    p = win_probabilities(scores)
    assert p.sum() == pytest.approx(1.0)
    assert win_probabilities([c * s for s in scores]) == pytest.approx(p)


def test_tie_break_winner_distribution_is_scale_invariant():
    rng = np.random.default_rng(5)
    a = [tie_break({0: 3.0, 1: 1.0, 2: 2.0}, rng) for _ in range(200)]
    rng = np.random.default_rng(5)
    b = [tie_break({0: 30.0, 1: 10.0, 2: 20.0}, rng) for _ in range(200)]
    assert a == b


def test_feasibility_examples():
    deadline = 2.0
    # wcet equal to the deadline on an idle device: boundary holds
    assert feasible(task(4.0), 2.0, 0.0, deadline)
    # wcet = 0.6 deadline on top of 0.5 committed utilization
    t = task(0.6 * deadline * 2.0 * 0.5)
    assert wcet(t, 2.0, 0.5) == pytest.approx(0.6 * deadline)
    assert not feasible(t, 2.0, 0.5, deadline, utilization=0.5)
    assert not feasible(task(0.01), 3.0, 1.0, deadline)


@given(st.floats(0.01, 5), st.floats(0.1, 5), st.floats(0, 0.99), st.floats(0.01, 10), st.floats(0.01, 10),
       st.floats(0, 1))
def test_feasibility_monotone_in_deadline(comp, f, u, d1, d2, util):
    lo, hi = sorted((d1, d2))
    if feasible(task(comp), f, u, lo, util):
        assert feasible(task(comp), f, u, hi, util)


def test_payoff_examples():
    assert payoff(10, 1.0, 1.0, 2, True) == 5.0
    assert payoff(1e6, 1.0, 1.0, 2, False) == 0.0
    assert payoff(10, 1.0, 2.0, 2, True) == 2.5
    with pytest.raises(ValueError):
        payoff(10, 1.0, 1.0, 0.0, True)


@given(st.floats(0, 100), st.floats(0, 100), st.floats(0.1, 5), st.floats(0, 10), st.floats(0, 10),
       st.floats(0.1, 10), st.floats(0, 10))
def test_payoff_monotonicity(r1, r2, q, extra1, extra2, e1, de):
    lo, hi = sorted((r1, r2))
    assert payoff(lo, q, q + extra1, e1, True) <= payoff(hi, q, q + extra1, e1, True)
    s_lo, s_hi = sorted((q + extra1, q + extra2))
    assert payoff(hi, q, s_hi, e1, True) <= payoff(hi, q, s_lo, e1, True)
    assert payoff(hi, q, s_lo, e1 + de, True) <= payoff(hi, q, s_lo, e1, True)


def test_verify_equilibrium_examples():
    g = GameInstance([5.0], [[1.0]], [[1.0]], [[True]])
    assert verify_equilibrium([0], g)
    g = GameInstance([5.0, 3.0], [[1.0, 1.0]], [[1.0, 1.0]], [[False, True]])
    assert not verify_equilibrium([0], g)
    assert verify_equilibrium([1], g)


def oracle_equilibrium(profile, rewards, quality, energy, ok):
    """Independent check in exact arithmetic: recompute every device's payoff after every unilateral move."""
    J, I = len(quality), len(rewards)

    def utility(prof, j):
        k = prof[j]
        if k is None or not ok[j][k]:
            return Fraction(0)
        total = sum(Fraction(quality[i][k]) for i in range(J) if prof[i] == k)
        return Fraction(rewards[k]) * Fraction(quality[j][k]) / (Fraction(energy[j][k]) * total)

    for j in range(J):
        here = utility(profile, j)
        for alt in [None] + list(range(I)):
            moved = list(profile)
            moved[j] = alt
            if utility(moved, j) > here:
                return False
    return True


def random_instance(rng, max_j=3, max_i=3):
    J, I = int(rng.integers(1, max_j + 1)), int(rng.integers(1, max_i + 1))
    # coarse values produce many exact payoff ties, the hard case for tolerance handling
    rewards = rng.integers(1, 5, I).astype(float)
    quality = rng.choice([0.5, 1.0, 2.0], (J, I))
    quality = np.repeat(quality[:, :1], I, axis=1)
    energy = rng.choice([1.0, 2.0], (J, I))
    ok = rng.random((J, I)) < 0.8
    return rewards, quality, energy, ok


def test_verify_equilibrium_agrees_with_exact_oracle_on_all_small_profiles():
    rng = np.random.default_rng(99)
    checked = 0
    for _ in range(150):
        rewards, quality, energy, ok = random_instance(rng)
        g = GameInstance(rewards, quality, energy, ok)
        J, I = quality.shape
        for prof in itertools.product([None] + list(range(I)), repeat=J):
            assert verify_equilibrium(prof, g) == oracle_equilibrium(
                list(prof), rewards.tolist(), quality.tolist(), energy.tolist(), ok.tolist()), (prof, g)
            checked += 1
    assert checked > 1000


def test_converged_negotiation_on_seeded_4x4_is_an_equilibrium():
    rng = np.random.default_rng(4)
    g = GameInstance(rng.uniform(1, 10, 4), np.repeat(rng.uniform(0.2, 2, (4, 1)), 4, axis=1),
                     rng.uniform(0.5, 3, (4, 4)), np.ones((4, 4), dtype=bool))
    res = negotiate(g, CongestionState(np.full(4, SCORE_FLOOR), 0.5), 0.8, 50, np.random.default_rng(1))
    assert res.converged
    assert verify_equilibrium(res.choices, g)
    assert oracle_equilibrium(res.choices, g.rewards.tolist(), g.quality.tolist(), g.energy.tolist(),
                              g.feasible.tolist())


def test_verify_equilibrium_refuses_huge_instances():
    g = GameInstance(np.ones(200), np.ones((60, 200)), np.ones((60, 200)), np.ones((60, 200), dtype=bool))
    with pytest.raises(ValueError):
        verify_equilibrium([0] * 60, g)
