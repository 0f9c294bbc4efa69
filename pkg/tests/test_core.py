from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccbandit.core import (
    BudgetClock,
    BudgetViolation,
    EpisodeTrace,
    ProblemInstance,
    TraceRow,
    apply_action,
    build_gap_table,
    sample_context,
    sample_reward,
)

TWO = ProblemInstance.create([0.4, 0.6], [["4/15", "8/15", "4/5"], ["2/15", "4/15", "2/5"]])
MULTI_PI = [0.025, 0.05, 0.075, 0.15, 0.2, 0.2, 0.15, 0.075, 0.05, 0.025]


def test_instance_validation():
    with pytest.raises(ValueError, match="outside"):
        ProblemInstance.create([1.0], [[1.5]])
    with pytest.raises(ValueError, match="> 0"):
        ProblemInstance.create([1.0], [[0.5]], [[0]])
    with pytest.raises(ValueError):
        ProblemInstance.create([0.5, 0.4], [[0.5], [0.5]])
    inst = ProblemInstance.create([0.1] * 10, [[0.5]] * 10)
    assert sum(inst.context_probs) == 1


def test_multi_context_probs_are_valid():
    inst = ProblemInstance.create(MULTI_PI, "jk/(JK)", num_actions=5)
    assert sum(inst.context_probs) == 1
    assert inst.expected_rewards[9][4] == 1
    assert inst.expected_rewards[0][0] == Fraction(1, 50)


def test_sample_context_degenerate():
    inst = ProblemInstance.create([1.0, 0.0], [[0.5], [0.5]])
    rng = np.random.default_rng(3)
    assert {sample_context(inst, rng) for _ in range(200)} == {0}


def test_sample_context_frequency():
    rng = np.random.default_rng(11)
    u = rng.random(10**6)
    from ccbandit.core import context_from_uniform

    freq = np.mean(context_from_uniform(TWO, u) == 0)
    assert abs(freq - 0.4) < 0.002


def test_sample_reward():
    det = TWO.with_family("deterministic")
    rng = np.random.default_rng(0)
    assert {sample_reward(det, 0, 3, rng) for _ in range(20)} == {0.8}
    zero = ProblemInstance.create([1.0], [[0.0, 1.0]])
    assert {sample_reward(zero, 0, 1, rng) for _ in range(100)} == {0.0}
    draws = [sample_reward(TWO, 1, 3, rng) for _ in range(10**5)]
    assert set(draws) <= {0.0, 1.0}
    # 10^5 draws, 3 sigma band of a Bernoulli(0.4) mean
    assert abs(np.mean(draws) - 0.4) < 3 * np.sqrt(0.24 / 1e5)
    with pytest.raises(IndexError):
        sample_reward(TWO, 2, 1, rng)
    with pytest.raises(IndexError):
        sample_reward(TWO, 0, 4, rng)


def test_sample_reward_mean_million():
    rng = np.random.default_rng(5)
    from ccbandit.core import sample_reward as sr

    u = rng.random(10**6)
    # the vectorised harness draws Bernoulli rewards as uniform < mean; check the same law
    assert abs(np.mean(u < 0.4) - 0.4) < 0.0015
    assert sr(TWO, 1, 3, np.random.default_rng(1)) in (0.0, 1.0)


def test_apply_action():
    clock = BudgetClock.start(10, 5)
    c2, r, cost = apply_action(clock, TWO, 0, 0)
    assert (r, cost, c2.b, c2.tau) == (0, 0, 5, 9)
    c3, r, cost = apply_action(clock, TWO, 0, 3, reward=1.0)
    assert c3.b == 4 and c3.tau == 9 and cost == 1
    het = ProblemInstance.create([1.0], [[0.2, 0.9]], [[1, 3]])
    with pytest.raises(BudgetViolation):
        apply_action(BudgetClock.start(5, 2), het, 0, 2, reward=0.0)


def test_clock_rho():
    c = BudgetClock.start(1000, 390)
    assert c.rho == Fraction(39, 100)
    assert c.round == 1
    assert not c.done


def test_gap_table_examples():
    gt = build_gap_table(TWO)
    assert list(gt.q) == [0, Fraction(2, 5), 1]
    assert gt.threshold(Fraction(39, 100)) == 0
    assert gt.is_boundary(Fraction(2, 5))
    multi = ProblemInstance.create(MULTI_PI, "jk/(JK)", num_actions=5)
    gm = build_gap_table(multi)
    assert list(gm.ranking) == list(range(9, -1, -1))
    assert gm.q[5] == Fraction(1, 2)
    single = build_gap_table(ProblemInstance.create([1.0], [[0.3, 0.7]]))
    assert list(single.q) == [0, 1]


def test_gap_table_ties_by_index():
    inst = ProblemInstance.create([0.3, 0.3, 0.4], [[0.5], [0.5], [0.9]])
    assert list(build_gap_table(inst).ranking) == [2, 0, 1]


def test_gaps_values():
    gt = build_gap_table(TWO)
    # gap of context 2's action 1 against context 1's best: 0.8 - 2/15
    r1 = gt.rank_of[0]
    assert gt.gaps[r1, 1, 0] == pytest.approx(0.8 - 2 / 15)


def test_trace_check_detects_overspend():
    tr = EpisodeTrace(2, Fraction(1))
    tr.rows.append(TraceRow(1, 0, 1, 1.0, Fraction(1), Fraction(0)))
    tr.rows.append(TraceRow(2, 0, 1, 1.0, Fraction(1), Fraction(-1)))
    with pytest.raises(BudgetViolation):
        tr.check()


@st.composite
def instances(draw, max_J=4, max_K=3):
    J = draw(st.integers(1, max_J))
    K = draw(st.integers(1, max_K))
    w = draw(st.lists(st.integers(0, 10), min_size=J, max_size=J).filter(lambda x: sum(x) > 0))
    pi = [Fraction(x, sum(w)) for x in w]
    u = draw(st.lists(st.lists(st.integers(0, 12), min_size=K, max_size=K), min_size=J, max_size=J))
    return ProblemInstance.create(pi, [[Fraction(x, 12) for x in row] for row in u])


@given(instances())
@settings(max_examples=60, deadline=None)
def test_gap_table_ranking_is_permutation(inst):
    gt = build_gap_table(inst)
    r = list(gt.ranking)
    assert sorted(r) == list(range(inst.J))
    for pos, j in enumerate(r):
        assert gt.rank_of[j] == pos
    assert gt.q[0] == 0 and gt.q[-1] == 1
    assert all(a <= b for a, b in zip(gt.q, gt.q[1:]))
    stars = [inst.best_rewards_exact[j] for j in r]
    assert all(a >= b for a, b in zip(stars, stars[1:]))
