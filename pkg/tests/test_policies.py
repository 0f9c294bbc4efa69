import math
import warnings
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccbandit.core import ProblemInstance
from ccbandit.harness import simulate
from ccbandit.policies import (
    ALP,
    EALP,
    EALP2,
    FLP,
    PB,
    REGISTRY,
    UCBALP,
    UCBPB,
    DPPolicy,
    EpisodeSpec,
    EpsilonFirstALP,
    GeneralizedALP,
    HorizonWarning,
    PolicyConfigError,
    UCBEstimator,
    clt_test,
    delta_lcb,
    ealp2_t1,
    eps_length,
    explore_action,
    make_policy,
    ucb_update,
    ucb_value,
)

TWO = ProblemInstance.create([0.4, 0.6], [["4/15", "8/15", "4/5"], ["2/15", "4/15", "2/5"]])


def start(policy, inst, T, B, n):
    spec = EpisodeSpec.build(inst, T, B)
    policy.reset(spec, n)
    return spec


def arr(*x):
    return np.array(x, dtype=np.int64)


# -- UCB estimator -------------------------------------------------------------------


def test_ucb_update_means():
    est = UCBEstimator(1, 1, 2)
    ucb_update(est, 0, 1, 1.0)
    assert est.means()[0, 0, 0] == 1 and est.counts[0, 0, 0] == 1
    ucb_update(est, 0, 1, 0.0)
    assert est.means()[0, 0, 0] == 0.5 and est.counts[0, 0, 0] == 2
    rng = np.random.default_rng(4)
    draws = (rng.random(10) < 0.5).astype(float)
    est2 = UCBEstimator(1, 1, 1)
    for d in draws:
        ucb_update(est2, 0, 1, d)
    assert est2.means()[0, 0, 0] == sum(draws) / len(draws)


def test_ucb_value_examples():
    est = UCBEstimator(1, 1, 2)
    assert ucb_value(est, 0, 1, 5) == 1.0
    ucb_update(est, 0, 1, 1.0)
    ucb_update(est, 0, 1, 0.0)
    assert ucb_value(est, 0, 1, math.e**2) == pytest.approx(1.2071067811865475)
    # the exploration term vanishes as the count grows
    vals = []
    for _ in range(6):
        for _ in range(50):
            ucb_update(est, 0, 1, 0.5)
        vals.append(ucb_value(est, 0, 1, 100))
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert vals[-1] - est.means()[0, 0, 0] == pytest.approx(math.sqrt(math.log(100) / (2 * 302)))


@given(st.lists(st.tuples(st.integers(0, 2), st.floats(0, 1)), max_size=40), st.integers(1, 10**6))
@settings(max_examples=80, deadline=None)
def test_ucb_dominates_mean(obs, t):
    est = UCBEstimator(1, 1, 3)
    for k, r in obs:
        ucb_update(est, 0, k + 1, r)
    vals, means, counts = est.values(t)[0, 0], est.means()[0, 0], est.counts[0, 0]
    assert np.all(vals >= means)
    assert np.all(vals[counts == 0] == 1.0)


def test_ucb_inversion_frequency():
    # two arms with gap 0.2, each pulled ceil(2 log T / gap^2) times; count UCB order inversions at t = T
    T, gap, trials = 10**4, 0.2, 2000
    C = math.ceil(2 * math.log(T) / gap**2)
    rng = np.random.default_rng(17)
    est = UCBEstimator(trials, 1, 2)
    est.counts[:] = C
    est.sums[:, 0, 0] = (rng.random((trials, C)) < 0.6).sum(axis=1)
    est.sums[:, 0, 1] = (rng.random((trials, C)) < 0.4).sum(axis=1)
    v = est.values(T)[:, 0]
    freq = np.mean(v[:, 1] >= v[:, 0])
    harmonic = sum(1.0 / i for i in range(1, T + 1))
    slack = 3 * math.sqrt(0.25 / trials)
    assert freq <= 2 * harmonic / T + slack


# -- known-statistics decisions ------------------------------------------------------------


def test_alp_probabilities():
    pol = ALP()
    start(pol, TWO, 100, 39, 3)
    a = pol.act(1, arr(0, 0, 1), arr(39, 39, 39), np.array([0.974, 0.976, 0.0]))
    assert list(a) == [3, 0, 0]
    assert pol.last_probs_[0] == pytest.approx(0.975)
    assert pol.last_probs_[2] == 0
    # b / tau >= 1: always take
    start(pol, TWO, 10, 10, 2)
    assert list(pol.act(1, arr(0, 1), arr(10, 10), np.array([0.999, 0.999]))) == [3, 3]
    assert list(pol.act(1, arr(0, 1), arr(0, 0), np.array([0.0, 0.0]))) == [0, 0]


def test_flp_uses_fixed_ratio():
    pol = FLP()
    start(pol, TWO, 100, 39, 2)
    # the budget left is large relative to the remaining time, but FLP keeps rho = B/T
    a = pol.act(90, arr(0, 1), arr(39, 39), np.array([0.974, 0.0]))
    assert list(a) == [3, 0]
    assert pol.last_probs_[0] == pytest.approx(0.975)
    assert list(pol.act(90, arr(0, 0), arr(0, 0), np.array([0.0, 0.0]))) == [0, 0]
    start(pol, TWO, 10, 10, 1)
    assert list(pol.act(5, arr(1), arr(3), np.array([0.999]))) == [3]


def test_pb_rule():
    pol = PB()
    start(pol, TWO, 5, 5, 3)
    # tau = 5 at round 1
    a = pol.act(1, arr(0, 1, 1), arr(1, 3, 5), np.zeros(3))
    assert list(a) == [3, 0, 3]


def test_pb_requires_two_contexts():
    three = ProblemInstance.create([0.2, 0.3, 0.5], [[0.1], [0.2], [0.3]])
    with pytest.raises(PolicyConfigError, match="J = 2"):
        simulate(three, PB(), 10, 5, 2)
    with pytest.raises(PolicyConfigError):
        simulate(three, UCBPB(), 10, 5, 2)


def test_ucb_pb_rule():
    pol = UCBPB()
    start(pol, TWO, 5, 3, 2)
    # round 1: all UCBs equal 1, the better context is context 0 (lowest index), best action 1
    a = pol.act(1, arr(1, 0), arr(3, 3), np.zeros(2))
    assert list(a) == [0, 1]
    start(pol, TWO, 5, 5, 1)
    assert list(pol.act(1, arr(1), arr(5), np.zeros(1))) == [1]


def test_ucb_alp_first_round():
    pol = UCBALP()
    start(pol, TWO, 100, 39, 2)
    a = pol.act(1, arr(0, 1), arr(39, 39), np.array([0.97, 0.0]))
    # ties broken by index: context 0 ranked first, action 1 chosen, probability 0.39 / 0.4
    assert list(a) == [1, 0]
    assert pol.last_probs_[0] == pytest.approx(0.975)
    assert list(pol.act(2, arr(0, 1), arr(0, 0), np.zeros(2))) == [0, 0]


def test_ealp_counts_contexts_before_deciding():
    pol = EALP()
    start(pol, TWO, 10, 5, 1)
    for t, j in enumerate([0, 0, 1], start=1):
        pol.act(t, arr(j), arr(5), np.zeros(1))
    assert list(pol._ctx.counts[0]) == [2, 1]


def test_ealp_frequency_concentrates():
    from ccbandit.core import context_from_uniform

    n = 10**5
    ctx = context_from_uniform(TWO, np.random.default_rng(9).random(n))
    pol = EALP()
    start(pol, TWO, n, 0, 1)
    zero, u = arr(0), np.zeros(1)
    for t in range(1, n + 1):
        pol.act(t, ctx[t - 1 : t], zero, u)
    pi_hat = pol._ctx.counts[0] / n
    assert abs(pi_hat[0] - 0.4) < 3 * math.sqrt(0.24 / n)


def test_ealp2_t1_examples():
    with pytest.warns(HorizonWarning):
        assert ealp2_t1(10**6, 2, 0.01, log_T=10) == 10**6
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HorizonWarning)
        assert ealp2_t1(None, 2, 0.01, log_T=10) == 640_000_000
        assert ealp2_t1(None, 2, 0.4, log_T=10) == 400_000


def test_ealp2_with_late_t1_equals_ealp():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HorizonWarning)
        a = simulate(TWO, EALP(), 200, 80, 20, 3, record=True)
        b = simulate(TWO, EALP2(t1=10**6), 200, 80, 20, 3, record=True)
    assert np.array_equal(a.traces["action"], b.traces["action"])


def test_ealp2_freezes_counts():
    pol = EALP2(t1=3)
    start(pol, TWO, 10, 5, 1)
    for t, j in enumerate([0, 1, 1, 1, 1, 0], start=1):
        pol.act(t, arr(j), arr(5), np.zeros(1))
    assert list(pol._ctx.counts[0]) == [1, 2]
    assert pol.t1_[0] == 3


def test_delta_lcb_examples():
    d, _ = delta_lcb([0.4, 0.6], 0.41, 100, 1000)
    assert d == pytest.approx(0.005)
    d, _ = delta_lcb([0.3, 0.7], 0.5, 100, 1000)
    assert d == pytest.approx(0.1)
    d, stop = delta_lcb([0.5, 0.5], 0.5, 10**9, 1000)
    assert d == 0 and not stop
    d, stop = delta_lcb([0.3, 0.7], 0.5, 2 * 10**6, 1000)
    assert not stop
    # 16 J^2 log^3 T / 0.1^2 is about 2.1e6 rounds
    d, stop = delta_lcb([0.3, 0.7], 0.5, 3 * 10**6, 1000)
    assert stop


def test_unknown_policy_and_bad_options():
    with pytest.raises(PolicyConfigError, match="unknown policy"):
        make_policy("nope")
    with pytest.raises(PolicyConfigError):
        make_policy("ALP", bogus=1)
    assert isinstance(make_policy("ucb-alp"), UCBALP)


# -- heterogeneous costs --------------------------------------------------------------


def test_eps_length_examples():
    assert eps_length(None, 5, 0.5, 0.1, 0.2, log_T=10) == 400100
    assert eps_length(None, 1, 0.5, 1, 1, log_T=0) == 2
    with pytest.raises(ValueError):
        eps_length(100, 2, 0.5, 0.5, 0)
    # the 1/delta^2 term dominates for small delta
    small = eps_length(None, 1, 0.01, 1, 1, log_T=1)
    assert small == math.ceil(1 / 0.99 + 10**4)


def test_clt_test_examples():
    assert not clt_test(100, 0.4, 0.0, 1.0, 60, 60, 60, 60)
    assert clt_test(100, 0.4, 0.0, 1.0, 120, 130, 140, 120)
    assert not clt_test(100, 0.3, 0.3, 1.0, 10**9, 10**9, 10**9, 10**9)
    assert clt_test(100, 0.4, 0.0, 1.0, 120, math.inf, 120, math.inf)


def test_explore_action():
    assert explore_action(np.array([2, 1, 2]), np.ones(3, bool), 0.9) == 2
    picks = {explore_action(np.zeros(3, int), np.ones(3, bool), u) for u in (0.1, 0.5, 0.9)}
    assert picks == {1, 2, 3}
    assert explore_action(np.array([0, 1]), np.array([False, True]), 0.5) == 0
    counts = np.zeros(4, int)
    rng = np.random.default_rng(0)
    for _ in range(4 * 7):
        counts[explore_action(counts, np.ones(4, bool), rng.random()) - 1] += 1
    assert counts.max() - counts.min() <= 1 and counts.sum() == 28


def test_eps_first_exploit_hand_lp():
    inst = ProblemInstance.create([1.0], [[0.6]])
    pol = EpsilonFirstALP(explore=0, means="oracle")
    start(pol, inst, 10, 5, 2)
    assert list(pol.act(1, arr(0, 0), arr(5, 5), np.array([0.49, 0.51]))) == [1, 0]


def test_eps_first_exploration_then_exploit():
    inst = ProblemInstance.create([0.5, 0.5], [[0.3, 0.9], [0.5, 0.6]], [[1, 2], [1, 3]])
    res = simulate(inst, EpsilonFirstALP(explore=12), 60, 30, 8, 1, record=True)
    acts = res.traces["action"][:, :12]
    assert (acts > 0).all()
    assert res.spent.max() <= 30


def test_eps_first_option_errors():
    inst = ProblemInstance.create([1.0], [[0.6, 0.6]], [[1, 1]])
    with pytest.raises(PolicyConfigError):
        simulate(inst, EpsilonFirstALP(explore="formula"), 10, 5, 2)
    with pytest.raises(PolicyConfigError):
        simulate(inst, EpsilonFirstALP(explore="sometimes"), 10, 5, 2)


def test_unit_only_policies_reject_heterogeneous_costs():
    inst = ProblemInstance.create([0.5, 0.5], [[0.3, 0.9], [0.5, 0.6]], [[1, 2], [1, 3]])
    for cls in (ALP, FLP, EALP, UCBALP, PB, DPPolicy):
        with pytest.raises(PolicyConfigError):
            cls().check_instance(inst)


def test_context_cost_flag():
    inst = ProblemInstance.create([0.5, 0.5], [[0.3, 0.9], [0.5, 0.6]], [[2, 2], [1, 1]])
    res = simulate(inst, ALP(allow_context_costs=True), 50, 20, 10, 0)
    assert res.spent.max() <= 20


def test_ucb_pb_oracle_equals_pb():
    a = simulate(TWO, PB(), 300, 100, 30, 5, record=True)
    b = simulate(TWO, UCBPB(estimator="oracle"), 300, 100, 30, 5, record=True)
    assert np.array_equal(a.traces["action"], b.traces["action"])


def test_generalized_alp_on_unit_costs_equals_alp():
    a = simulate(TWO, ALP(), 300, 120, 30, 8, record=True)
    b = simulate(TWO, GeneralizedALP(), 300, 120, 30, 8, record=True)
    assert np.array_equal(a.traces["action"], b.traces["action"])


# -- budget safety fuzzing ----------------------------------------------------------------


@st.composite
def fuzz_case(draw):
    J = draw(st.integers(1, 3))
    K = draw(st.integers(1, 3))
    w = draw(st.lists(st.integers(1, 9), min_size=J, max_size=J))
    u = [[F(draw(st.integers(0, 10)), 10) for _ in range(K)] for _ in range(J)]
    unit = draw(st.booleans())
    c = [[1] * K for _ in range(J)] if unit else [[F(draw(st.integers(1, 6)), 2) for _ in range(K)] for _ in range(J)]
    inst = ProblemInstance.create([F(x, sum(w)) for x in w], u, c)
    T = draw(st.integers(0, 40))
    B = F(draw(st.integers(0, 60)), draw(st.sampled_from([1, 2, 3])))
    return inst, T, B, draw(st.integers(0, 2**32))


@given(fuzz_case())
@settings(max_examples=40, deadline=None)
def test_no_policy_overspends(case):
    inst, T, B, seed = case
    for name, cls in REGISTRY.items():
        pol = cls()
        try:
            pol.check_instance(inst)
        except PolicyConfigError:
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", HorizonWarning)
            res = simulate(inst, pol, T, B, 3, seed, record=True)
        # the harness raises on any unaffordable action; spent must also stay within B
        assert np.all(res.spent <= B * res.scale), name
        if T:
            assert np.all(res.traces["budget"] >= 0)
