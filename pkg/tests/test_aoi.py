import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aoisgd.aoi import (
    TailBound,
    cascade_moment_bound,
    ccdf_sum,
    compose_tails,
    composition_moment_check,
    containment_check,
    dependency_decay_estimate,
    dominance_check,
    empirical_ccdf,
    path_bound,
    renewal_cycle_counts,
    second_moment,
    single_edge_tail,
    sqrt_scaling_check,
)
from aoisgd.channel import FadingChannelBank, second_eigenvalue_modulus, simulate_fading
from aoisgd.engine import run
from aoisgd.errors import DivergenceDetected, InvalidInput
from aoisgd.scenario import load_scenario

probs = st.floats(0.05, 0.95)


def raw_edge_expr(p, q, m):
    m = np.asarray(m, dtype=float)
    return p ** (np.sqrt(m + 1) - 2) + np.sqrt(m) * q ** np.sqrt(m)


def brute_moment(t, upto):
    m = np.arange(upto + 1)
    return float(np.sum(2.0 * m * t.ccdf(m)))


# -- single edge ----------------------------------------------------------------


def test_single_edge_clamps_at_zero():
    assert raw_edge_expr(0.5, 0.5, 0) == 2.0
    assert single_edge_tail(0.5, 0.5).ccdf(0) == 1.0


def test_single_edge_vanishes():
    t = single_edge_tail(0.8, 0.7)
    assert t.ccdf(10**8) < 1e-6


def test_single_edge_monotone_beyond_cutoff():
    t = single_edge_tail(0.9, 0.5)
    c = t.ccdf(np.arange(t.cutoff, 10**4 + 1))
    assert np.all(np.diff(c) <= 0)


def test_single_edge_cutoff_is_smallest_valid():
    for p, q in [(0.5, 0.5), (0.9, 0.5), (0.3, 0.8)]:
        t = single_edge_tail(p, q)
        M = t.cutoff
        tail = raw_edge_expr(p, q, np.arange(M, M + 200_000))
        assert np.all(tail <= 1.0)
        if M > 0:
            assert raw_edge_expr(p, q, M - 1) > 1.0


def test_single_edge_rejects_bad_parameters():
    for p, q in [(0.0, 0.5), (1.0, 0.5), (0.5, 1.2)]:
        with pytest.raises(InvalidInput):
            single_edge_tail(p, q)


@settings(max_examples=60, deadline=None)
@given(probs, probs)
def test_bounds_are_valid_ccdfs(p, q):
    t = single_edge_tail(p, q)
    c = t.ccdf(np.arange(0, 5000))
    assert np.all((c >= 0) & (c <= 1))
    assert np.all(np.diff(c) <= 0)
    assert np.all(c[: t.cutoff] == 1.0)
    # the bound never undercuts the raw expression
    m = np.arange(t.cutoff, 5000)
    assert np.all(c[t.cutoff:] >= np.minimum(raw_edge_expr(p, q, m), 1.0) - 1e-15)


# -- composition ----------------------------------------------------------------


def test_compose_with_zero_is_halving():
    t = single_edge_tail(0.6, 0.4)
    comp = compose_tails(t, TailBound.zero())
    m = np.arange(0, 3000)
    assert np.array_equal(comp.ccdf(m), t.ccdf(m // 2))


@settings(max_examples=40, deadline=None)
@given(probs, probs, st.floats(0.0, 0.04), st.floats(0.0, 0.04))
def test_compose_is_monotone(p, q, dp, dq):
    small = single_edge_tail(p, q)
    big = single_edge_tail(min(p + dp, 0.99), min(q + dq, 0.99))
    other = single_edge_tail(0.5, 0.5)
    m = np.arange(0, 4000)
    assert np.all(compose_tails(small, other).ccdf(m) <= compose_tails(big, other).ccdf(m))


def test_composed_cutoff_is_first_drop_below_one():
    t1, t2 = single_edge_tail(0.5, 0.5), single_edge_tail(0.9, 0.5)
    comp = compose_tails(t1, t2)
    m = np.arange(0, 4 * comp.cutoff + 10)
    s = t1.ccdf(m // 2) + t2.ccdf(m // 2)
    assert comp.cutoff == int(np.argmax(s < 1.0))


def test_halving_moment_identity():
    # without clamping, sum 2m c(m//2) = 4 sum 2k c(k) + 2 sum c(k)
    t = single_edge_tail(0.5, 0.5)
    comp = compose_tails(t, TailBound.zero())
    exact = 4 * second_moment(t) + 2 * ccdf_sum(t)
    assert math.isclose(second_moment(comp), exact, rel_tol=1e-12)


def test_composed_moment_within_factor_four():
    for pq in [(0.5, 0.5), (0.9, 0.5), (0.3, 0.7)]:
        t = single_edge_tail(*pq)
        rep = composition_moment_check(t, t)
        assert rep.passed_factor_four


@pytest.mark.xfail(strict=True, reason="halving the age budget scales the second moment by "
                   "about 4, so the factor-2 form does not hold for these bounds")
def test_composed_moment_within_factor_two():
    t = single_edge_tail(0.5, 0.5)
    assert composition_moment_check(t, t).passed


@pytest.mark.xfail(strict=True, reason="same factor-4 scaling as the composition check")
def test_two_identical_edges_within_four_single_moments():
    t = single_edge_tail(0.5, 0.5)
    rep = composition_moment_check(t, t)
    assert second_moment(compose_tails(t, t)) <= 4 * second_moment(t) + rep.slack


def test_path_bound_examples():
    assert path_bound([(0.4, 0.6)]).ccdf(50) == single_edge_tail(0.4, 0.6).ccdf(50)
    long = path_bound([(0.9, 0.5)] * 31)
    e = second_moment(long)
    assert math.isfinite(e) and e > 0
    assert e <= cascade_moment_bound([(0.9, 0.5)] * 31, factor=4.0)
    assert e > cascade_moment_bound([(0.9, 0.5)] * 31, factor=2.0)


def test_path_bound_requires_edges():
    with pytest.raises(InvalidInput):
        path_bound([])


# -- second moments -------------------------------------------------------------


def test_second_moment_examples():
    assert second_moment(TailBound.zero()) == 0.0
    assert second_moment(TailBound.step(3)) == 6.0
    assert second_moment(TailBound.from_values([1, 1, 1, 0])) == 6.0
    assert second_moment(TailBound.from_values([1, 1, 1, 0]), truncation=10) == 6.0


def test_second_moment_edge_matches_brute_force_and_doubling():
    t = single_edge_tail(0.5, 0.5)
    exact = second_moment(t)
    assert math.isclose(exact, brute_moment(t, 2_000_000), rel_tol=1e-9)
    assert abs(second_moment(t, 200_000) - second_moment(t, 400_000)) <= 1e-6 * exact


def test_second_moment_composed_matches_brute_force():
    comp = compose_tails(single_edge_tail(0.5, 0.5), single_edge_tail(0.7, 0.4))
    assert math.isclose(second_moment(comp), brute_moment(comp, 4_000_000), rel_tol=1e-9)


def test_second_moment_divergence():
    heavy = TailBound(lambda m: 1.0 / np.sqrt(m + 1.0), 0)
    with pytest.raises(DivergenceDetected):
        second_moment(heavy)
    with pytest.raises(DivergenceDetected):
        second_moment(single_edge_tail(0.9, 0.5), truncation=50)


# -- empirical tails ------------------------------------------------------------


def test_empirical_ccdf_against_geometric_law():
    rng = np.random.default_rng(0)
    p = 0.3
    reps = [rng.geometric(1 - p, 20_000) - 1 for _ in range(8)]
    emp = empirical_ccdf(reps, 20)
    m = np.arange(21)
    law = p ** (m + 1)
    # binomial standard error from the law itself stays positive in the far tail
    se = np.sqrt(law * (1 - law) / (8 * 20_000))
    assert np.all(np.abs(emp.ccdf - law) <= 5 * se + 1e-6)
    bound = TailBound.from_values(np.minimum(1.0, 1.2 * p ** (m + 1)))
    assert dominance_check(emp, bound).passed


def test_dominance_detects_a_bound_that_is_too_low():
    rng = np.random.default_rng(1)
    reps = [rng.geometric(0.5, 10_000) - 1 for _ in range(6)]
    rep = dominance_check(empirical_ccdf(reps, 10), TailBound.from_values([0.1] * 11))
    assert not rep.passed and 0 in rep.violations


def test_renewal_cycle_counts():
    s = np.array([1, 0, 0, 1, 0, 1, 0, 0, 0], dtype=bool)
    assert renewal_cycle_counts(s, 4).tolist() == [3, 2, 1, 0, 0]


# -- square-root scaling --------------------------------------------------------


def test_sqrt_scaling_lossless_is_flat():
    sc = load_scenario("lossless-sanity").with_overrides(slots=2000)
    rep = sqrt_scaling_check(run(sc).aoi, 500)
    assert rep.passed and rep.normalized_curve[-1] < 0.1


def test_sqrt_scaling_constant_channels_decay():
    sc = load_scenario("paper-experiment").with_overrides(
        slots=8000, agents=8, channel={"decay_mode": "constant"}, clocks={"kind": "every_slot"},
        problem={"kind": "none", "init": {"kind": "zeros"}})
    rep = sqrt_scaling_check(run(sc).aoi, 2000)
    assert rep.passed
    assert rep.normalized_mean[-2000:].mean() < 0.6 * rep.normalized_mean[500:2500].mean()


def test_sqrt_scaling_rejects_short_trace():
    class Short:
        def max_offdiag(self):
            return np.zeros(100)

        def mean_offdiag(self):
            return np.zeros(100)

    with pytest.raises(InvalidInput):
        sqrt_scaling_check(Short(), 10)


# -- dependency decay -----------------------------------------------------------


def test_iid_edge_has_no_dependency():
    rng = np.random.default_rng(7)
    trace = rng.random(200_000) < 0.6
    dec = dependency_decay_estimate(trace, [1, 2, 3, 5, 8])
    assert all(abs(e.gap) <= 3 * e.se or not e.available for e in dec.lags) or dec.fit_lags <= 1
    assert dec.q_fit < 0.5


def test_markov_edge_rate_near_second_eigenvalue():
    P = np.array([[0.9, 0.1], [0.2, 0.8]])
    gamma = second_eigenvalue_modulus(P)
    bank = FadingChannelBank(np.full((2, 2), 0.5), np.array([P, P]), [[0.8, 0.3]])
    tr = simulate_fading(bank, np.arange(1, 400_001), np.random.default_rng(3))
    success = np.random.default_rng(4).random(len(tr.slots)) < tr.success_probability[:, 0]
    dec = dependency_decay_estimate(success, [1, 2, 3, 4, 5, 6, 8, 10])
    assert dec.geometric
    assert 0.5 * gamma <= dec.q_fit <= min(1.0, 2 * gamma)
    gaps = [e.gap for e in dec.lags if e.significant]
    assert all(b <= a + 3 * e.se for a, b, e in zip(gaps, gaps[1:], dec.lags[1:]))


def test_short_bins_are_unavailable():
    dec = dependency_decay_estimate(np.ones(5000, dtype=bool), [1, 2])
    assert not any(e.available for e in dec.lags)


# -- containment ----------------------------------------------------------------


def test_containment_counts_violations():
    N = 50
    a = np.zeros(N, dtype=int)
    b = np.ones(N, dtype=int)
    good = np.ones(N, dtype=int)
    assert containment_check(a, b, good, 10).passed
    bad = good.copy()
    bad[30] = 99
    rep = containment_check(a, b, bad, 10)
    assert not rep.passed and rep.violations[2] == 1
