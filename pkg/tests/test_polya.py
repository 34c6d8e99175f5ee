import math

import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from paritail.errors import Censored
from paritail.polya import (PolyaState, arrival_probability, convergence_time_curve,
                            enumerate_distribution, expected_gap, first_passage,
                            fit_exponential_slowdown, is_non_increasing, run_ensemble,
                            run_uniforms, simulate_paths, step)


def beta_binomial_pmf(k, t, a, b):
    # pure-alpha-zero urn with seeds (a, b) is beta-binomial(t, a, b)
    lb = math.lgamma
    log_beta = lambda x, y: lb(x) + lb(y) - lb(x + y)
    return math.comb(t, k) * math.exp(log_beta(k + a, t - k + b) - log_beta(a, b))


def forward_dp(alpha, p, steps, seed_a, seed_b):
    """Law of count_a by forward recursion over (t, count) states."""
    probs = np.zeros(steps + 1)
    probs[0] = 1.0
    k = seed_a + seed_b
    for t in range(steps):
        nxt = np.zeros_like(probs)
        for c in range(t + 1):
            q = alpha * p + (1 - alpha) * (c + seed_a) / (k + t)
            nxt[c + 1] += probs[c] * q
            nxt[c] += probs[c] * (1 - q)
        probs = nxt
    return probs


# ---- single step -------------------------------------------------------------

def test_arrival_probability_hand_value():
    s = PolyaState(alpha=0.5, p=0.3)  # pi = 1/2
    assert arrival_probability(s) == pytest.approx(0.4)


def test_arrival_probability_endpoints():
    s = PolyaState(alpha=0.0, p=0.9, t=4, count_a=1)  # pi = 2/6
    assert arrival_probability(s) == pytest.approx(1 / 3)
    assert arrival_probability(PolyaState(1.0, 0.9, t=4, count_a=1)) == pytest.approx(0.9)


def test_step_threshold():
    s = PolyaState(alpha=0.5, p=0.3)
    up = step(s, 0.39)
    down = step(s, 0.41)
    assert (up.t, up.count_a) == (1, 1)
    assert (down.t, down.count_a) == (1, 0)
    assert up.pi == pytest.approx(2 / 3)
    assert down.pi == pytest.approx(1 / 3)


@pytest.mark.parametrize("kw", [dict(alpha=1.5, p=0.5), dict(alpha=0.5, p=-0.1),
                                dict(alpha=0.5, p=0.5, seed_a=0, seed_b=0),
                                dict(alpha=0.5, p=0.5, t=1, count_a=2)])
def test_state_validation(kw):
    with pytest.raises(ValueError):
        PolyaState(**kw)


def test_step_rejects_bad_uniform():
    with pytest.raises(ValueError):
        step(PolyaState(0.5, 0.5), 1.0)


# ---- exact laws ----------------------------------------------------------------

def test_pure_urn_is_uniform_after_three():
    dist = enumerate_distribution(0.0, 0.6, 3)
    assert sorted(dist) == [0, 1, 2, 3]
    for v in dist.values():
        assert v == pytest.approx(0.25, abs=1e-15)


@pytest.mark.parametrize("steps, a, b", [(5, 1, 1), (6, 2, 1), (4, 3, 5)])
def test_pure_urn_matches_beta_binomial(steps, a, b):
    dist = enumerate_distribution(0.0, 0.2, steps, a, b)
    for k in range(steps + 1):
        assert dist.get(k, 0.0) == pytest.approx(beta_binomial_pmf(k, steps, a, b), abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.integers(0, 8), st.integers(1, 3), st.integers(1, 3))
def test_enumeration_matches_forward_recursion(alpha, p, steps, a, b):
    dist = enumerate_distribution(alpha, p, steps, a, b)
    ref = forward_dp(alpha, p, steps, a, b)
    for k in range(steps + 1):
        assert dist.get(k, 0.0) == pytest.approx(ref[k], abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.integers(0, 8), st.integers(1, 3), st.integers(1, 3))
def test_expected_gap_matches_exact_law(alpha, p, steps, a, b):
    ref = forward_dp(alpha, p, steps, a, b)
    mean_pi = sum(ref[c] * (c + a) / (a + b + steps) for c in range(steps + 1))
    assert expected_gap(alpha, p, steps, a, b) == pytest.approx(mean_pi - p, abs=1e-12)


def test_expected_gap_closed_form_full_mixing():
    # alpha = 1, k = 2: prod (1 - 1/(s+3)) = 2/(t+2)
    for t in (0, 1, 5, 40):
        assert expected_gap(1.0, 0.8, t) == pytest.approx(-0.3 * 2 / (t + 2))


# ---- simulation against exact laws ------------------------------------------------

@pytest.mark.parametrize("alpha, p", [(0.0, 0.5), (0.3, 0.8), (1.0, 0.1)])
def test_simulated_counts_match_enumeration(alpha, p):
    steps, runs = 8, 20_000
    paths = simulate_paths(alpha, p, run_uniforms(11, runs, steps))
    counts = np.rint(paths[:, -1] * (steps + 2) - 1).astype(int)
    freq = np.bincount(counts, minlength=steps + 1) / runs
    dist = enumerate_distribution(alpha, p, steps)
    for k in range(steps + 1):
        q = dist.get(k, 0.0)
        sigma = math.sqrt(q * (1 - q) / runs)
        assert abs(freq[k] - q) <= 3 * sigma + 1e-12, (k, freq[k], q)


def test_simulated_mean_matches_expected_gap():
    alpha, p, t, runs = 0.2, 0.7, 200, 4000
    final = simulate_paths(alpha, p, run_uniforms(5, runs, t))[:, -1]
    se = final.std(ddof=1) / math.sqrt(runs)
    assert abs(final.mean() - (p + expected_gap(alpha, p, t))) <= 3 * se


def test_simulate_paths_agrees_with_step():
    u = run_uniforms(3, 4, 30)
    paths = simulate_paths(0.4, 0.25, u, 2, 3)
    for r in range(4):
        s = PolyaState(0.4, 0.25, seed_a=2, seed_b=3)
        for t in range(30):
            s = step(s, u[r, t])
            assert paths[r, t + 1] == pytest.approx(s.pi, abs=1e-15)


def test_no_absorption_with_mixing():
    # with alpha > 0 both files keep positive arrival probability forever
    paths = simulate_paths(0.05, 0.5, run_uniforms(9, 200, 2000))
    assert np.all((paths > 0) & (paths < 1))


# ---- ensembles ------------------------------------------------------------------

def test_ensemble_is_deterministic():
    a = run_ensemble(0.3, 0.6, 500, 50, seed=7)
    b = run_ensemble(0.3, 0.6, 500, 50, seed=7)
    np.testing.assert_array_equal(a.final_pi, b.final_pi)
    np.testing.assert_array_equal(a.first_passage, b.first_passage)


def test_runs_are_prefix_stable():
    # run r depends only on (seed, r)
    small = run_uniforms(4, 3, 50)
    big = run_uniforms(4, 10, 50)
    np.testing.assert_array_equal(small, big[:3])


def test_full_mixing_concentrates_on_p():
    stats = run_ensemble(1.0, 0.6, 10_000, 200, seed=42)
    assert abs(stats.mean - 0.6) < 0.01
    assert stats.variance < 1e-3
    assert stats.reached == 200


def test_pure_urn_spreads_like_uniform():
    # alpha = 0 limit law is Beta(1, 1): variance 1/12
    stats = run_ensemble(0.0, 0.6, 2000, 2000, seed=42)
    assert stats.variance == pytest.approx(1 / 12, rel=0.1)


def test_first_passage_marks_misses():
    paths = np.array([[0.5, 0.52, 0.58], [0.5, 0.4, 0.3]])
    np.testing.assert_array_equal(first_passage(paths, 0.6, 0.05), [2, -1])
    np.testing.assert_array_equal(first_passage(paths, 0.5, 0.05), [0, 0])


def test_convergence_slows_as_alpha_shrinks():
    curve = convergence_time_curve([0.2, 0.5, 1.0], 0.8, 2000, 200, seed=42)
    assert is_non_increasing(curve)
    assert curve[0][1] > curve[-1][1]


def test_censored_curve_raises_or_records_inf():
    with pytest.raises(Censored) as err:
        convergence_time_curve([0.01], 0.9, 100, 20, seed=1)
    assert err.value.alpha == 0.01
    curve = convergence_time_curve([0.01, 1.0], 0.9, 100, 20, seed=1, on_censored="inf")
    assert curve[0][1] == math.inf
    assert is_non_increasing(curve)


def test_exponential_fit_recovers_slope():
    curve = [(a, math.exp(2.0 / a + 1.0)) for a in (0.2, 0.4, 0.8)] + [(0.1, math.inf)]
    slope, intercept = fit_exponential_slowdown(curve)
    assert slope == pytest.approx(2.0)
    assert intercept == pytest.approx(1.0)
    assert math.isnan(fit_exponential_slowdown([(0.5, 3.0)])[0])


def test_arrival_probability_mixed_state():
    s = PolyaState(alpha=0.5, p=0.6, t=3, count_a=0)  # pi = 1/5
    assert s.pi == pytest.approx(0.2)
    assert arrival_probability(s) == pytest.approx(0.4)


def test_pure_urn_step_at_half():
    s = PolyaState(alpha=0.0, p=0.9, t=2, count_a=1)
    assert step(s, 0.49).count_a == 2
    assert step(s, 0.0).count_a == 2


def test_certain_file_climbs_monotonically():
    paths = simulate_paths(1.0, 1.0, run_uniforms(0, 3, 50))
    assert np.all(np.diff(paths, axis=1) > 0)


def test_small_alpha_keeps_mean_near_p():
    stats = run_ensemble(0.2, 0.6, 10_000, 200, seed=42)
    assert abs(stats.mean - 0.6) < 0.05
    assert run_ensemble(0.0, 0.6, 10_000, 200, seed=42).variance > 0.02


def test_mean_gap_shrinks_over_time():
    paths = simulate_paths(0.5, 0.9, run_uniforms(21, 400, 200))
    gaps = (paths - 0.9).mean(axis=0)[::20]
    assert np.all(np.diff(np.abs(gaps)) < 0)
