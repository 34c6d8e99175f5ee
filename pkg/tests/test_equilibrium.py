import itertools

import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from paritail.equilibrium import (GameSpec, best_response, consensus_diagnostic,
                                  equilibrium_residual, greedy_ratio_allocation, greedy_rounds,
                                  payoff, payoff_gap, solve_nash)
from paritail.errors import NonpositivePayoff
from paritail.market import AllocationMatrix, BeliefMatrix, bandwidth_profile


def grid_payoff(x_own, y_opp, p, budget_own, budget_opp):
    """Two-file payoff of a server bidding x on file 0 (rest on file 1)
    against an opponent bidding y on file 0. Written from the definition,
    independent of the package."""
    own = (x_own, budget_own - x_own)
    opp = (y_opp, budget_opp - y_opp)
    total = 0.0
    for j in range(2):
        if own[j] > 0:
            total += p[j] * own[j] / (own[j] + opp[j])
    return total


def simplex_grid(n, k):
    """All points of the n-simplex with coordinates in multiples of 1/k."""
    for c in itertools.product(range(k + 1), repeat=n - 1):
        if sum(c) <= k:
            yield np.array(list(c) + [k - sum(c)]) / k


# ---- payoff ---------------------------------------------------------------

def test_payoff_single_server_is_support_mass():
    g = GameSpec.common([0.5, 0.3, 0.2], [1.0])
    a = AllocationMatrix([[0.7, 0.3, 0.0]], [1.0])
    assert payoff(a, 0, g) == pytest.approx(0.8)


def test_payoff_symmetric_flat():
    g = GameSpec.common([0.5, 0.5], [0.5, 0.5])
    a = AllocationMatrix([[0.25, 0.25], [0.25, 0.25]], [0.5, 0.5])
    assert payoff(a, 0, g) == pytest.approx(0.5)
    assert payoff(a, 0, g) + payoff(a, 1, g) == pytest.approx(1.0)


def test_payoff_zero_bids():
    g = GameSpec.common([0.5, 0.5], [0.5, 0.5])
    a = AllocationMatrix([[0.0, 0.0], [0.25, 0.25]], [0.5, 0.5])
    assert payoff(a, 0, g) == 0.0


# ---- best response ----------------------------------------------------------

def test_best_response_single_file():
    g = GameSpec.common([1.0], [0.5, 0.5])
    a = AllocationMatrix([[0.1], [0.5]], [0.5, 0.5])
    np.testing.assert_allclose(best_response(a, 0, g), [0.5])


def test_best_response_matches_fine_grid():
    # opponent holds (0.4, 0.1); the FOC answer is (0.4, 0.1)
    p = (0.8, 0.2)
    g = GameSpec.common(p, [0.5, 0.5])
    a = AllocationMatrix([[0.25, 0.25], [0.4, 0.1]], [0.5, 0.5])
    row = best_response(a, 0, g)
    np.testing.assert_allclose(row, [0.4, 0.1], atol=1e-12)

    xs = np.linspace(0, 0.5, 20001)
    vals = [grid_payoff(x, 0.4, p, 0.5, 0.5) for x in xs]
    assert abs(xs[int(np.argmax(vals))] - row[0]) <= xs[1]


def test_best_response_claims_unserved_file():
    g = GameSpec.common([0.6, 0.4], [0.5, 0.5])
    a = AllocationMatrix([[0.25, 0.25], [0.5, 0.0]], [0.5, 0.5])
    grid = 21
    row = best_response(a, 0, g, grid=grid)
    assert row[1] >= 0.5 / grid - 1e-15
    assert payoff(a.with_row(0, row), 0, g) > 0.4


def test_best_response_beats_random_rows():
    rng = np.random.default_rng(7)
    for _ in range(20):
        m, n = 3, 4
        budgets = rng.dirichlet(np.ones(m))
        g = GameSpec(budgets, BeliefMatrix(rng.dirichlet(np.ones(n), size=m)))
        a = AllocationMatrix(budgets[:, None] * rng.dirichlet(np.ones(n), size=m), budgets)
        br = payoff(a.with_row(0, best_response(a, 0, g)), 0, g)
        for _ in range(200):
            trial = budgets[0] * rng.dirichlet(np.ones(n) * 0.5)
            assert payoff(a.with_row(0, trial), 0, g) <= br + 1e-12


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 5), st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_best_response_never_decreases_payoff(m, n, seed):
    rng = np.random.default_rng(seed)
    budgets = rng.dirichlet(np.ones(m))
    beliefs = rng.dirichlet(np.ones(n), size=m)
    sparse = rng.random((m, n)) < 0.3
    bids = budgets[:, None] * rng.dirichlet(np.ones(n), size=m)
    bids[sparse] = 0.0
    g = GameSpec(budgets, BeliefMatrix(beliefs))
    a = AllocationMatrix(bids, budgets)
    for i in range(m):
        row = best_response(a, i, g)
        assert row.sum() <= budgets[i] * (1 + 1e-12)
        assert np.all(row >= 0)
        assert payoff(a.with_row(i, row), i, g) >= payoff(a, i, g) - 1e-12


# ---- Nash solver --------------------------------------------------------------

def test_nash_flat_symmetric():
    g = GameSpec.common([0.5, 0.5], [0.5, 0.5])
    res = solve_nash(g)
    assert res.converged and res.residual < 1e-8
    np.testing.assert_allclose(res.allocation.bids, [[0.25, 0.25], [0.25, 0.25]])


def test_nash_skewed_symmetric():
    g = GameSpec.common([0.8, 0.2], [0.5, 0.5])
    res = solve_nash(g)
    assert res.converged
    np.testing.assert_allclose(res.allocation.bids, [[0.4, 0.1], [0.4, 0.1]], rtol=1e-4)


def test_nash_single_server_is_degenerate():
    g = GameSpec.common([0.7, 0.3], [1.0])
    res = solve_nash(g)
    assert res.degenerate and res.converged and res.residual == 0
    np.testing.assert_allclose(res.allocation.bids, [[0.7, 0.3]])


def brute_force_fixed_points(p, steps=200):
    """Pure fixed points of the 2x2 best-response map on a (steps+1) grid."""
    xs = np.linspace(0, 0.5, steps + 1)
    table = np.array([[grid_payoff(x, y, p, 0.5, 0.5) for x in xs] for y in xs])
    br = table.argmax(axis=1)  # br[iy] = best own index against opponent iy
    return xs, [(xs[i], xs[j]) for j in range(xs.size) for i in [br[j]] if br[i] == j]


@pytest.mark.parametrize("p", [(0.8, 0.2), (0.5, 0.5), (0.65, 0.35)])
def test_nash_matches_grid_fixed_point(p):
    xs, points = brute_force_fixed_points(p)
    res = solve_nash(GameSpec.common(p, [0.5, 0.5]))
    x0, x1 = res.allocation.bids[:, 0]
    step = xs[1]
    assert points, "grid map has no fixed point"
    assert any(abs(a - x0) <= step and abs(b - x1) <= step for a, b in points)


@pytest.mark.parametrize("p", [(0.7, 0.3), (0.5, 0.3, 0.2), (0.6, 0.25, 0.15)])
def test_symmetric_equilibrium_proportional_to_beliefs(p):
    m = 4
    res = solve_nash(GameSpec.common(p, np.full(m, 1 / m)))
    expected = np.outer(np.full(m, 1 / m), p)
    np.testing.assert_allclose(res.allocation.bids, expected, rtol=1e-4)


def test_nash_heterogeneous_certificate():
    rng = np.random.default_rng(2024)
    tol = 1e-9
    for trial in range(6):
        m, n = 3, 3
        budgets = rng.dirichlet(np.ones(m) * 3)
        beliefs = BeliefMatrix.noisy(rng.dirichlet(np.ones(n) * 2), m, 0.5, rng)
        g = GameSpec(budgets, beliefs)
        res = solve_nash(g, tol=tol, seed=trial)
        assert res.converged, res.residual
        a = res.allocation
        for i in range(m):
            base = payoff(a, i, g)
            for w in simplex_grid(n, 13):  # 105 points
                dev = payoff(a.with_row(i, budgets[i] * w), i, g)
                assert dev - base < 2 * tol


def test_nash_is_deterministic_in_seed():
    rng = np.random.default_rng(0)
    g = GameSpec(rng.dirichlet(np.ones(4)), BeliefMatrix(rng.dirichlet(np.ones(3), size=4)))
    a = solve_nash(g, seed=3)
    b = solve_nash(g, seed=3)
    np.testing.assert_array_equal(a.allocation.bids, b.allocation.bids)


def test_nash_reports_nonconvergence():
    rng = np.random.default_rng(1)
    g = GameSpec(rng.dirichlet(np.ones(4)), BeliefMatrix(rng.dirichlet(np.ones(5), size=4)))
    res = solve_nash(g, tol=1e-15, max_rounds=1)
    assert res.iterations == 1
    assert res.converged == (res.residual <= 1e-15)


# ---- greedy ratio rule --------------------------------------------------------

def test_greedy_picks_best_ratio():
    np.testing.assert_array_equal(greedy_ratio_allocation([0.6, 0.4], [0.5, 0.5], 1.0), [1, 0])


def test_greedy_splits_ties():
    np.testing.assert_array_equal(greedy_ratio_allocation([0.5, 0.5], [0.5, 0.5], 1.0),
                                  [0.5, 0.5])


def test_greedy_prefers_unserved_file():
    np.testing.assert_array_equal(greedy_ratio_allocation([0.1, 0.9], [0.5, 0.0], 0.2),
                                  [0.0, 0.2])


def test_greedy_sweeps_shrink_gap():
    m = 200
    p = np.array([0.4, 0.25, 0.15, 0.12, 0.08])
    g = GameSpec.common(p, np.full(m, 1 / m))
    history = greedy_rounds(AllocationMatrix.uniform(m, p.size), g, rounds=8, move_fraction=0.5)
    pbar = g.beliefs.beliefs.mean(axis=0)
    gaps = [np.abs(bandwidth_profile(a).pi - pbar).max() for a in history]
    assert all(b <= a + 1e-12 for a, b in zip(gaps, gaps[1:])), gaps
    assert gaps[-1] < 1e-3


# ---- diagnostics --------------------------------------------------------------

def test_consensus_single_server():
    g = GameSpec.common([1.0, 0.0], [1.0])
    a = AllocationMatrix([[1.0, 0.0]], [1.0])
    assert consensus_diagnostic(g, a) == 0.0


def test_consensus_symmetric_flat():
    g = GameSpec.common([0.5, 0.5], [0.5, 0.5])
    a = AllocationMatrix([[0.25, 0.25], [0.25, 0.25]], [0.5, 0.5])
    assert consensus_diagnostic(g, a) == pytest.approx(0.0, abs=1e-15)


def test_consensus_rejects_zero_payoff():
    g = GameSpec.common([0.5, 0.5], [0.5, 0.5])
    a = AllocationMatrix([[0.0, 0.0], [0.25, 0.25]], [0.5, 0.5])
    with pytest.raises(NonpositivePayoff):
        consensus_diagnostic(g, a)


def test_consensus_nash_versus_random(capsys):
    rng = np.random.default_rng(99)
    wins = 0
    games = 40
    for k in range(games):
        m, n = 3, 3
        budgets = rng.dirichlet(np.ones(m) * 3)
        g = GameSpec(budgets, BeliefMatrix.noisy(rng.dirichlet(np.ones(n) * 2), m, 0.3, rng))
        nash = solve_nash(g, seed=k).allocation
        rand = AllocationMatrix(budgets[:, None] * rng.dirichlet(np.ones(n), size=m), budgets)
        wins += consensus_diagnostic(g, nash) >= consensus_diagnostic(g, rand)
    with capsys.disabled():
        print(f"\nconsensus diagnostic: Nash >= random in {wins}/{games} games")
    assert wins >= games // 2


def test_payoff_gap_zero_at_symmetric_equilibrium():
    g = GameSpec.common([0.8, 0.2], [0.5, 0.5])
    assert payoff_gap(solve_nash(g).allocation, g) == pytest.approx(0, abs=1e-12)


def test_residual_zero_at_equilibrium():
    g = GameSpec.common([0.6, 0.3, 0.1], [0.2, 0.3, 0.5])
    a = AllocationMatrix(g.budgets[:, None] * g.beliefs.beliefs, g.budgets)
    assert equilibrium_residual(a, g) < 1e-12


def test_solve_nash_from_custom_start():
    g = GameSpec.common([0.6, 0.3, 0.1], [0.2, 0.3, 0.5])
    start = AllocationMatrix([[0.2, 0, 0], [0.3, 0, 0], [0, 0, 0.5]], [0.2, 0.3, 0.5])
    res = solve_nash(g, initial=start)
    assert res.converged and res.iterations > 1
    np.testing.assert_allclose(bandwidth_profile(res.allocation).pi, [0.6, 0.3, 0.1], atol=1e-6)
    with pytest.raises(ValueError):
        solve_nash(g, initial=AllocationMatrix.uniform(2, 3))
