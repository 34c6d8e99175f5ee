"""Static allocation game: each server splits its budget across files and is
paid ``sum_j p_ij * b_ij / pi_j``.

Best responses are computed exactly. Against fixed opponent bandwidth
``o_j`` the payoff is concave in the server's own bids and the first-order
conditions give ``x_j = sqrt(p_j * o_j / mu) - o_j`` on the active set, so
the optimum is a water-filling problem with a closed-form multiplier once
the active set is known.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGame, NonpositivePayoff
from .market import AllocationMatrix, BandwidthProfile, BeliefMatrix

TIE_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class GameSpec:
    budgets: np.ndarray
    beliefs: BeliefMatrix

    def __post_init__(self):
        budgets = np.array(self.budgets, dtype=float)
        if budgets.ndim != 1 or np.any(budgets <= 0):
            raise ValueError("budgets must be a vector of positive reals")
        if budgets.shape[0] != self.beliefs.m:
            raise ValueError("one belief row per server is required")
        budgets.setflags(write=False)
        object.__setattr__(self, "budgets", budgets)

    @property
    def m(self) -> int:
        return self.budgets.shape[0]

    @property
    def n(self) -> int:
        return self.beliefs.beliefs.shape[1]

    @classmethod
    def common(cls, probs, budgets) -> "GameSpec":
        budgets = np.asarray(budgets, dtype=float)
        return cls(budgets, BeliefMatrix.common(probs, budgets.size))


@dataclass(frozen=True, eq=False)
class EquilibriumResult:
    allocation: AllocationMatrix
    iterations: int
    residual: float
    converged: bool
    degenerate: bool = False


def payoff(a: AllocationMatrix, server: int, g: GameSpec) -> float:
    """Share of the next request ``server`` expects to be paid for."""
    return _row_payoff(a.bids[server], a.bids.sum(axis=0) - a.bids[server],
                       g.beliefs.beliefs[server])


def _row_payoff(row, others, beliefs):
    held = row > 0
    return float(np.sum(beliefs[held] * row[held] / (row[held] + others[held])))


def _water_fill(p, o, budget):
    """Maximize sum p_j x_j / (x_j + o_j) s.t. sum x_j = budget, with o_j > 0."""
    ratio = p / o
    order = np.argsort(-ratio, kind="stable")
    root_po = np.sqrt(p * o)
    s = 0.0
    osum = 0.0
    root_mu = 0.0
    k = 0
    for k, j in enumerate(order):
        s += root_po[j]
        osum += o[j]
        root_mu = s / (budget + osum)
        nxt = order[k + 1] if k + 1 < order.size else None
        if nxt is None or ratio[nxt] <= root_mu * root_mu:
            break
    active = order[: k + 1]
    x = np.zeros_like(p)
    x[active] = np.maximum(root_po[active] / root_mu - o[active], 0.0)
    # remove rounding drift so the row never exceeds the budget
    total = x.sum()
    if total > 0:
        x *= budget / total
    return x


def best_response(a: AllocationMatrix, server: int, g: GameSpec,
                  grid: int = 21) -> np.ndarray:
    """Payoff-maximizing row for ``server`` against the other servers' bids.

    Files with positive belief that nobody else serves pay their whole
    belief for any positive bid; such files get a total reserve of
    ``budget / grid`` split evenly, and the rest of the budget is
    water-filled over contested files. The current row is kept if it
    already does at least as well, so payoff never decreases.
    """
    if grid < 2:
        raise ValueError("grid must be >= 2")
    p = g.beliefs.beliefs[server]
    budget = float(g.budgets[server])
    current = a.bids[server]
    others = a.bids.sum(axis=0) - current
    others[others < 0] = 0.0

    wanted = p > 0
    if not wanted.any():
        raise DegenerateGame(f"server {server} has no file with positive belief")
    contested = wanted & (others > 0)
    open_files = wanted & ~contested

    if not contested.any():
        # payoff depends on the support only; any full-support split is optimal
        row = budget * p
    else:
        row = np.zeros_like(p)
        reserve = budget / grid if open_files.any() else 0.0
        if reserve:
            row[open_files] = reserve / open_files.sum()
        idx = np.flatnonzero(contested)
        row[idx] = _water_fill(p[idx], others[idx], budget - reserve)

    if _row_payoff(current, others, p) >= _row_payoff(row, others, p):
        return current.copy()
    return row


def equilibrium_residual(a: AllocationMatrix, g: GameSpec, grid: int = 21) -> float:
    """Largest payoff gain any server gets from a unilateral best response."""
    if a.m == 1:
        return 0.0
    gains = [payoff(a.with_row(i, best_response(a, i, g, grid)), i, g) - payoff(a, i, g)
             for i in range(a.m)]
    return max(0.0, max(gains))


def solve_nash(g: GameSpec, tol: float = 1e-9, max_rounds: int = 500, seed: int = 0,
               grid: int = 21, initial: AllocationMatrix | None = None) -> EquilibriumResult:
    """Round-robin best-response iteration, by default from ``b_ij = b_i * p_ij``.

    ``initial`` overrides the starting point; its budgets must match ``g``.

    The server order is reshuffled each round from ``seed``. If a round
    fails to shrink the largest gain, later moves are damped (the payoff is
    concave in own bids, so a partial step still improves). Returns the
    last iterate with ``converged=False`` if ``max_rounds`` is exhausted.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    start = AllocationMatrix(g.budgets[:, None] * g.beliefs.beliefs, g.budgets)
    if initial is not None:
        if initial.bids.shape != (g.m, g.n) or not np.allclose(initial.budgets, g.budgets):
            raise ValueError("initial allocation does not match the game")
        start = initial
    if g.m == 1:
        return EquilibriumResult(start, 0, 0.0, True, degenerate=True)

    rng = np.random.default_rng(seed)
    bids = start.bids.copy()
    step = 1.0
    prev_gain = math.inf
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        gain = 0.0
        for i in rng.permutation(g.m):
            a = AllocationMatrix(bids, g.budgets)
            target = best_response(a, i, g, grid)
            row = (1 - step) * bids[i] + step * target
            before = payoff(a, i, g)
            bids[i] = row
            gain = max(gain, payoff(AllocationMatrix(bids, g.budgets), i, g) - before)
        if gain <= tol / 10:
            break
        if gain >= prev_gain:
            step = max(step / 2, 1 / 64)
        prev_gain = gain

    final = AllocationMatrix(bids, g.budgets)
    residual = equilibrium_residual(final, g, grid)
    return EquilibriumResult(final, rounds, residual, residual <= tol)


def greedy_ratio_allocation(beliefs_row, pi, budget: float) -> np.ndarray:
    """Put the whole budget on the file(s) with the largest belief / pi ratio.

    A file with ``pi == 0`` and positive belief has an infinite ratio.
    Ties are split equally.
    """
    p = np.asarray(beliefs_row, dtype=float)
    pi = pi.pi if isinstance(pi, BandwidthProfile) else np.asarray(pi, dtype=float)
    if not (np.any(pi > 0) or np.any(p > 0)):
        raise ValueError("need a served file or a positive belief")
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(pi > 0, p / np.where(pi > 0, pi, 1.0),
                         np.where(p > 0, np.inf, 0.0))
    best = ratio.max()
    if np.isinf(best):
        winners = np.isinf(ratio)
    else:
        winners = ratio >= best * (1 - TIE_RTOL)
    row = np.zeros_like(p)
    row[winners] = budget / winners.sum()
    return row


def greedy_rounds(a: AllocationMatrix, g: GameSpec, rounds: int,
                  move_fraction: float = 1.0) -> list[AllocationMatrix]:
    """Sequential greedy sweeps: each server in turn moves ``move_fraction``
    of its budget onto its best-ratio file given the live profile.

    Returns the allocation after each sweep (first entry is ``a``).
    """
    bids = a.bids.copy()
    history = [a]
    for _ in range(rounds):
        for i in range(a.m):
            pi = bids.sum(axis=0)
            target = greedy_ratio_allocation(g.beliefs.beliefs[i], pi, g.budgets[i])
            bids[i] = (1 - move_fraction) * bids[i] + move_fraction * target
        history.append(AllocationMatrix(bids, a.budgets))
    return history


def consensus_diagnostic(g: GameSpec, a: AllocationMatrix) -> float:
    """Budget-weighted log payoff per unit budget, ``sum_i b_i log(payoff_i / b_i)``."""
    total = 0.0
    for i in range(g.m):
        u = payoff(a, i, g)
        if u <= 0:
            raise NonpositivePayoff(i)
        total += g.budgets[i] * math.log(u / g.budgets[i])
    return float(total)


def payoff_gap(a: AllocationMatrix, g: GameSpec) -> float:
    """Spread of payoff per unit budget across servers (envy diagnostic)."""
    per_unit = np.array([payoff(a, i, g) / g.budgets[i] for i in range(g.m)])
    return float(per_unit.max() - per_unit.min())
