"""Parimutuel payouts and discounted utility.

Each download pays a unit fee, split among the servers of the requested
file in proportion to their bandwidth on it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ZeroBandwidth
from .market import AllocationMatrix, DemandModel, bandwidth_profile


@dataclass(frozen=True)
class DiscountParams:
    delta: float

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")


@dataclass(frozen=True, eq=False)
class RewardLedger:
    """Raw and discounted payouts per server, and requests served per file."""

    cumulative: np.ndarray
    discounted: np.ndarray
    requests_served: np.ndarray

    @classmethod
    def empty(cls, m: int, n: int) -> "RewardLedger":
        return cls(np.zeros(m), np.zeros(m), np.zeros(n, dtype=np.int64))

    @property
    def total_requests(self) -> int:
        return int(self.requests_served.sum())


def file_shares(a: AllocationMatrix, file: int) -> np.ndarray:
    """Vector of every server's share of ``file``; sums to one."""
    column = a.bids[:, file]
    pi = column.sum()
    if pi <= 0:
        raise ZeroBandwidth(file)
    return column / pi


def proportional_share(a: AllocationMatrix, server: int, file: int) -> float:
    """Fraction of a download of ``file`` delivered (and paid) by ``server``."""
    return float(file_shares(a, file)[server])


def settle_request(ledger: RewardLedger, a: AllocationMatrix, file: int,
                   time: float, d: DiscountParams) -> RewardLedger:
    """Pay out one unit fee for a request of ``file`` at absolute ``time``."""
    shares = file_shares(a, file)
    served = ledger.requests_served.copy()
    served[file] += 1
    return RewardLedger(
        ledger.cumulative + shares,
        ledger.discounted + shares * math.exp(-d.delta * time),
        served,
    )


def per_file_utility_factor(rate: float, d: DiscountParams) -> float:
    """Expected discounted number of requests for a file: ``rate / delta``."""
    if rate < 0:
        raise ValueError("rate must be nonnegative")
    return rate / d.delta


def expected_utility(a: AllocationMatrix, server: int, dm: DemandModel,
                     d: DiscountParams) -> float:
    """Discounted expected income of ``server`` under static bids.

    Files the server does not bid on contribute nothing, even if nobody
    serves them.
    """
    pi = bandwidth_profile(a).pi
    row = a.bids[server]
    held = row > 0
    return dm.total_rate / d.delta * float(np.sum(dm.probs[held] * row[held] / pi[held]))


def monte_carlo_utility_factor(rate: float, d: DiscountParams, paths: int,
                               horizon: float | None = None, seed: int = 0,
                               block: int = 10_000) -> tuple[float, float]:
    """Simulate the sum of ``exp(-delta * t)`` over Poisson request times.

    Paths are processed in blocks; block ``k`` draws from the child seed
    ``SeedSequence(seed).spawn(...)[k]``, so the result does not depend on
    how blocks are scheduled. Inter-arrival times come from inverse-CDF
    sampling of seeded uniforms. Returns ``(mean, stderr)``.
    """
    if paths < 1:
        raise ValueError("paths must be >= 1")
    if rate <= 0:
        raise ValueError("rate must be positive")
    if horizon is None:
        horizon = 20.0 / d.delta
    if math.exp(-d.delta * horizon) >= 1e-6:
        raise ValueError("horizon too short: exp(-delta*horizon) must be < 1e-6")

    nblocks = -(-paths // block)
    children = np.random.SeedSequence(seed).spawn(nblocks)
    totals = np.empty(paths)
    for k, child in enumerate(children):
        lo, hi = k * block, min(paths, (k + 1) * block)
        totals[lo:hi] = _discounted_arrivals(rate, d.delta, horizon, hi - lo,
                                             np.random.default_rng(child))
    mean = float(totals.mean())
    stderr = float(totals.std(ddof=1) / math.sqrt(paths)) if paths > 1 else float("nan")
    return mean, stderr


def _discounted_arrivals(rate, delta, horizon, count, rng):
    t = np.zeros(count)
    acc = np.zeros(count)
    alive = np.arange(count)
    while alive.size:
        u = rng.random(alive.size)
        t[alive] += -np.log1p(-u) / rate
        arrived = t[alive] < horizon
        alive = alive[arrived]
        acc[alive] += np.exp(-delta * t[alive])
    return acc
