"""Core market state: bandwidth bids, per-file bandwidth, demand, beliefs.

Servers and files are dense integer indices. All types are immutable once
built; the arrays they hold are flagged read-only.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

BUDGET_SLACK = 1e-12
NORMALIZATION_TOL = 1e-9
PROB_TOL = 1e-12


def _frozen(x, ndim):
    arr = np.array(x, dtype=float)
    if arr.ndim != ndim:
        raise ValueError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class AllocationMatrix:
    """Bids ``b[i, j]`` of server ``i`` on file ``j`` plus per-server budgets.

    Budgets must sum to one (total system bandwidth is the unit) and no
    server may bid more than its budget.
    """

    bids: np.ndarray
    budgets: np.ndarray

    def __post_init__(self):
        bids = _frozen(self.bids, 2)
        budgets = _frozen(self.budgets, 1)
        object.__setattr__(self, "bids", bids)
        object.__setattr__(self, "budgets", budgets)
        m, n = bids.shape
        if m < 1 or n < 1:
            raise ValueError("need at least one server and one file")
        if budgets.shape != (m,):
            raise ValueError(f"budgets shape {budgets.shape} != ({m},)")
        if not np.all(np.isfinite(bids)) or np.any(bids < 0):
            raise ValueError("bids must be finite and nonnegative")
        if np.any(budgets <= 0):
            raise ValueError("budgets must be positive")
        over = bids.sum(axis=1) - budgets
        if np.any(over > BUDGET_SLACK):
            i = int(np.argmax(over))
            raise ValueError(f"server {i} bids exceed its budget by {over[i]:.3g}")
        if abs(budgets.sum() - 1.0) > NORMALIZATION_TOL:
            raise ValueError(f"budgets sum to {budgets.sum()!r}, not 1")

    @property
    def m(self) -> int:
        return self.bids.shape[0]

    @property
    def n(self) -> int:
        return self.bids.shape[1]

    @classmethod
    def uniform(cls, m: int, n: int, budgets=None) -> "AllocationMatrix":
        """Every server spreads its budget evenly over all files."""
        budgets = np.full(m, 1.0 / m) if budgets is None else np.asarray(budgets, float)
        return cls(np.outer(budgets, np.full(n, 1.0 / n)), budgets)

    def with_row(self, server: int, row) -> "AllocationMatrix":
        bids = self.bids.copy()
        bids[server] = row
        return AllocationMatrix(bids, self.budgets)


@dataclass(frozen=True, eq=False)
class BandwidthProfile:
    """Bandwidth fraction ``pi[j]`` devoted to each file."""

    pi: np.ndarray

    def __post_init__(self):
        pi = _frozen(self.pi, 1)
        if np.any(pi < 0):
            raise ValueError("pi must be nonnegative")
        object.__setattr__(self, "pi", pi)

    @property
    def n(self) -> int:
        return self.pi.shape[0]

    def normalized(self) -> np.ndarray:
        total = self.pi.sum()
        if total <= 0:
            return np.zeros_like(self.pi)
        return self.pi / total


@dataclass(frozen=True, eq=False)
class DemandModel:
    """Per-file request rates; ``probs`` is the chance the next request is for j."""

    rates: np.ndarray
    probs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        rates = _frozen(self.rates, 1)
        if rates.size < 1 or not np.all(np.isfinite(rates)) or np.any(rates <= 0):
            raise ValueError("request rates must be finite and positive")
        object.__setattr__(self, "rates", rates)
        probs = rates / rates.sum()
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def total_rate(self) -> float:
        return float(self.rates.sum())

    @property
    def n(self) -> int:
        return self.rates.shape[0]

    @classmethod
    def from_probs(cls, probs, total_rate: float = 1.0) -> "DemandModel":
        probs = np.asarray(probs, dtype=float)
        return cls(total_rate * probs / probs.sum())


@dataclass(frozen=True, eq=False)
class BeliefMatrix:
    """Row ``i`` is server i's subjective distribution over the next request."""

    beliefs: np.ndarray

    def __post_init__(self):
        beliefs = _frozen(self.beliefs, 2)
        if np.any(beliefs < 0) or np.any(beliefs > 1):
            raise ValueError("beliefs must lie in [0, 1]")
        if np.any(np.abs(beliefs.sum(axis=1) - 1.0) > PROB_TOL):
            raise ValueError("each belief row must sum to 1")
        object.__setattr__(self, "beliefs", beliefs)

    @classmethod
    def common(cls, probs, m: int) -> "BeliefMatrix":
        """All ``m`` servers share the same beliefs."""
        probs = np.asarray(probs, dtype=float)
        return cls(np.tile(probs / probs.sum(), (m, 1)))

    @classmethod
    def noisy(cls, probs, m: int, noise: float, rng: np.random.Generator) -> "BeliefMatrix":
        """Beliefs ``p * exp(noise * z)`` renormalized, z standard normal.

        Multiplicative noise is symmetric in log space and keeps every
        belief positive.
        """
        probs = np.asarray(probs, dtype=float)
        raw = probs[None, :] * np.exp(noise * rng.standard_normal((m, probs.size)))
        return cls(raw / raw.sum(axis=1, keepdims=True))

    @property
    def m(self) -> int:
        return self.beliefs.shape[0]


def bandwidth_profile(a) -> BandwidthProfile:
    """Column sums of the bid grid. Accepts an AllocationMatrix or a raw grid."""
    bids = a.bids if isinstance(a, AllocationMatrix) else np.asarray(a, dtype=float)
    return BandwidthProfile(bids.sum(axis=0))


def demand_from_zipf(n: int, exponent: float, total_rate: float = 1.0) -> DemandModel:
    """Rates proportional to ``rank ** -exponent``, scaled to ``total_rate``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if exponent < 0:
        raise ValueError("exponent must be >= 0")
    if total_rate <= 0:
        raise ValueError("total_rate must be positive")
    weights = np.arange(1, n + 1, dtype=float) ** -float(exponent)
    return DemandModel(total_rate * weights / weights.sum())
