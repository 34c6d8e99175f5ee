"""Event-driven market simulation, the new-file bootstrap model, and a
download-delay proxy.

A run interleaves three event streams on one clock:

* requests: a single Poisson stream at the total rate, each labelled with
  file j with probability p_j (superposition of per-file streams);
* broadcasts: the current bandwidth profile is published every
  ``broadcast_interval``;
* reallocations: each server gets opportunities at ``reallocation_rate``
  and acts on the last *published* profile, not the live one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import DomainError, Unstable, ZeroBandwidth
from .market import AllocationMatrix, BandwidthProfile, DemandModel
from .equilibrium import greedy_ratio_allocation
from .rewards import DiscountParams, RewardLedger, settle_request


@dataclass(frozen=True)
class RationalGreedy:
    """Move ``move_fraction`` of the budget onto the best belief/pi file.

    ``beliefs=None`` means the server knows the true request probabilities.
    """

    beliefs: np.ndarray | None = None
    move_fraction: float = 1.0


@dataclass(frozen=True)
class Lazy:
    """Never reallocates."""


@dataclass(frozen=True)
class Imitator:
    """Copies a uniformly chosen other server's allocation, rescaled."""


Policy = Union[RationalGreedy, Lazy, Imitator]

EVENT_BROADCAST = "broadcast"
EVENT_REQUEST = "request"
EVENT_DROP = "drop"
EVENT_REALLOCATE = "reallocate"


@dataclass
class SimConfig:
    demand: DemandModel
    horizon: float
    broadcast_interval: float
    policies: list
    reallocation_rate: float
    seed: int = 0
    initial: AllocationMatrix | None = None
    discount: DiscountParams = field(default_factory=lambda: DiscountParams(1.0))

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if not self.broadcast_interval > 0:
            raise ValueError("broadcast_interval must be positive")
        if self.reallocation_rate < 0:
            raise ValueError("reallocation_rate must be >= 0")
        if not self.policies:
            raise ValueError("need at least one server policy")
        if self.initial is not None:
            if self.initial.m != len(self.policies):
                raise ValueError("one policy per server is required")
            if self.initial.n != self.demand.n:
                raise ValueError("allocation and demand disagree on file count")
        for pol in self.policies:
            if isinstance(pol, RationalGreedy):
                if not 0 < pol.move_fraction <= 1:
                    raise ValueError("move_fraction must be in (0, 1]")
                if pol.beliefs is not None and len(pol.beliefs) != self.demand.n:
                    raise ValueError("belief row has the wrong length")
            elif not isinstance(pol, (Lazy, Imitator)):
                raise TypeError(f"unknown policy {pol!r}")

    @property
    def m(self) -> int:
        return len(self.policies)


@dataclass
class SimTrace:
    """Everything a run produced.

    ``events`` holds ``(time, event_type, file, server, pi_gap)`` rows with
    -1 for a field that does not apply; ``pi_gap`` is the gap as of the
    last broadcast.
    """

    events: list
    broadcast_times: np.ndarray
    pi_snapshots: list
    gap_series: np.ndarray
    ledger: RewardLedger
    final: AllocationMatrix
    arrivals: int
    settled: int
    dropped: int

    @property
    def times(self) -> np.ndarray:
        return np.array([e[0] for e in self.events])


def efficiency_gap(pi, dm: DemandModel) -> float:
    """``max_j |pi_j - p_j|`` after renormalizing pi to sum to one."""
    prof = pi if isinstance(pi, BandwidthProfile) else BandwidthProfile(pi)
    return float(np.max(np.abs(prof.normalized() - dm.probs)))


def run_market(cfg: SimConfig, record_events: bool = True) -> SimTrace:
    """Simulate the adaptive market up to ``cfg.horizon``.

    Deterministic in ``cfg.seed``: requests, reallocation timing and
    imitation choices each draw from their own child stream of
    ``SeedSequence(cfg.seed)``. Requests for unserved files are dropped
    and tallied.
    """
    m, n = cfg.m, cfg.demand.n
    alloc = cfg.initial if cfg.initial is not None else AllocationMatrix.uniform(m, n)
    bids = alloc.bids.copy()
    budgets = alloc.budgets
    probs_cdf = np.cumsum(cfg.demand.probs)
    probs_cdf[-1] = 1.0
    true_beliefs = cfg.demand.probs

    req_rng, realloc_rng, policy_rng = (
        np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(3))
    lam = cfg.demand.total_rate
    realloc_total = cfg.reallocation_rate * m

    ledger = RewardLedger.empty(m, n)
    events = []
    b_times, snapshots, gaps = [], [], []
    published = bids.sum(axis=0)
    targets = {}  # greedy targets per unit budget, valid until the next broadcast
    gap = math.nan
    arrivals = settled = dropped = 0

    next_broadcast = 0.0
    k_broadcast = 0
    next_request = req_rng.exponential(1 / lam)
    next_realloc = realloc_rng.exponential(1 / realloc_total) if realloc_total > 0 else math.inf

    while True:
        t = min(next_broadcast, next_request, next_realloc)
        if t > cfg.horizon:
            break
        if t == next_broadcast:
            published = bids.sum(axis=0)
            targets.clear()
            prof = BandwidthProfile(published)
            gap = efficiency_gap(prof, cfg.demand)
            b_times.append(t)
            snapshots.append(prof)
            gaps.append(gap)
            if record_events:
                events.append((t, EVENT_BROADCAST, -1, -1, gap))
            k_broadcast += 1
            next_broadcast = k_broadcast * cfg.broadcast_interval
        elif t == next_request:
            arrivals += 1
            j = min(int(np.searchsorted(probs_cdf, req_rng.random(), side="right")), n - 1)
            if alloc is None:
                alloc = AllocationMatrix(bids, budgets)
            try:
                ledger = settle_request(ledger, alloc, j, t, cfg.discount)
            except ZeroBandwidth:
                dropped += 1
                kind = EVENT_DROP
            else:
                settled += 1
                kind = EVENT_REQUEST
            if record_events:
                events.append((t, kind, j, -1, gap))
            next_request = t + req_rng.exponential(1 / lam)
        else:
            i = int(realloc_rng.integers(m))
            pol = cfg.policies[i]
            row = _reallocate(pol, i, bids, budgets, published, true_beliefs, policy_rng,
                              targets)
            if row is not None:
                bids[i] = row
                alloc = None
            if record_events:
                events.append((t, EVENT_REALLOCATE, -1, i, gap))
            next_realloc = t + realloc_rng.exponential(1 / realloc_total)

    return SimTrace(
        events=events,
        broadcast_times=np.array(b_times),
        pi_snapshots=snapshots,
        gap_series=np.array(gaps),
        ledger=ledger,
        final=AllocationMatrix(bids, budgets),
        arrivals=arrivals,
        settled=settled,
        dropped=dropped,
    )


def _reallocate(pol, i, bids, budgets, published, true_beliefs, rng, targets):
    if isinstance(pol, Lazy):
        return None
    if isinstance(pol, Imitator):
        m = bids.shape[0]
        if m < 2:
            return None
        k = int(rng.integers(m - 1))
        k += k >= i
        total = bids[k].sum()
        if total <= 0:
            return None
        return bids[k] / total * budgets[i]
    key = -1 if pol.beliefs is None else i
    unit = targets.get(key)
    if unit is None:
        beliefs = true_beliefs if pol.beliefs is None else pol.beliefs
        unit = targets[key] = greedy_ratio_allocation(beliefs, published, 1.0)
    f = pol.move_fraction
    row = (1 - f) * bids[i] + f * budgets[i] * unit
    # keep the row inside the budget after floating-point mixing
    s = row.sum()
    if s > budgets[i]:
        row *= budgets[i] / s
    return row


@dataclass(frozen=True)
class BootstrapConfig:
    p_j: float
    pi0: float
    dt: float
    method: str = "rk4"

    def __post_init__(self):
        if not 0 < self.pi0 <= self.p_j <= 1:
            raise ValueError("need 0 < pi0 <= p_j <= 1")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.method not in ("rk4", "euler"):
            raise ValueError("method must be 'rk4' or 'euler'")


def bootstrap_trajectory(cfg: BootstrapConfig):
    """Integrate ``d pi / dt = pi`` from ``pi0`` until pi reaches ``p_j``.

    Returns ``(times, pi, t_hit)``; the last sample is capped at ``p_j``.
    Classical RK4 is the default. Explicit Euler's hitting time is late by
    about ``T * dt / 2``, which exceeds ``2 * dt`` once ``T > 4``.
    """
    dt = cfg.dt
    if cfg.method == "rk4":
        growth = 1 + dt + dt**2 / 2 + dt**3 / 6 + dt**4 / 24
    else:
        growth = 1 + dt
    values = [cfg.pi0]
    pi = cfg.pi0
    k = 0
    while pi < cfg.p_j:
        k += 1
        pi = min(cfg.p_j, values[-1] * growth)
        values.append(pi)
    times = np.arange(k + 1) * dt
    return times, np.array(values), float(times[-1])


def bootstrap_time(p_j: float, pi0: float) -> float:
    """Time for a new file's bandwidth to grow from ``pi0`` to ``p_j``."""
    if not 0 < pi0 <= p_j:
        raise DomainError(f"need 0 < pi0 <= p_j, got pi0={pi0}, p_j={p_j}")
    return math.log(p_j / pi0)


def download_time_proxy(pi, dm: DemandModel, capacity: float) -> float:
    """Mean-delay proxy ``sum_j p_j / (capacity * pi_j - rate_j)``.

    Each file is treated as an M/M/1 queue served at ``capacity * pi_j``.
    Raises Unstable when some file's service rate does not exceed its
    request rate.
    """
    pi = pi.pi if isinstance(pi, BandwidthProfile) else np.asarray(pi, dtype=float)
    slack = capacity * pi - dm.rates
    bad = np.flatnonzero(slack <= 0)
    if bad.size:
        raise Unstable(int(bad[0]))
    return float(np.sum(dm.probs / slack))


def gap_hitting_time(trace: SimTrace, threshold: float) -> float:
    """First broadcast time at which the gap is below ``threshold`` (inf if never)."""
    hit = np.flatnonzero(trace.gap_series < threshold)
    return float(trace.broadcast_times[hit[0]]) if hit.size else math.inf

