"""Two-file arrival process with rational and imitating servers.

Servers arrive one at a time. With probability ``alpha`` an arrival is
rational and serves file A with probability ``p`` (a Bernoulli belief);
otherwise it copies a random existing server and serves A with probability
``pi``, the current fraction serving A. The urn starts with ``seed_a``
A-servers and ``seed_b`` B-servers so ``pi`` is defined from the start.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import Censored

BAND = 0.05


@dataclass(frozen=True)
class PolyaState:
    alpha: float
    p: float
    t: int = 0
    count_a: int = 0
    seed_a: int = 1
    seed_b: int = 1

    def __post_init__(self):
        if not 0 <= self.alpha <= 1:
            raise ValueError("alpha must be in [0, 1]")
        if not 0 <= self.p <= 1:
            raise ValueError("p must be in [0, 1]")
        if self.seed_a < 0 or self.seed_b < 0 or self.seed_a + self.seed_b < 1:
            raise ValueError("need a nonempty initial urn")
        if not 0 <= self.count_a <= self.t:
            raise ValueError("count_a must be between 0 and t")

    @property
    def pi(self) -> float:
        return (self.count_a + self.seed_a) / (self.t + self.seed_a + self.seed_b)


def arrival_probability(s: PolyaState) -> float:
    """Chance the next server serves file A: ``alpha*p + (1-alpha)*pi``."""
    return s.alpha * s.p + (1 - s.alpha) * s.pi


def step(s: PolyaState, u: float) -> PolyaState:
    """Advance one arrival; it serves A iff ``u < arrival_probability(s)``."""
    if not 0 <= u < 1:
        raise ValueError("u must be in [0, 1)")
    serves_a = u < arrival_probability(s)
    return replace(s, t=s.t + 1, count_a=s.count_a + int(serves_a))


@dataclass
class EnsembleStats:
    alpha: float
    p: float
    arrivals: int
    final_pi: np.ndarray
    first_passage: np.ndarray  # -1 where the run never entered the band

    @property
    def mean(self) -> float:
        return float(self.final_pi.mean())

    @property
    def variance(self) -> float:
        return float(self.final_pi.var())

    @property
    def reached(self) -> int:
        return int(np.sum(self.first_passage >= 0))


def run_uniforms(seed: int, runs: int, arrivals: int) -> np.ndarray:
    """``runs x arrivals`` uniforms; row ``r`` comes from child seed ``r``.

    A run's draws depend only on ``(seed, r)``, so runs can be generated in
    any order or split across workers.
    """
    children = np.random.SeedSequence(seed).spawn(runs)
    return np.stack([np.random.default_rng(c).random(arrivals) for c in children])


def simulate_paths(alpha: float, p: float, uniforms: np.ndarray,
                   seed_a: int = 1, seed_b: int = 1) -> np.ndarray:
    """Vectorized ``step`` over independent runs.

    Returns ``pi`` after each arrival, shape ``(runs, arrivals + 1)``
    including the initial value in column 0.
    """
    runs, arrivals = uniforms.shape
    count = np.full(runs, float(seed_a))
    total = float(seed_a + seed_b)
    out = np.empty((runs, arrivals + 1))
    out[:, 0] = count / total
    for t in range(arrivals):
        q = alpha * p + (1 - alpha) * count / (total + t)
        count += uniforms[:, t] < q
        out[:, t + 1] = count / (total + t + 1)
    return out


def first_passage(paths: np.ndarray, p: float, band: float = BAND) -> np.ndarray:
    """Arrival count at which ``|pi - p| < band`` first holds; -1 if never."""
    inside = np.abs(paths - p) < band
    hit = inside.argmax(axis=1)
    return np.where(inside.any(axis=1), hit, -1)


def run_ensemble(alpha: float, p: float, arrivals: int, runs: int, seed: int,
                 seed_a: int = 1, seed_b: int = 1, band: float = BAND) -> EnsembleStats:
    if runs < 1 or arrivals < 1:
        raise ValueError("runs and arrivals must be >= 1")
    PolyaState(alpha, p, seed_a=seed_a, seed_b=seed_b)  # validates parameters
    paths = simulate_paths(alpha, p, run_uniforms(seed, runs, arrivals), seed_a, seed_b)
    return EnsembleStats(alpha, p, arrivals, paths[:, -1].copy(),
                         first_passage(paths, p, band))


def convergence_time_curve(alphas, p: float, arrivals: int, runs: int, seed: int,
                           band: float = BAND,
                           on_censored: str = "raise") -> list[tuple[float, float]]:
    """Median first-passage time for each alpha.

    Every alpha reuses the same uniforms (common random numbers), which
    makes the comparison across alpha much less noisy. When fewer than half
    the runs reach the band the median is only known to exceed
    ``arrivals``: ``on_censored="raise"`` raises Censored, ``"inf"``
    records it as ``inf``.
    """
    if on_censored not in ("raise", "inf"):
        raise ValueError("on_censored must be 'raise' or 'inf'")
    if any(a <= 0 for a in alphas):
        raise ValueError("every alpha must be positive")
    uniforms = run_uniforms(seed, runs, arrivals)
    curve = []
    for alpha in alphas:
        fp = first_passage(simulate_paths(alpha, p, uniforms), p, band)
        reached = int(np.sum(fp >= 0))
        if 2 * reached < runs and on_censored == "raise":
            raise Censored(alpha, reached, runs)
        # censored runs count as +inf, which the median tolerates below 50%
        curve.append((float(alpha), float(np.median(np.where(fp >= 0, fp, np.inf)))))
    return curve


def fit_exponential_slowdown(curve) -> tuple[float, float]:
    """Least-squares fit of ``log(median time)`` against ``1/alpha``.

    Returns ``(slope, intercept)``; censored points are left out and zero
    medians are clipped to one.
    """
    finite = [(a, t) for a, t in curve if math.isfinite(t)]
    if len(finite) < 2:
        return math.nan, math.nan
    x = np.array([1 / a for a, _ in finite])
    y = np.log(np.maximum([t for _, t in finite], 1.0))
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(intercept)


def expected_gap(alpha: float, p: float, t: int, seed_a: int = 1, seed_b: int = 1) -> float:
    """Exact ``E[pi(t) - p]`` from the one-step contraction
    ``E[pi(t+1) - p | pi(t)] = (1 - alpha / (k + t + 1)) (pi(t) - p)``
    with ``k = seed_a + seed_b``.
    """
    k = seed_a + seed_b
    gap = seed_a / k - p
    for s in range(t):
        gap *= 1 - alpha / (k + s + 1)
    return gap


def enumerate_distribution(alpha: float, p: float, steps: int,
                           seed_a: int = 1, seed_b: int = 1) -> dict[int, float]:
    """Exact law of ``count_a`` after ``steps`` arrivals, by walking every
    leaf of the 2**steps outcome tree.
    """
    dist: dict[int, float] = {}

    def walk(s: PolyaState, prob: float, depth: int):
        if depth == steps:
            dist[s.count_a] = dist.get(s.count_a, 0.0) + prob
            return
        q = arrival_probability(s)
        walk(replace(s, t=s.t + 1, count_a=s.count_a + 1), prob * q, depth + 1)
        walk(replace(s, t=s.t + 1), prob * (1 - q), depth + 1)

    walk(PolyaState(alpha, p, seed_a=seed_a, seed_b=seed_b), 1.0, 0)
    return dist


def is_non_increasing(curve) -> bool:
    """Medians are non-increasing in alpha (curve sorted by alpha)."""
    ordered = sorted(curve)
    return all(b[1] <= a[1] for a, b in zip(ordered, ordered[1:])
               if not (math.isinf(a[1]) and math.isinf(b[1])))
