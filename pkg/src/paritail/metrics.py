"""Long-tail and calibration statistics over bandwidth profiles."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .market import BandwidthProfile

HEAD_FRACTION = 0.1


@dataclass(frozen=True)
class RankFit:
    slope: float
    intercept: float
    residual: float


@dataclass(frozen=True)
class TailReport:
    coverage: float
    head_share: float
    rank_fit: RankFit

    def to_dict(self) -> dict:
        return json_safe(asdict(self))


@dataclass(frozen=True)
class BiasCurve:
    """``bins`` rows are ``(midpoint, mean request share, file count)``.

    ``calibration_slope`` regresses each file's request share on its
    average bandwidth share: 1 is calibrated, above 1 means favorites are
    requested more than their odds imply (favorite-longshot bias).
    """

    bins: list
    calibration_slope: float

    def to_dict(self) -> dict:
        return json_safe({"bins": [list(b) for b in self.bins],
                           "calibration_slope": self.calibration_slope})


def json_safe(obj):
    if isinstance(obj, dict):
        return {k: json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_safe(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def _as_array(pi):
    return pi.pi if isinstance(pi, BandwidthProfile) else np.asarray(pi, dtype=float)


def rank_fit(pi) -> RankFit:
    """Least squares of ``log pi`` on ``log rank`` over files with pi > 0."""
    values = np.sort(_as_array(pi))[::-1]
    values = values[values > 0]
    if values.size < 2:
        return RankFit(math.nan, math.nan, math.nan)
    x = np.log(np.arange(1, values.size + 1))
    y = np.log(values)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return RankFit(float(slope), float(intercept), float(np.sqrt(np.mean(resid**2))))


def tail_report(pi) -> TailReport:
    values = _as_array(pi)
    n = values.size
    if n < 2:
        raise ValueError("need at least two files")
    total = values.sum()
    k = max(1, math.ceil(HEAD_FRACTION * n))
    head = np.sort(values)[::-1][:k].sum()
    return TailReport(
        coverage=float(np.mean(values > 0)),
        head_share=float(head / total) if total > 0 else 0.0,
        rank_fit=rank_fit(values),
    )


def bias_curve(pi_snapshots, request_counts, bins: int) -> BiasCurve:
    """Bucket files by time-averaged bandwidth share and average the
    empirical request share within each bucket.

    Buckets split ``[min, max]`` of the averaged shares into equal widths;
    empty buckets report a mean share of 0 with count 0.
    """
    counts = np.asarray(request_counts, dtype=float)
    total = counts.sum()
    if bins < 1:
        raise ValueError("bins must be >= 1")
    if total < bins:
        raise ValueError("need at least as many requests as bins")
    snaps = [_as_array(s) for s in pi_snapshots]
    if not snaps:
        raise ValueError("need at least one snapshot")
    avg = np.mean([s / s.sum() for s in snaps], axis=0)
    shares = counts / total

    lo, hi = float(avg.min()), float(avg.max())
    if hi <= lo:
        hi = lo + 1e-12
    edges = np.linspace(lo, hi, bins + 1)
    which = np.clip(np.searchsorted(edges, avg, side="right") - 1, 0, bins - 1)
    rows = []
    for b in range(bins):
        mask = which == b
        c = int(mask.sum())
        mean = float(shares[mask].mean()) if c else 0.0
        rows.append((float((edges[b] + edges[b + 1]) / 2), mean, c))

    if np.ptp(avg) > 0:
        slope = float(np.polyfit(avg, shares, 1)[0])
    else:
        slope = math.nan
    return BiasCurve(rows, slope)
