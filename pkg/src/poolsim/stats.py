"""Risk statistics over loss samples: empirical CDFs, VaR quantiles,
two-sample Kolmogorov-Smirnov distances, Spearman rank correlation and
histograms.

VaR is the plain order statistic (no interpolation): monotone in the level
by construction and unambiguous on the lattice-valued losses the finite
simulator produces.  Spearman uses midranks, since lattice losses tie
frequently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# guard against IEEE noise in level*size (e.g. 0.95*20 = 19.000000000000004)
_CEIL_GUARD = 1e-9


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Sorted sample carrier; ECDF(x) = #{samples <= x} / size."""

    values: np.ndarray

    @staticmethod
    def from_samples(samples) -> "EmpiricalDistribution":
        v = np.sort(np.asarray(samples, dtype=float))
        if v.size == 0:
            raise ValueError("empty sample")
        return EmpiricalDistribution(values=v)

    @property
    def size(self) -> int:
        return len(self.values)

    def ecdf(self, x) -> np.ndarray:
        return np.searchsorted(self.values, x, side="right") / self.size


def _as_dist(d) -> EmpiricalDistribution:
    return d if isinstance(d, EmpiricalDistribution) else EmpiricalDistribution.from_samples(d)


def var_at_level(dist, level: float) -> float:
    """Loss quantile at the given level: the ceil(level*M)-th order
    statistic, the smallest x with ECDF(x) >= level."""
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    d = _as_dist(dist)
    k = math.ceil(level * d.size - _CEIL_GUARD)
    k = min(max(k, 1), d.size)
    return float(d.values[k - 1])


def ks_distance(dist1, dist2) -> float:
    """Two-sample Kolmogorov-Smirnov statistic: sup |ECDF1 - ECDF2| over
    the pooled sample points."""
    a = _as_dist(dist1)
    b = _as_dist(dist2)
    pooled = np.concatenate([a.values, b.values])
    return float(np.abs(a.ecdf(pooled) - b.ecdf(pooled)).max())


def _midranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    ranks = np.empty(len(x))
    i = 0
    while i < len(xs):
        j = i
        while j + 1 < len(xs) and xs[j + 1] == xs[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(x, y) -> float:
    """Spearman rank correlation with midranks for ties.

    Returns NaN (the undefined flag) when either input is constant.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("inputs must be one-dimensional and of equal length")
    if len(x) < 2:
        raise ValueError("need at least two observations")
    rx = _midranks(x)
    ry = _midranks(y)
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    vx = (dx * dx).sum()
    vy = (dy * dy).sum()
    if vx == 0.0 or vy == 0.0:
        return float("nan")
    return float((dx * dy).sum() / math.sqrt(vx * vy))


def histogram(dist, bins: int) -> tuple[np.ndarray, np.ndarray]:
    """Equal-width histogram over [min, max], right-closed bins (the first
    bin is closed on both sides); counts sum to the sample size.

    Returns (counts, edges).
    """
    if bins < 1:
        raise ValueError("bins must be >= 1")
    d = _as_dist(dist)
    lo = float(d.values[0])
    hi = float(d.values[-1])
    if lo == hi:
        edges = np.linspace(lo - 0.5, hi + 0.5, bins + 1)
    else:
        edges = np.linspace(lo, hi, bins + 1)
    idx = np.searchsorted(edges, d.values, side="left") - 1
    idx = np.clip(idx, 0, bins - 1)
    counts = np.bincount(idx, minlength=bins)
    return counts, edges
