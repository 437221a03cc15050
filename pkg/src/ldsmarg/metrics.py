"""Kullback-Leibler divergence and Hellinger distance between 1-D densities.

Both densities are sampled on ``m`` equally spaced nodes over the
intersection of their supports and renormalized so that ``sum(p) * h = 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DisjointSupportError

DEFAULT_GRID = 1001


@dataclass(frozen=True)
class DistanceReport:
    axis: int
    kl: float
    hellinger: float
    grid_points: int
    support: tuple[float, float]

    @property
    def kl_infinite(self) -> bool:
        return math.isinf(self.kl)


def _common_grid(p, q, m: int):
    if m < 3:
        raise ValueError(f"metric grid needs at least 3 nodes, got {m}")
    lo = max(p.support[0], q.support[0])
    hi = min(p.support[1], q.support[1])
    if not lo < hi:
        raise DisjointSupportError(f"supports {p.support} and {q.support} do not overlap")
    x = np.linspace(lo, hi, m)
    h = (hi - lo) / (m - 1)
    pv = np.asarray(p.density(x), dtype=float)
    qv = np.asarray(q.density(x), dtype=float)
    sp, sq = pv.sum(), qv.sum()
    if not (sp > 0 and sq > 0):
        raise DisjointSupportError("one density has no mass on the common support")
    return pv / (sp * h), qv / (sq * h), h, (float(lo), float(hi))


def kl_divergence(p, q, m: int = DEFAULT_GRID) -> float:
    """``KL(p || q)``; ``inf`` when ``q`` vanishes where ``p`` does not."""
    pv, qv, h, _ = _common_grid(p, q, m)
    pos = pv > 0
    if np.any(qv[pos] == 0):
        return math.inf
    return float(np.sum(pv[pos] * np.log(pv[pos] / qv[pos])) * h)


def hellinger(p, q, m: int = DEFAULT_GRID) -> float:
    pv, qv, h, _ = _common_grid(p, q, m)
    bc = float(np.sum(np.sqrt(pv * qv)) * h)
    return math.sqrt(min(1.0, max(0.0, 1.0 - bc)))


def compare(reference, approx, m: int = DEFAULT_GRID) -> DistanceReport:
    """Distances of ``approx`` from ``reference``; KL is taken as ``KL(reference || approx)``."""
    _, _, _, support = _common_grid(reference, approx, m)
    return DistanceReport(approx.axis, kl_divergence(reference, approx, m), hellinger(reference, approx, m), m, support)
