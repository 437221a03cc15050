"""Orthogonal projection of evaluation clouds onto marginal axes, and pointwise means.

Projecting ``(x_(i), f(x_(i)))`` onto axis ``k`` keeps the pair
``(x_{k,(i)}, f(x_(i)))``.  :func:`project_axis` does this by column
selection; :func:`project_axis_matrix` forms the projection matrix
``P_k = A_k (A_k^T A_k)^{-1} A_k^T`` explicitly and is kept as a cross-check.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .pointset import IntegrationRegion, PointSet, PointSetKind

WORKERS_ENV = "LDSMARG_WORKERS"


def worker_count() -> int:
    """Parallelism cap from ``$LDSMARG_WORKERS`` (default 1)."""
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


@dataclass(frozen=True, eq=False)
class EvaluationCloud:
    points: np.ndarray
    log_values: np.ndarray
    region: IntegrationRegion
    source: Optional[PointSet] = None

    def __post_init__(self):
        if self.points.shape[0] != self.log_values.shape[0]:
            raise ValueError("points and log_values must have the same length")
        if not np.any(np.isfinite(self.log_values)):
            raise ValueError("no finite log density value in the cloud")

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.points.shape[0]


@dataclass(frozen=True, eq=False)
class ProjectedAxis:
    axis: int
    abscissae: np.ndarray
    log_values: np.ndarray


@dataclass(frozen=True, eq=False)
class PartitionSummary:
    """Per-partition pointwise means along one axis.

    ``edges`` is ``None`` for grid-born summaries, whose ``midpoints`` are the
    grid abscissae themselves.
    """

    axis: int
    edges: Optional[np.ndarray]
    midpoints: np.ndarray
    counts: np.ndarray
    means: np.ndarray
    log_means: np.ndarray

    @property
    def usable(self) -> np.ndarray:
        """Partitions that take part in fitting (non-empty, finite log mean)."""
        return (self.counts > 0) & np.isfinite(self.log_means)

    @property
    def n(self) -> int:
        return self.midpoints.size


def evaluate_cloud(target, ps: PointSet, workers: Optional[int] = None) -> EvaluationCloud:
    """Evaluate the target's log density at every point of a scaled point set."""
    if ps.region is None:
        raise ValueError("point set must be scaled to a region before evaluation")
    workers = worker_count() if workers is None else workers
    pts = ps.points
    if workers > 1 and len(pts) >= 2 * workers:
        chunks = np.array_split(pts, workers)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = np.concatenate(list(pool.map(target.log_density, chunks)))
    else:
        values = np.asarray(target.log_density(pts), dtype=float)
    values = np.where(np.isnan(values), -np.inf, values)
    return EvaluationCloud(pts, values, ps.region, ps)


def _check_axis(cloud: EvaluationCloud, k: int):
    if not 0 <= k < cloud.dim:
        raise ValueError(f"axis {k} out of range for a {cloud.dim}-dimensional cloud")


def project_axis(cloud: EvaluationCloud, k: int) -> ProjectedAxis:
    _check_axis(cloud, k)
    return ProjectedAxis(k, cloud.points[:, k].copy(), cloud.log_values.copy())


def projection_matrix(s: int, k: int) -> np.ndarray:
    """``P_k`` of size ``(s+1) x (s+1)`` keeping coordinate ``k`` and the value column."""
    a = np.zeros((s + 1, 2))
    a[k, 0] = 1.0
    a[s, 1] = 1.0
    return a @ np.linalg.inv(a.T @ a) @ a.T


def project_axis_matrix(cloud: EvaluationCloud, k: int) -> ProjectedAxis:
    """Explicit matrix path: ``Psi P_k`` followed by dropping the all-zero columns."""
    _check_axis(cloud, k)
    s = cloud.dim
    psi = np.column_stack([cloud.points, cloud.log_values])
    projected = psi @ projection_matrix(s, k)
    dropped = [j for j in range(s) if j != k]
    if np.any(projected[:, dropped] != 0.0):
        raise AssertionError("projection left nonzero entries off the marginal axis")
    return ProjectedAxis(k, projected[:, k], projected[:, s])


def _log_mean(log_values: np.ndarray) -> float:
    """``log(mean(exp(v)))`` with max-subtraction and exactly rounded summation."""
    finite = log_values[np.isfinite(log_values)]
    if finite.size == 0:
        return -math.inf
    top = finite.max()
    total = math.fsum(np.exp(finite - top).tolist())
    return math.log(total / log_values.size) + top


def partition_means(pa: ProjectedAxis, n: int, a_k: float, b_k: float) -> PartitionSummary:
    """Split ``[a_k, b_k]`` into ``n`` equal partitions and average the density in each.

    Partitions are right-open except the last.  Means are taken in the density
    scale and then logged.
    """
    if n < 3:
        raise ValueError(f"at least three partitions are required, got n={n}")
    if not a_k < b_k:
        raise ValueError(f"empty interval [{a_k}, {b_k}]")
    x = np.asarray(pa.abscissae, dtype=float)
    if np.any((x < a_k) | (x > b_k)):
        raise ValueError("projected abscissae fall outside the partitioned interval")
    edges = np.linspace(a_k, b_k, n + 1)
    mids = (edges[:-1] + edges[1:]) / 2.0
    which = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, n - 1)
    counts = np.bincount(which, minlength=n)
    if not counts.any():
        raise ValueError("all partitions are empty")
    log_means = np.full(n, -math.inf)
    for u in np.flatnonzero(counts):
        log_means[u] = _log_mean(pa.log_values[which == u])
    with np.errstate(over="ignore", under="ignore"):
        means = np.exp(log_means)
    return PartitionSummary(pa.axis, edges, mids, counts, means, log_means)


def grid_axis_means(cloud: EvaluationCloud, k: int) -> PartitionSummary:
    """Pointwise means over the ``n^(s-1)`` grid evaluations sharing each abscissa."""
    _check_axis(cloud, k)
    src = cloud.source
    if src is None or src.kind is not PointSetKind.GRID:
        raise ValueError("grid_axis_means needs a cloud evaluated on a grid")
    n, s = src.n_per_axis, src.dim
    shape = (n,) * s
    vals = np.moveaxis(cloud.log_values.reshape(shape), k, 0).reshape(n, -1)
    coords = np.moveaxis(cloud.points[:, k].reshape(shape), k, 0).reshape(n, -1)[:, 0].copy()
    log_means = np.array([_log_mean(row) for row in vals])
    counts = np.full(n, n ** (s - 1))
    with np.errstate(over="ignore", under="ignore"):
        means = np.exp(log_means)
    return PartitionSummary(k, None, coords, counts, means, log_means)
