"""Grid, LDS-StM, LDS-QA and LDS-CX marginalization.

All polynomial fits are done in the centered-scaled variable ``t in [-1, 1]``
and solved through a QR factorization of the Vandermonde design, never
through the normal equations.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy.linalg import solve_triangular

from .errors import RankDeficientError
from .marginal import NODES, MarginalApprox, Scale, inverse_transform_marginal, make_marginal, poly_eval, to_unit
from .pointset import DEFAULT_POINT_BUDGET, IntegrationRegion, PointSet, generate_grid, scale_to_region
from .projection import (
    EvaluationCloud,
    PartitionSummary,
    evaluate_cloud,
    grid_axis_means,
    partition_means,
    project_axis,
    worker_count,
)
from .targets import Reparam, TargetDensity

DEFAULT_STM_DEGREE = 8
DEFAULT_PARTITIONS = 15
DEFAULT_CORRECTION = 3


@dataclass(frozen=True, eq=False)
class LogPolyApprox:
    """Polynomial in the log-density scale, stored in the centered-scaled variable.

    ``correction`` holds the residual-fit coefficients when this polynomial is
    a corrected quadratic.
    """

    axis: int
    coeffs: np.ndarray
    support: tuple[float, float]
    correction: Optional[np.ndarray] = None

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    def __call__(self, x) -> np.ndarray:
        return poly_eval(self.coeffs, self.support, x)

    def theta_coeffs(self) -> np.ndarray:
        """Monomial coefficients ``beta_0..beta_d`` in the unscaled ``theta_z`` variable."""
        a, b = self.support
        t_of_x = Polynomial([-(a + b) / (b - a), 2.0 / (b - a)])
        return Polynomial(self.coeffs)(t_of_x).coef

    def rss(self, psum: PartitionSummary) -> float:
        ok = psum.usable
        r = psum.log_means[ok] - self(psum.midpoints[ok])
        return float(r @ r)


def lstsq_poly(t: np.ndarray, y: np.ndarray, degree: int) -> np.ndarray:
    """Least-squares polynomial coefficients (increasing order) via Householder QR."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.size < degree + 1:
        raise RankDeficientError(f"{t.size} points cannot determine a degree-{degree} polynomial")
    q, r = np.linalg.qr(np.vander(t, degree + 1, increasing=True))
    diag = np.abs(np.diag(r))
    if diag.min() <= max(t.size, degree + 1) * np.finfo(float).eps * diag.max():
        raise RankDeficientError(f"design matrix for degree {degree} is rank deficient")
    return solve_triangular(r, q.T @ y)


def _support_of(psum: PartitionSummary, support) -> tuple[float, float]:
    if support is not None:
        return float(support[0]), float(support[1])
    if psum.edges is None:
        raise ValueError("a support interval is required for grid-born summaries")
    return float(psum.edges[0]), float(psum.edges[-1])


def fit_quadratic_log(psum: PartitionSummary, support=None) -> LogPolyApprox:
    """Least-squares quadratic through the log pointwise means of the usable partitions."""
    ok = psum.usable
    if ok.sum() < 3:
        raise ValueError(f"quadratic fit needs at least 3 usable partitions, got {int(ok.sum())}")
    sup = _support_of(psum, support)
    coeffs = lstsq_poly(to_unit(psum.midpoints[ok], sup), psum.log_means[ok], 2)
    return LogPolyApprox(psum.axis, coeffs, sup)


def correct_polynomial(q: LogPolyApprox, psum: PartitionSummary, degree: int) -> LogPolyApprox:
    """Add a degree-``degree`` least-squares fit of the residuals ``log_mean - q(midpoint)`` to ``q``."""
    if q.degree != 2:
        raise ValueError(f"correction expects a quadratic, got degree {q.degree}")
    if degree < 3:
        raise ValueError(f"correction degree must be at least 3, got {degree}")
    ok = psum.usable
    if ok.sum() < degree + 1:
        raise ValueError(
            f"degree-{degree} correction needs at least {degree + 1} usable partitions, got {int(ok.sum())}"
        )
    mids = psum.midpoints[ok]
    resid = psum.log_means[ok] - q(mids)
    corr = lstsq_poly(to_unit(mids, q.support), resid, degree)
    coeffs = np.zeros(degree + 1)
    coeffs[:3] = q.coeffs
    return LogPolyApprox(q.axis, coeffs + corr, q.support, correction=corr)


def normalize_log_poly(p: LogPolyApprox, reparam: Reparam = Reparam.IDENTITY, method: str = "qa") -> MarginalApprox:
    """``exp(p - max p) / Z`` on the polynomial's support."""
    x = np.linspace(*p.support, NODES)
    if not np.all(np.isfinite(p(x))):
        raise ValueError("log polynomial is not finite on its support")
    params = {"kind": "log_poly", "coeffs": p.coeffs.tolist()}
    if p.correction is not None:
        params["correction"] = p.correction.tolist()
    params["theta_coeffs"] = p.theta_coeffs().tolist()
    return make_marginal(params, p.support, p.axis, method, reparam)


def _map_axes(fn: Callable[[int], MarginalApprox], s: int) -> list:
    workers = min(worker_count(), s)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, range(s)))
    return [fn(k) for k in range(s)]


def _finish(ms: list[MarginalApprox], scale) -> list[MarginalApprox]:
    return [inverse_transform_marginal(m) for m in ms] if Scale(scale) is Scale.THETA else ms


def _scaled_cloud(t: TargetDensity, ps: PointSet) -> EvaluationCloud:
    if ps.region is None:
        raise ValueError("point set must be scaled to the integration region")
    if ps.dim != t.dim:
        raise ValueError(f"point set dimension {ps.dim} does not match target dimension {t.dim}")
    return evaluate_cloud(t, ps)


def grid_marginals(cloud: EvaluationCloud, reparam: Sequence[Reparam], method: str = "grid") -> list[MarginalApprox]:
    """Natural cubic spline through the grid pointwise means, clamped at zero and normalized."""

    def one(k):
        psum = grid_axis_means(cloud, k)
        x = psum.midpoints
        if np.any(np.diff(x) <= 0):
            raise AssertionError("grid abscissae must be strictly increasing")
        y = np.exp(psum.log_means - psum.log_means[np.isfinite(psum.log_means)].max())
        return make_marginal({"kind": "spline", "x": x.tolist(), "y": y.tolist()}, cloud.region.axis(k), k,
                             method, reparam[k])

    return _map_axes(one, cloud.dim)


def marginalize_grid(t: TargetDensity, region: IntegrationRegion, n: int, scale=Scale.THETA_Z,
                     budget: int = DEFAULT_POINT_BUDGET) -> list[MarginalApprox]:
    if n < 4:
        raise ValueError(f"cubic spline interpolation needs n >= 4 abscissae, got {n}")
    ps = scale_to_region(generate_grid(n, t.dim, budget), region)
    return _finish(grid_marginals(evaluate_cloud(t, ps), t.reparam), scale)


def stm_marginals(cloud: EvaluationCloud, reparam: Sequence[Reparam], degree: int = DEFAULT_STM_DEGREE):
    """One density-scale least-squares polynomial through all projected evaluations per axis."""
    if degree < 2:
        raise ValueError(f"polynomial degree must be at least 2, got {degree}")
    if len(cloud) <= degree + 1:
        raise ValueError(f"need more than {degree + 1} points for a degree-{degree} fit")
    top = cloud.log_values[np.isfinite(cloud.log_values)].max()
    values = np.exp(cloud.log_values - top)

    def one(k):
        pa = project_axis(cloud, k)
        sup = cloud.region.axis(k)
        coeffs = lstsq_poly(to_unit(pa.abscissae, sup), values, degree)
        scan = poly_eval(coeffs, sup, np.linspace(*sup, NODES))
        negative = int(np.sum(scan < 0.0))
        return make_marginal({"kind": "poly", "coeffs": coeffs.tolist()}, sup, k, "stm", reparam[k],
                             runge_warning=negative > 0, negative_count=negative)

    return _map_axes(one, cloud.dim)


def marginalize_lds_stm(t: TargetDensity, ps: PointSet, degree: int = DEFAULT_STM_DEGREE,
                        scale=Scale.THETA_Z) -> list[MarginalApprox]:
    return _finish(stm_marginals(_scaled_cloud(t, ps), t.reparam, degree), scale)


@dataclass(frozen=True, eq=False)
class AxisFit:
    """Intermediate results of the partitioned pipeline for one axis."""

    summary: PartitionSummary
    quadratic: LogPolyApprox
    corrected: Optional[LogPolyApprox]

    @property
    def final(self) -> LogPolyApprox:
        return self.corrected if self.corrected is not None else self.quadratic


def axis_fits(cloud: EvaluationCloud, n: int = DEFAULT_PARTITIONS, correction: Optional[int] = None) -> list[AxisFit]:
    """Project, partition, fit the log quadratic and optionally correct it, for every axis."""

    def one(k):
        a, b = cloud.region.axis(k)
        psum = partition_means(project_axis(cloud, k), n, a, b)
        q = fit_quadratic_log(psum)
        c = correct_polynomial(q, psum, correction) if correction is not None else None
        return AxisFit(psum, q, c)

    return _map_axes(one, cloud.dim)


def qa_marginals(cloud: EvaluationCloud, reparam: Sequence[Reparam], n: int = DEFAULT_PARTITIONS,
                 correction: Optional[int] = None) -> list[MarginalApprox]:
    method = "qa" if correction is None else f"cx{correction}"
    return [normalize_log_poly(f.final, reparam[f.quadratic.axis], method) for f in axis_fits(cloud, n, correction)]


def marginalize_lds_qa(t: TargetDensity, ps: PointSet, n: int = DEFAULT_PARTITIONS,
                       scale=Scale.THETA_Z) -> list[MarginalApprox]:
    return _finish(qa_marginals(_scaled_cloud(t, ps), t.reparam, n), scale)


def marginalize_lds_cx(t: TargetDensity, ps: PointSet, n: int = DEFAULT_PARTITIONS, x: int = DEFAULT_CORRECTION,
                       scale=Scale.THETA_Z) -> list[MarginalApprox]:
    return _finish(qa_marginals(_scaled_cloud(t, ps), t.reparam, n, x), scale)
