"""Half-Gaussian baseline and reference ("true") marginals."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .marginal import MarginalApprox, Scale, analytic_marginal, inverse_transform_marginal, make_marginal
from .marginalize import marginalize_grid
from .pointset import DEFAULT_POINT_BUDGET, IntegrationRegion
from .targets import ModeSummary, TargetDensity, build_region


@dataclass(frozen=True)
class HalfGaussianFit:
    axis: int
    mu: float
    sigma_plus: float
    sigma_minus: float


def _side_precision(d: np.ndarray, drop: np.ndarray) -> float:
    # least squares for drop = -w d^2 with a single unknown w = 1 / (2 sigma^2)
    return float(-(drop @ d**2) / (d**2 @ d**2))


def half_gaussian_fits(t: TargetDensity, ms: ModeSummary) -> list[HalfGaussianFit]:
    """Per-axis sigma on each side of the mode from conditional slices at +/- sd/2 and +/- sd."""
    fits = []
    f0 = t(ms.mode)
    for k in range(t.dim):
        d = np.array([0.5, 1.0]) * ms.std_devs[k]
        pts = np.repeat(ms.mode[None, :], 4, axis=0)
        pts[:2, k] += d
        pts[2:, k] -= d
        drop = t(pts) - f0
        if not np.all(np.isfinite(drop)):
            raise ValueError(f"non-finite log density on the slice through axis {k}")
        sig = []
        for side in (drop[:2], drop[2:]):
            w = _side_precision(d, side)
            if not w > 0:
                raise ValueError(f"log density is not concave around the mode on axis {k}")
            sig.append(1.0 / math.sqrt(2.0 * w))
        fits.append(HalfGaussianFit(k, float(ms.mode[k]), sig[0], sig[1]))
    return fits


def half_gaussian_baseline(t: TargetDensity, ms: ModeSummary, region: Optional[IntegrationRegion] = None,
                           scale=Scale.THETA_Z) -> list[MarginalApprox]:
    """Unimodal marginal with separate Gaussian widths left and right of the mode."""
    region = build_region(ms) if region is None else region
    out = []
    for f in half_gaussian_fits(t, ms):
        params = {"kind": "half_gaussian", "mu": f.mu, "sigma_plus": f.sigma_plus, "sigma_minus": f.sigma_minus}
        m = make_marginal(params, region.axis(f.axis), f.axis, "half-gaussian", t.reparam[f.axis])
        out.append(inverse_transform_marginal(m) if Scale(scale) is Scale.THETA else m)
    return out


def dense_grid_oracle(t: TargetDensity, region: IntegrationRegion, n_dense: int, scale=Scale.THETA_Z,
                      budget: int = DEFAULT_POINT_BUDGET) -> list[MarginalApprox]:
    """Grid marginalization at high resolution, tagged as the oracle."""
    return [replace(m, method="oracle") for m in marginalize_grid(t, region, n_dense, scale, budget)]


def reference_marginals(t: TargetDensity, region: IntegrationRegion, n_dense: int = 9,
                        budget: int = DEFAULT_POINT_BUDGET) -> list[MarginalApprox]:
    """Analytic marginals when the target defines them, otherwise the dense-grid oracle."""
    if t.marginals is not None:
        return [analytic_marginal(t, k) for k in range(t.dim)]
    return dense_grid_oracle(t, region, n_dense, budget=budget)
