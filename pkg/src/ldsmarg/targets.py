"""Synthetic target densities, mode/Hessian search and integration regions.

Every target works in the reparameterized scale ``theta_z = h(theta)``; the
per-axis :class:`Reparam` records ``h`` so marginals can be mapped back.
Log densities are vectorized: they take an ``(M, s)`` array and return ``M``
values, with ``-inf`` outside the support.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import integrate, optimize, special

from .errors import ConvergenceError
from .pointset import IntegrationRegion

_LOG_2PI = math.log(2.0 * math.pi)


class Reparam(str, enum.Enum):
    """Per-axis transform ``theta_z = h(theta)``."""

    IDENTITY = "identity"
    LOG = "log"

    def forward(self, theta):
        theta = np.asarray(theta, dtype=float)
        return np.log(theta) if self is Reparam.LOG else theta

    def inverse(self, theta_z):
        theta_z = np.asarray(theta_z, dtype=float)
        return np.exp(theta_z) if self is Reparam.LOG else theta_z

    def log_abs_jacobian(self, theta):
        """``log |h'(theta)|``."""
        theta = np.asarray(theta, dtype=float)
        return -np.log(theta) if self is Reparam.LOG else np.zeros_like(theta)


@dataclass(frozen=True)
class AnalyticMarginal:
    """Closed-form one-dimensional marginal in the ``theta_z`` scale."""

    logpdf: Callable[[np.ndarray], np.ndarray]
    mean: float
    sd: float
    modes: tuple[float, ...]

    def pdf(self, x):
        with np.errstate(over="ignore", under="ignore"):
            return np.exp(self.logpdf(np.asarray(x, dtype=float)))

    @property
    def support(self) -> tuple[float, float]:
        return self.mean - 12.0 * self.sd, self.mean + 12.0 * self.sd

    def total_mass(self, nodes: int = 4001) -> float:
        x = np.linspace(*self.support, nodes)
        return float(integrate.simpson(self.pdf(x), x=x))


@dataclass(frozen=True, eq=False)
class TargetDensity:
    dim: int
    log_density: Callable[[np.ndarray], np.ndarray]
    reparam: tuple[Reparam, ...]
    label: str
    marginals: Optional[tuple[AnalyticMarginal, ...]] = None
    starts: tuple[tuple[float, ...], ...] = field(default=())

    def __post_init__(self):
        if len(self.reparam) != self.dim:
            raise ValueError("one reparameterization per axis is required")
        if self.marginals is not None:
            if len(self.marginals) != self.dim:
                raise ValueError("one analytic marginal per axis is required")
            for k, m in enumerate(self.marginals):
                mass = m.total_mass()
                if abs(mass - 1.0) > 1e-6:
                    raise ValueError(f"analytic marginal of axis {k} integrates to {mass}, not 1")
        if not self.starts:
            object.__setattr__(self, "starts", (tuple([0.5] * self.dim),))

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return self.log_density(x[None, :])[0]
        return self.log_density(x)

    def shifted(self, log_c: float) -> "TargetDensity":
        """Same target multiplied by the constant ``exp(log_c)``."""
        base = self.log_density
        return replace(self, log_density=lambda x: base(x) + log_c, label=f"{self.label}*exp({log_c!r})")


@dataclass(frozen=True, eq=False)
class ModeSummary:
    mode: np.ndarray
    hessian: np.ndarray
    std_devs: np.ndarray
    log_density: float
    regularization: float = 0.0


def _gaussian_marginal(mu: float, var: float) -> AnalyticMarginal:
    sd = math.sqrt(var)

    def logpdf(x):
        return -0.5 * (x - mu) ** 2 / var - 0.5 * _LOG_2PI - math.log(sd)

    return AnalyticMarginal(logpdf, mu, sd, (mu,))


def make_gaussian(mean, covariance, label: str = "gaussian") -> TargetDensity:
    mean = np.asarray(mean, dtype=float).reshape(-1)
    cov = np.atleast_2d(np.asarray(covariance, dtype=float))
    s = mean.size
    if cov.shape != (s, s):
        raise ValueError(f"covariance must be {s}x{s}, got {cov.shape}")
    if not np.allclose(cov, cov.T, rtol=1e-12, atol=0.0):
        raise ValueError("covariance must be symmetric")
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise ValueError("covariance must be positive definite") from None
    log_norm = -0.5 * s * _LOG_2PI - float(np.sum(np.log(np.diag(chol))))

    def log_density(x):
        d = np.asarray(x, dtype=float) - mean
        w = np.linalg.solve(chol, d.T)
        return log_norm - 0.5 * np.sum(w * w, axis=0)

    marginals = tuple(_gaussian_marginal(float(mean[k]), float(cov[k, k])) for k in range(s))
    return TargetDensity(s, log_density, (Reparam.IDENTITY,) * s, label, marginals)


def _log_gamma_marginal(shape: float) -> AnalyticMarginal:
    lg = math.lgamma(shape)

    def logpdf(z):
        with np.errstate(over="ignore"):
            return shape * z - np.exp(z) - lg

    return AnalyticMarginal(
        logpdf, float(special.digamma(shape)), math.sqrt(float(special.polygamma(1, shape))), (math.log(shape),)
    )


def make_skewed(s: int, shapes, label: str = "skewed") -> TargetDensity:
    """Product of ``log Gamma(shape_k, 1)`` densities; the ``theta`` scale is Gamma."""
    shapes = np.asarray(shapes, dtype=float).reshape(-1)
    if shapes.size != s:
        raise ValueError(f"expected {s} shapes, got {shapes.size}")
    if np.any(shapes <= 0):
        raise ValueError("Gamma shapes must be positive")
    log_norm = -float(np.sum([math.lgamma(a) for a in shapes]))

    def log_density(x):
        z = np.asarray(x, dtype=float)
        with np.errstate(over="ignore"):
            return log_norm + np.sum(shapes * z - np.exp(z), axis=-1)

    marginals = tuple(_log_gamma_marginal(float(a)) for a in shapes)
    return TargetDensity(s, log_density, (Reparam.LOG,) * s, label, marginals)


def _mixture_marginal(separation: float, weight: float) -> AnalyticMarginal:
    m = 0.5 * separation
    lw, lv = math.log(weight), math.log1p(-weight)

    def logpdf(x):
        x = np.asarray(x, dtype=float)
        return np.logaddexp(lw - 0.5 * (x + m) ** 2, lv - 0.5 * (x - m) ** 2) - 0.5 * _LOG_2PI

    mean = (1.0 - 2.0 * weight) * m
    var = 1.0 + m * m - mean * mean
    modes = _mixture_modes(logpdf, mean, math.sqrt(var))
    return AnalyticMarginal(logpdf, mean, math.sqrt(var), modes)


def _mixture_modes(logpdf, center: float, sd: float) -> tuple[float, ...]:
    x = np.linspace(center - 6 * sd, center + 6 * sd, 20001)
    y = logpdf(x)
    peaks = np.flatnonzero((y[1:-1] > y[:-2]) & (y[1:-1] >= y[2:])) + 1
    out = []
    for p in peaks:
        res = optimize.minimize_scalar(lambda t: -float(logpdf(np.array([t]))[0]), bracket=(x[p - 1], x[p], x[p + 1]))
        out.append(float(res.x))
    return tuple(out)


def make_bimodal(s: int, axis: int, separation: float, weight: float = 0.5, label: str = "bimodal") -> TargetDensity:
    """Standard normal on all axes except ``axis``, which holds a two-component mixture.

    The mixture is ``weight N(-sep/2, 1) + (1 - weight) N(sep/2, 1)``.
    """
    if not 0 <= axis < s:
        raise ValueError(f"axis {axis} out of range for dimension {s}")
    if separation < 0:
        raise ValueError("separation must be nonnegative")
    if not 0 < weight < 1:
        raise ValueError("weight must lie in (0, 1)")
    mix = _mixture_marginal(separation, weight)
    std = _gaussian_marginal(0.0, 1.0)
    others = [k for k in range(s) if k != axis]

    def log_density(x):
        x = np.asarray(x, dtype=float)
        out = mix.logpdf(x[..., axis])
        if others:
            out = out + np.sum(-0.5 * x[..., others] ** 2, axis=-1) - 0.5 * len(others) * _LOG_2PI
        return out

    marginals = tuple(mix if k == axis else std for k in range(s))
    starts = []
    for c in sorted({-0.5 * separation, 0.5 * separation}):
        start = [0.5] * s
        start[axis] = c
        starts.append(tuple(start))
    return TargetDensity(s, log_density, (Reparam.IDENTITY,) * s, label, marginals, tuple(starts))


def finite_difference_hessian(f: Callable[[np.ndarray], np.ndarray], x: np.ndarray, steps: np.ndarray) -> np.ndarray:
    """Central-difference Hessian of a vectorized scalar function ``f``."""
    s = x.size
    e = np.diag(steps)
    pts = [x]
    for i in range(s):
        pts += [x + e[i], x - e[i]]
    for i in range(s):
        for j in range(i + 1, s):
            pts += [x + e[i] + e[j], x + e[i] - e[j], x - e[i] + e[j], x - e[i] - e[j]]
    vals = f(np.array(pts))
    f0 = vals[0]
    hess = np.empty((s, s))
    pos = 1
    for i in range(s):
        hess[i, i] = (vals[pos] - 2.0 * f0 + vals[pos + 1]) / steps[i] ** 2
        pos += 2
    for i in range(s):
        for j in range(i + 1, s):
            pp, pm, mp, mm = vals[pos : pos + 4]
            hess[i, j] = hess[j, i] = (pp - pm - mp + mm) / (4.0 * steps[i] * steps[j])
            pos += 4
    return hess


def _regularize(hess: np.ndarray, max_doublings: int = 60) -> tuple[np.ndarray, float]:
    try:
        np.linalg.cholesky(hess)
        return hess, 0.0
    except np.linalg.LinAlgError:
        pass
    delta = 1e-8
    eye = np.eye(hess.shape[0])
    for _ in range(max_doublings):
        try:
            np.linalg.cholesky(hess + delta * eye)
            return hess + delta * eye, delta
        except np.linalg.LinAlgError:
            delta *= 2.0
    raise ConvergenceError("Hessian is not positive definite after regularization")


def find_mode_hessian(t: TargetDensity, start, max_iter: int = 100_000) -> ModeSummary:
    """Nelder-Mead maximization of the log density, then a finite-difference Hessian."""
    x0 = np.asarray(start, dtype=float).reshape(-1)
    if x0.size != t.dim:
        raise ValueError(f"start has length {x0.size}, target dimension is {t.dim}")
    if not np.isfinite(t(x0)):
        raise ValueError("log density is not finite at the start point")

    def neg(x):
        v = t(x)
        return float(-v) if np.isfinite(v) else np.inf

    opts = dict(xatol=1e-10, fatol=1e-14, maxiter=max_iter, maxfev=10 * max_iter, adaptive=t.dim > 2)
    x = x0
    used = 0
    # a restart from the converged point guards against simplex collapse
    for _ in range(2):
        res = optimize.minimize(neg, x, method="Nelder-Mead", options=opts)
        used += res.nit
        if not res.success or used > max_iter:
            raise ConvergenceError(f"Nelder-Mead did not converge: {res.message}")
        x = res.x
    steps = np.finfo(float).eps ** 0.25 * (1.0 + np.abs(x))
    hess = finite_difference_hessian(lambda p: -t(p), x, steps)
    hess, delta = _regularize(hess)
    std = np.sqrt(np.diag(np.linalg.inv(hess)))
    return ModeSummary(x, hess, std, float(t(x)), delta)


def find_modes(t: TargetDensity, starts: Optional[Sequence] = None) -> list[ModeSummary]:
    """Run :func:`find_mode_hessian` from each start (default: the target's hints)."""
    return [find_mode_hessian(t, s) for s in (starts if starts is not None else t.starts)]


def build_region(ms: Union[ModeSummary, Sequence[ModeSummary]], c: float = 3.0) -> IntegrationRegion:
    """``mode +/- c * sd`` on every axis; several summaries give the bounding box of their boxes."""
    if c <= 0:
        raise ValueError(f"region multiplier must be positive, got {c}")
    summaries = [ms] if isinstance(ms, ModeSummary) else list(ms)
    if not summaries:
        raise ValueError("no mode summaries given")
    lower = np.min([m.mode - c * m.std_devs for m in summaries], axis=0)
    upper = np.max([m.mode + c * m.std_devs for m in summaries], axis=0)
    return IntegrationRegion(lower, upper)
