"""Normalized one-dimensional marginal densities.

A :class:`MarginalApprox` is defined by a *shape* description (``params``),
from which an unnormalized log density is rebuilt, plus a support interval.
Normalization always uses composite Simpson on ``NODES`` equally spaced nodes
in the working ``theta_z`` variable, so a marginal rebuilt from its JSON
descriptor reproduces the original bit-for-bit.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy import integrate
from scipy.interpolate import CubicSpline

from .targets import Reparam

NODES = 1001
SCHEMA_VERSION = 1


class Scale(str, enum.Enum):
    THETA_Z = "theta_z"
    THETA = "theta"


def to_unit(x, support) -> np.ndarray:
    """Centered-scaled variable ``t in [-1, 1]`` for ``x in support``."""
    a, b = support
    return (2.0 * np.asarray(x, dtype=float) - (a + b)) / (b - a)


def poly_eval(coeffs, support, x) -> np.ndarray:
    """Evaluate a polynomial whose coefficients are in the centered-scaled variable."""
    return npoly.polyval(to_unit(x, support), np.asarray(coeffs, dtype=float))


def simpson(y, x) -> float:
    return float(integrate.simpson(y, x=x))


def _log_shape_factory(params: dict, support) -> Callable[[np.ndarray], np.ndarray]:
    kind = params["kind"]
    if kind == "log_poly":
        coeffs = np.asarray(params["coeffs"], dtype=float)
        return lambda x: poly_eval(coeffs, support, x)
    if kind == "poly":
        coeffs = np.asarray(params["coeffs"], dtype=float)

        def log_poly_clamped(x):
            v = poly_eval(coeffs, support, x)
            with np.errstate(divide="ignore"):
                return np.log(np.maximum(v, 0.0))

        return log_poly_clamped
    if kind == "spline":
        spline = CubicSpline(np.asarray(params["x"]), np.asarray(params["y"]), bc_type="natural")

        def log_spline_clamped(x):
            with np.errstate(divide="ignore"):
                return np.log(np.maximum(spline(np.asarray(x, dtype=float)), 0.0))

        return log_spline_clamped
    if kind == "half_gaussian":
        mu, sp, sm = params["mu"], params["sigma_plus"], params["sigma_minus"]

        def log_half_gaussian(x):
            x = np.asarray(x, dtype=float)
            sig = np.where(x > mu, sp, sm)
            return -0.5 * (x - mu) ** 2 / sig**2

        return log_half_gaussian
    if kind == "tabulated_log":
        spline = CubicSpline(np.asarray(params["x"]), np.asarray(params["log_y"]), bc_type="not-a-knot")
        return lambda x: spline(np.asarray(x, dtype=float))
    raise ValueError(f"unknown marginal shape kind {kind!r}")


@dataclass(frozen=True, eq=False)
class MarginalApprox:
    """Normalized density on a closed support interval (zero outside it)."""

    axis: int
    scale: Scale
    support: tuple[float, float]
    log_shape: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    offset: float
    normalizer: float
    method: str
    params: dict = field(repr=False)
    reparam: Reparam = Reparam.IDENTITY
    runge_warning: bool = False
    negative_count: int = 0
    base: Optional["MarginalApprox"] = field(default=None, repr=False)

    def density(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        a, b = self.support
        inside = (x >= a) & (x <= b)
        xs = np.where(inside, x, a)
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            if self.base is not None:
                # h(h^{-1}(a)) can round just outside the base support
                z = np.clip(self.reparam.forward(xs), *self.base.support)
                vals = self.base.density(z) * np.exp(self.reparam.log_abs_jacobian(xs))
            else:
                vals = np.exp(self.log_shape(xs) - self.offset) / self.normalizer
        return np.where(inside, np.nan_to_num(vals, nan=0.0, posinf=0.0), 0.0)

    __call__ = density

    @property
    def working_support(self) -> tuple[float, float]:
        """Support in the ``theta_z`` variable."""
        return self.base.support if self.base is not None else self.support

    def nodes(self, m: int = NODES) -> np.ndarray:
        """``m`` nodes equally spaced in ``theta_z``, expressed in this marginal's scale."""
        z = np.linspace(*self.working_support, m)
        return self.reparam.inverse(z) if self.base is not None else z

    def integral(self, m: int = NODES) -> float:
        """Composite Simpson integral, substituting ``theta = h^{-1}(theta_z)`` in the theta scale."""
        z = np.linspace(*self.working_support, m)
        if self.base is None:
            return simpson(self.density(z), z)
        theta = self.reparam.inverse(z)
        jac = np.exp(-self.reparam.log_abs_jacobian(theta))
        return simpson(self.density(theta) * jac, z)

    def local_maxima(self, m: int = 4001) -> np.ndarray:
        """Interior local maxima of the density found on an ``m``-node scan."""
        x = np.linspace(*self.support, m)
        y = self.density(x)
        idx = np.flatnonzero((y[1:-1] > y[:-2]) & (y[1:-1] > y[2:])) + 1
        return x[idx]


def make_marginal(
    params: dict,
    support,
    axis: int,
    method: str,
    reparam: Reparam = Reparam.IDENTITY,
    log_shape: Optional[Callable] = None,
    **flags,
) -> MarginalApprox:
    """Normalize a shape over ``support`` in the ``theta_z`` scale."""
    a, b = float(support[0]), float(support[1])
    if not a < b:
        raise ValueError(f"invalid support [{a}, {b}]")
    log_shape = log_shape or _log_shape_factory(params, (a, b))
    x = np.linspace(a, b, NODES)
    lv = np.asarray(log_shape(x), dtype=float)
    finite = lv[np.isfinite(lv)]
    if finite.size == 0:
        raise ValueError("marginal shape is zero on the whole support")
    offset = float(finite.max())
    with np.errstate(under="ignore"):
        z = simpson(np.exp(lv - offset), x)
    if not z > 0.0 or not math.isfinite(z):
        raise ValueError(f"normalizing constant is {z}")
    return MarginalApprox(axis, Scale.THETA_Z, (a, b), log_shape, offset, z, method, params, reparam, **flags)


def inverse_transform_marginal(m: MarginalApprox, reparam: Optional[Reparam] = None) -> MarginalApprox:
    """Change of variables from ``theta_z`` to ``theta = h^{-1}(theta_z)``."""
    if m.scale is not Scale.THETA_Z:
        raise ValueError("marginal is already in the theta scale")
    reparam = m.reparam if reparam is None else Reparam(reparam)
    if reparam is Reparam.IDENTITY:
        return replace(m, scale=Scale.THETA, reparam=reparam)
    lo, hi = (float(v) for v in reparam.inverse(np.array(m.support)))
    if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
        raise ValueError("reparameterization is not invertible on the support")
    base = replace(m, reparam=reparam)
    return replace(m, scale=Scale.THETA, support=(lo, hi), reparam=reparam, base=base)


def analytic_marginal(target, k: int, support=None) -> MarginalApprox:
    """Oracle marginal from a target's closed-form axis density."""
    if target.marginals is None:
        raise ValueError(f"target {target.label!r} has no analytic marginals")
    am = target.marginals[k]
    support = am.support if support is None else support
    return make_marginal({"kind": "analytic", "target": target.label}, support, k, "analytic",
                         target.reparam[k], log_shape=am.logpdf)


def to_descriptor(m: MarginalApprox) -> dict:
    """JSON-ready description of a ``theta_z`` marginal (theta-scale marginals use their base)."""
    z = m.base if m.base is not None else m
    params = dict(z.params)
    if params["kind"] == "analytic":
        x = np.linspace(*z.support, NODES)
        params = {"kind": "tabulated_log", "x": x.tolist(), "log_y": np.asarray(z.log_shape(x), float).tolist()}
    return {
        "schema": SCHEMA_VERSION,
        "method": z.method,
        "axis": z.axis + 1,
        "scale": Scale.THETA_Z.value,
        "reparam": z.reparam.value,
        "support": [z.support[0], z.support[1]],
        "normalizer": z.normalizer,
        "offset": z.offset,
        "runge_warning": z.runge_warning,
        "negative_count": z.negative_count,
        "params": _jsonable(params),
    }


def from_descriptor(d: dict, scale: Scale = Scale.THETA_Z) -> MarginalApprox:
    if d.get("schema") != SCHEMA_VERSION:
        raise ValueError(f"unsupported descriptor schema {d.get('schema')!r}")
    m = make_marginal(
        d["params"], d["support"], int(d["axis"]) - 1, d["method"], Reparam(d["reparam"]),
        runge_warning=bool(d.get("runge_warning", False)), negative_count=int(d.get("negative_count", 0)),
    )
    return inverse_transform_marginal(m) if Scale(scale) is Scale.THETA else m


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj
