import math

import numpy as np
import pytest
from scipy import integrate, optimize, special

from ldsmarg.targets import (
    ModeSummary,
    Reparam,
    build_region,
    find_mode_hessian,
    find_modes,
    make_bimodal,
    make_gaussian,
    make_skewed,
)


def test_gaussian_log_density_constants():
    t = make_gaussian([0, 0], np.eye(2))
    assert t([0.0, 0.0]) == pytest.approx(-math.log(2 * math.pi), abs=1e-12)
    t1 = make_gaussian([0], [[1.0]])
    assert math.exp(t1([0.0])) == pytest.approx(1 / math.sqrt(2 * math.pi), abs=1e-12)


def test_gaussian_marginals_are_axis_normals():
    cov = np.array([[2.0, 0.3], [0.3, 0.5]])
    t = make_gaussian([1.0, -2.0], cov)
    x = np.linspace(-3, 3, 7)
    for k in range(2):
        m = t.marginals[k]
        ref = -0.5 * (x - t.marginals[k].mean) ** 2 / cov[k, k] - 0.5 * math.log(2 * math.pi * cov[k, k])
        assert np.allclose(m.logpdf(x), ref, atol=1e-12)
        assert m.mean == [1.0, -2.0][k]


def test_gaussian_rejects_bad_covariance():
    with pytest.raises(ValueError):
        make_gaussian([0, 0], [[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(ValueError):
        make_gaussian([0, 0], [[1.0, 0.1], [0.0, 1.0]])


def test_skewed_marginal_properties():
    t = make_skewed(3, [1.0, 2.0, 5.0])
    assert t.reparam == (Reparam.LOG,) * 3
    for am in t.marginals:
        assert am.total_mass() == pytest.approx(1.0, abs=1e-6)
    # stationarity of z - e^z at 0
    assert t.marginals[0].modes[0] == pytest.approx(0.0, abs=1e-8)
    # skewness by independent quadrature
    pdf = lambda z: math.exp(2 * z - math.exp(z) - math.lgamma(2))
    m1 = integrate.quad(lambda z: z * pdf(z), -30, 5)[0]
    m2 = integrate.quad(lambda z: (z - m1) ** 2 * pdf(z), -30, 5)[0]
    m3 = integrate.quad(lambda z: (z - m1) ** 3 * pdf(z), -30, 5)[0]
    assert m1 == pytest.approx(special.digamma(2), abs=1e-8)
    assert m3 / m2**1.5 < 0


def test_skewed_theta_scale_is_gamma():
    t = make_skewed(1, [3.0])
    tau = 2.5
    z = math.log(tau)
    dens = math.exp(t.marginals[0].logpdf(np.array([z]))[0]) / tau
    gamma_pdf = tau**2 * math.exp(-tau) / math.gamma(3)
    assert dens == pytest.approx(gamma_pdf, rel=1e-12)


def test_skewed_rejects_bad_shapes():
    with pytest.raises(ValueError):
        make_skewed(2, [1.0, 0.0])
    with pytest.raises(ValueError):
        make_skewed(3, [1.0, 2.0])


def _mixture_mode_oracle(sep):
    # stationary points of 0.5 N(-m,1) + 0.5 N(m,1) satisfy x = m tanh(m x)
    m = sep / 2
    return optimize.brentq(lambda x: x - m * math.tanh(m * x), 0.1, m + 1)


def test_bimodal_marginal():
    t = make_bimodal(3, 1, 6.0, 0.5)
    am = t.marginals[1]
    x0 = _mixture_mode_oracle(6.0)
    assert sorted(am.modes) == pytest.approx([-x0, x0], abs=1e-6)
    assert abs(x0 - 3.0) < 1e-6
    xs = np.linspace(-8, 8, 101)
    assert np.allclose(am.logpdf(xs), am.logpdf(-xs), atol=1e-13)
    assert am.total_mass() == pytest.approx(1.0, abs=1e-6)


def test_bimodal_zero_separation_is_standard_normal():
    t = make_bimodal(2, 0, 0.0, 0.3)
    xs = np.linspace(-4, 4, 9)
    assert np.allclose(t.marginals[0].logpdf(xs), -0.5 * xs**2 - 0.5 * math.log(2 * math.pi), atol=1e-13)


def test_bimodal_errors():
    with pytest.raises(ValueError):
        make_bimodal(3, 3, 6.0)
    with pytest.raises(ValueError):
        make_bimodal(3, 0, 6.0, weight=1.0)
    with pytest.raises(ValueError):
        make_bimodal(3, 0, -1.0)


def test_mode_hessian_standard_gaussian():
    t = make_gaussian(np.zeros(4), np.eye(4))
    ms = find_mode_hessian(t, np.ones(4))
    assert np.allclose(ms.mode, 0.0, atol=1e-6)
    assert np.allclose(ms.hessian, np.eye(4), atol=1e-4)
    assert np.allclose(ms.hessian, ms.hessian.T, rtol=1e-8, atol=0)


def test_mode_hessian_diagonal_and_correlated():
    t = make_gaussian([0.0, 0.0], np.diag([4.0, 1.0]))
    ms = find_mode_hessian(t, [1.0, 1.0])
    assert ms.std_devs == pytest.approx([2.0, 1.0], abs=1e-3)
    cov = np.array([[1.0, 0.6, 0.1], [0.6, 2.0, -0.3], [0.1, -0.3, 0.5]])
    mean = np.array([0.5, -1.0, 2.0])
    ms = find_mode_hessian(make_gaussian(mean, cov), np.zeros(3))
    assert np.allclose(ms.mode, mean, atol=1e-6)
    prec = np.linalg.inv(cov)
    assert np.linalg.norm(ms.hessian - prec) / np.linalg.norm(prec) < 1e-4


def test_mode_log_gamma():
    ms = find_mode_hessian(make_skewed(2, [1.0, 3.0]), [0.5, 0.5])
    assert ms.mode == pytest.approx([0.0, math.log(3.0)], abs=1e-6)


def test_mode_rejects_infeasible_start():
    t = make_gaussian([0.0], [[1.0]])
    bad = t.__class__(1, lambda x: np.full(len(x), -np.inf), t.reparam, "flat")
    with pytest.raises(ValueError):
        find_mode_hessian(bad, [0.0])


def test_bimodal_modes_from_hints():
    ms = find_modes(make_bimodal(2, 0, 6.0))
    assert sorted(round(m.mode[0], 4) for m in ms) == [-3.0, 3.0]


def _summary(mode, sd):
    mode = np.asarray(mode, float)
    return ModeSummary(mode, np.diag(1 / np.asarray(sd, float) ** 2), np.asarray(sd, float), 0.0)


def test_build_region():
    r = build_region(_summary([0, 0], [1, 1]), 3)
    assert r.lower.tolist() == [-3, -3] and r.upper.tolist() == [3, 3]
    r = build_region(_summary([5.0], [2.0]), 1)
    assert (r.lower[0], r.upper[0]) == (3.0, 7.0)
    with pytest.raises(ValueError):
        build_region(_summary([0.0], [1.0]), 0)
    union = build_region([_summary([-3, 0], [1, 1]), _summary([3, 0], [1, 1])])
    assert union.lower.tolist() == [-6, -3] and union.upper.tolist() == [6, 3]


def test_region_contains_mode():
    ms = find_mode_hessian(make_skewed(3, [1, 2, 3]), [0.5] * 3)
    r = build_region(ms)
    assert np.all((r.lower < ms.mode) & (ms.mode < r.upper))


def test_shifted_target():
    t = make_gaussian([0, 0], np.eye(2))
    x = np.array([[0.3, -0.2]])
    assert t.shifted(5.0).log_density(x)[0] == t.log_density(x)[0] + 5.0
