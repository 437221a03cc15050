import math

import numpy as np
import pytest

from ldsmarg.baselines import dense_grid_oracle, half_gaussian_baseline, half_gaussian_fits, reference_marginals
from ldsmarg.marginal import Scale, analytic_marginal
from ldsmarg.marginalize import marginalize_lds_cx
from ldsmarg.metrics import kl_divergence
from ldsmarg.pointset import IntegrationRegion, generate_korobov, scale_to_region
from ldsmarg.targets import (
    ModeSummary,
    Reparam,
    TargetDensity,
    build_region,
    find_mode_hessian,
    find_modes,
    make_bimodal,
    make_gaussian,
    make_skewed,
)


class Counting:
    def __init__(self, t):
        self.t, self.calls = t, 0

    def __getattr__(self, name):
        return getattr(self.t, name)

    def log_density(self, x):
        self.calls += len(x)
        return self.t.log_density(x)


def test_symmetric_gaussian_sides_equal():
    t = make_gaussian([0.5, -1.0], np.diag([1.0, 2.25]))
    ms = find_mode_hessian(t, [0.0, 0.0])
    for f in half_gaussian_fits(t, ms):
        assert f.sigma_plus == pytest.approx(f.sigma_minus, abs=1e-6)
        assert f.sigma_plus == pytest.approx(math.sqrt([1.0, 2.25][f.axis]), abs=1e-6)
    reg = build_region(ms)
    for m in half_gaussian_baseline(t, ms, reg):
        assert kl_divergence(analytic_marginal(t, m.axis, m.support), m) <= 1e-6


def test_skewed_asymmetry_matches_skew_sign():
    # log-Gamma marginals have negative skew: the left side must be wider
    t = make_skewed(3, [1.0, 2.0, 5.0])
    ms = find_mode_hessian(t, [0.5] * 3)
    for f in half_gaussian_fits(t, ms):
        assert f.sigma_minus > f.sigma_plus


def test_baseline_continuous_and_normalized():
    t = make_skewed(2, [1.0, 3.0])
    ms = find_mode_hessian(t, [0.5, 0.5])
    for m in half_gaussian_baseline(t, ms):
        mu = m.params["mu"]
        eps = 1e-9
        assert m.density(mu - eps) == pytest.approx(m.density(mu + eps), rel=1e-6)
        assert m.integral() == pytest.approx(1.0, abs=1e-6)
    for m in half_gaussian_baseline(t, ms, scale=Scale.THETA):
        assert m.integral() == pytest.approx(1.0, abs=1e-6)


def test_bimodal_baseline_unimodal_and_worse_than_quintic():
    t = make_bimodal(5, 1, 6.0)
    modes = find_modes(t)
    reg = build_region(modes)
    best = max(modes, key=lambda m: m.log_density)
    hg = half_gaussian_baseline(t, best, reg)[1]
    assert len(hg.local_maxima()) == 1
    ps = scale_to_region(generate_korobov(512, 5, 19), reg)
    cx5 = marginalize_lds_cx(t, ps, 15, 5)[1]
    ref = analytic_marginal(t, 1)
    assert kl_divergence(ref, hg) > kl_divergence(ref, cx5)


def test_non_finite_slice_rejected():
    t = TargetDensity(1, lambda x: np.where(x[:, 0] < 0.6, -0.5 * x[:, 0] ** 2, -np.inf), (Reparam.IDENTITY,), "cut")
    ms = ModeSummary(np.array([0.0]), np.eye(1), np.array([1.0]), 0.0)
    with pytest.raises(ValueError):
        half_gaussian_fits(t, ms)


def test_dense_oracle_matches_analytic():
    t = make_gaussian([0.0, 1.0], np.diag([1.0, 0.5]))
    reg = build_region(find_modes(t))
    for m in dense_grid_oracle(t, reg, 41):
        assert m.method == "oracle"
        assert kl_divergence(analytic_marginal(t, m.axis, m.support), m) <= 1e-4


def test_dense_oracle_constant_is_uniform():
    t = TargetDensity(3, lambda x: np.zeros(len(x)), (Reparam.IDENTITY,) * 3, "constant")
    reg = IntegrationRegion([0, 0, 0], [1, 2, 4])
    for m in dense_grid_oracle(t, reg, 6):
        a, b = m.support
        assert np.allclose(m.density(np.linspace(a, b, 21)), 1 / (b - a), atol=1e-9, rtol=0)


def test_dense_oracle_budget_five_dimensions():
    c = Counting(make_gaussian(np.zeros(5), np.eye(5)))
    reg = IntegrationRegion([-3] * 5, [3] * 5)
    dense_grid_oracle(c, reg, 9)
    assert c.calls == 9**5 == 59049


def test_gaussian_baseline_oracle_analytic_agree():
    t = make_gaussian([0.0, 0.0], np.eye(2))
    ms = find_mode_hessian(t, [0.3, 0.3])
    reg = build_region(ms)
    hg = half_gaussian_baseline(t, ms, reg)
    orc = dense_grid_oracle(t, reg, 41)
    an = [analytic_marginal(t, k, reg.axis(k)) for k in range(2)]
    for k in range(2):
        trio = (hg[k], orc[k], an[k])
        for i in range(3):
            for j in range(3):
                if i != j:
                    assert kl_divergence(trio[i], trio[j]) <= 1e-3


def test_reference_prefers_analytic():
    t = make_skewed(2, [1.0, 2.0])
    reg = IntegrationRegion([-3, -3], [3, 3])
    assert all(m.method == "analytic" for m in reference_marginals(t, reg))
    bare = TargetDensity(2, t.log_density, t.reparam, "bare")
    assert all(m.method == "oracle" for m in reference_marginals(bare, reg, 7))
