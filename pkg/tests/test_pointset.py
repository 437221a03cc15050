import json
import math
import warnings
from fractions import Fraction
from pathlib import Path

import mpmath
import numpy as np
import pytest

from ldsmarg.errors import BudgetExceededError
from ldsmarg.pointset import (
    IntegrationRegion,
    PointSetKind,
    generate_grid,
    generate_korobov,
    lattice_merit,
    scale_to_region,
    search_generating_constant,
    thin_lattice,
    unscale_from_region,
)

GOLDEN = Path(__file__).parent / "golden"


def as_fractions(ps):
    # every coordinate is k/N with N a power of two or small, so this is exact
    return [tuple(Fraction(v).limit_denominator(ps.big_n) for v in row) for row in ps.points]


def test_grid_two_by_two():
    ps = generate_grid(2, 2)
    assert ps.points.tolist() == [[0, 0], [0, 0.5], [0.5, 0], [0.5, 0.5]]
    assert ps.kind is PointSetKind.GRID and ps.big_n == 4


def test_grid_one_dimensional_and_eight_point():
    assert generate_grid(2, 1).points.tolist() == [[0.0], [0.5]]
    ps = generate_grid(8, 2)
    assert len(ps) == 64
    assert len({tuple(p) for p in ps.points}) == 64
    assert np.all((ps.points >= 0) & (ps.points < 1))


def test_grid_errors():
    with pytest.raises(ValueError):
        generate_grid(1, 3)
    with pytest.raises(BudgetExceededError):
        generate_grid(10, 8)
    with pytest.raises(BudgetExceededError):
        generate_grid(4, 5, budget=1000)


def test_korobov_points():
    ps = generate_korobov(64, 2, 37)
    assert ps.points[0].tolist() == [0.0, 0.0]
    assert ps.points[1].tolist() == [0.015625, 0.578125]
    # independent evaluation with Python integers
    for i in range(64):
        for j in range(2):
            assert ps.points[i, j] == ((i * 37**j) % 64) / 64


def test_korobov_large_alpha_powers_are_exact():
    n, a, s = 1021, 1000, 6
    ps = generate_korobov(n, s, a)
    i = 777
    assert ps.points[i].tolist() == [((i * a**j) % n) / n for j in range(s)]


def test_korobov_projection_regular():
    ps = generate_korobov(512, 5, 19)
    expected = np.arange(512) / 512
    for k in range(5):
        assert np.array_equal(np.sort(ps.points[:, k]), expected)


def test_korobov_errors_and_warning():
    with pytest.raises(ValueError):
        generate_korobov(64, 2, 0)
    with pytest.raises(ValueError):
        generate_korobov(64, 2, 64)
    with pytest.warns(UserWarning, match="coprime"):
        generate_korobov(64, 2, 6)


def test_thin_matches_direct_generation():
    parent = generate_korobov(64, 2, 19, extensible=True)
    half = thin_lattice(parent, 1)
    assert as_fractions(half) == as_fractions(generate_korobov(32, 2, 19, extensible=True))
    assert half.big_n == 32 and half.alpha == 19


def test_thin_two_halvings_is_every_fourth_row():
    parent = generate_korobov(64, 2, 19, extensible=True)
    q = thin_lattice(parent, 2)
    assert len(q) == 16
    assert np.array_equal(q.points, parent.points[[4 * m for m in range(16)]])
    assert as_fractions(q) == as_fractions(generate_korobov(16, 2, 19 % 16))


def test_thin_to_single_point():
    q = thin_lattice(generate_korobov(64, 3, 19), 6)
    assert q.points.tolist() == [[0.0, 0.0, 0.0]]


def test_thin_errors():
    with pytest.raises(ValueError):
        thin_lattice(generate_grid(4, 2), 1)
    with pytest.raises(ValueError):
        thin_lattice(generate_korobov(48, 2, 5), 5)
    with pytest.raises(ValueError):
        thin_lattice(generate_korobov(64, 2, 19), 0)


def _merit_oracle(n, s, a):
    mpmath.mp.dps = 40
    total = mpmath.mpf(0)
    for i in range(n):
        prod = mpmath.mpf(1)
        for j in range(s):
            x = Fraction((i * pow(a, j, n)) % n, n)
            b2 = x * x - x + Fraction(1, 6)
            prod *= 1 + 2 * mpmath.pi**2 * mpmath.mpf(b2.numerator) / b2.denominator
        total += prod
    return float(total / n - 1)


def test_merit_matches_high_precision_oracle():
    for a in (1, 3, 5, 7):
        assert lattice_merit(8, 2, a) == pytest.approx(_merit_oracle(8, 2, a), rel=1e-13)


def test_search_small_cases():
    # brute force over {1, 3, 5, 7}: 3 and 5 tie, smallest wins
    assert search_generating_constant(8, 2) == 3
    assert search_generating_constant(4, 1) == 1
    with pytest.raises(ValueError):
        search_generating_constant(3, 2)


def test_search_golden_64_2():
    golden = json.loads((GOLDEN / "generating_constant_64_2.json").read_text())
    assert search_generating_constant(64, 2) == golden["alpha"]
    merits = [lattice_merit(64, 2, a) for a in golden["tied_optima"]]
    assert max(merits) - min(merits) <= 1e-12 * max(merits)


def test_scale_examples():
    ps = generate_grid(2, 2)
    reg = IntegrationRegion([-1, -1], [1, 1])
    assert scale_to_region(ps, reg).points[0].tolist() == [-1.0, -1.0]
    one = ps.__class__(np.array([[0.5, 0.25]]), PointSetKind.GRID, 1, 2, n_per_axis=1)
    out = scale_to_region(one, IntegrationRegion([0, 10], [2, 20]))
    assert out.points.tolist() == [[1.0, 12.5]]


def test_scale_roundtrip_within_one_ulp():
    ps = generate_korobov(256, 3, 19)
    reg = IntegrationRegion([-3.7, 0.1, -1e3], [2.2, 0.3, 5e2])
    scaled = scale_to_region(ps, reg)
    assert np.all(reg.contains(scaled.points))
    back = unscale_from_region(scaled).points
    assert np.all(np.abs(back - ps.points) <= np.spacing(np.maximum(np.abs(ps.points), 1.0)))


def test_scale_errors():
    with pytest.raises(ValueError):
        scale_to_region(generate_grid(2, 2), IntegrationRegion([0, 0, 0], [1, 1, 1]))
    with pytest.raises(ValueError):
        IntegrationRegion([0, 1], [1, 1])


def test_deterministic():
    a = generate_korobov(1024, 5, 19)
    b = generate_korobov(1024, 5, 19)
    assert a.points.tobytes() == b.points.tobytes()


def test_gcd_warning_not_raised_for_coprime():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        generate_korobov(64, 2, 37)
    assert math.gcd(37, 64) == 1
