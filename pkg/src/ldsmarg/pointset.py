"""Deterministic point sets on the unit cube: grids and Korobov lattices.

Korobov coordinates are produced with exact integer arithmetic,
``((i - 1) * alpha**(j - 1) mod N) / N``, so lattices of different sizes can
be compared exactly and thinned lattices coincide bit-for-bit with directly
generated ones.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import BudgetExceededError

DEFAULT_POINT_BUDGET = 10**7


class PointSetKind(str, enum.Enum):
    GRID = "grid"
    KOROBOV = "korobov"
    EXTENSIBLE_KOROBOV = "extensible-korobov"


@dataclass(frozen=True, eq=False)
class IntegrationRegion:
    """Half-open box ``[lower, upper)``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float).reshape(-1)
        upper = np.asarray(self.upper, dtype=float).reshape(-1)
        if lower.shape != upper.shape:
            raise ValueError("lower and upper must have the same length")
        if not np.all(lower < upper):
            raise ValueError(f"region needs lower < upper on every axis, got {lower} and {upper}")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def axis(self, k: int) -> tuple[float, float]:
        return float(self.lower[k]), float(self.upper[k])

    def contains(self, points) -> np.ndarray:
        pts = np.atleast_2d(points)
        return np.all((pts >= self.lower) & (pts < self.upper), axis=1)

    def to_list(self) -> list[list[float]]:
        return [[float(a), float(b)] for a, b in zip(self.lower, self.upper)]

    @classmethod
    def from_bounds(cls, bounds) -> "IntegrationRegion":
        """Build from ``[(a1, b1), (a2, b2), ...]``."""
        arr = np.asarray(bounds, dtype=float).reshape(-1, 2)
        return cls(arr[:, 0], arr[:, 1])


@dataclass(frozen=True, eq=False)
class PointSet:
    """N points in ``[0, 1)^s`` (``region is None``) or in a scaled region.

    Row order is deterministic: lexicographic in the grid indices for grids,
    lattice index order ``i = 1..N`` for Korobov kinds.
    """

    points: np.ndarray
    kind: PointSetKind
    big_n: int
    dim: int
    n_per_axis: Optional[int] = None
    alpha: Optional[int] = None
    region: Optional[IntegrationRegion] = field(default=None)

    def __len__(self):
        return self.big_n

    @property
    def is_lattice(self) -> bool:
        return self.kind in (PointSetKind.KOROBOV, PointSetKind.EXTENSIBLE_KOROBOV)

    @property
    def on_unit_cube(self) -> bool:
        return self.region is None


def generate_grid(n: int, s: int, budget: int = DEFAULT_POINT_BUDGET) -> PointSet:
    """Regular grid ``{(g_1/n, ..., g_s/n) : g_j = 0..n-1}`` in lexicographic order."""
    if n < 2:
        raise ValueError(f"grid needs n >= 2 abscissae per axis, got {n}")
    if s < 1:
        raise ValueError(f"dimension must be positive, got {s}")
    total = n**s
    if total > budget:
        raise BudgetExceededError(f"grid with n={n}, s={s} has {total} points, budget is {budget}")
    idx = np.indices((n,) * s).reshape(s, -1).T
    return PointSet(idx / n, PointSetKind.GRID, total, s, n_per_axis=n)


def korobov_generator(big_n: int, s: int, alpha: int) -> np.ndarray:
    """Generating vector ``(1, alpha, ..., alpha^(s-1)) mod N`` as integers."""
    return np.array([pow(alpha, j, big_n) for j in range(s)], dtype=np.int64)


def generate_korobov(big_n: int, s: int, alpha: int, extensible: bool = False) -> PointSet:
    """Korobov lattice with ``N`` points and generating constant ``alpha``."""
    if big_n < 2:
        raise ValueError(f"lattice needs N >= 2, got {big_n}")
    if s < 1:
        raise ValueError(f"dimension must be positive, got {s}")
    if not 1 <= alpha <= big_n - 1:
        raise ValueError(f"generating constant must lie in [1, {big_n - 1}], got {alpha}")
    if math.gcd(alpha, big_n) != 1:
        warnings.warn(
            f"alpha={alpha} is not coprime with N={big_n}; the lattice is not projection regular",
            stacklevel=2,
        )
    z = korobov_generator(big_n, s, alpha)
    i = np.arange(big_n, dtype=np.int64)[:, None]
    points = ((i * z[None, :]) % big_n) / big_n
    kind = PointSetKind.EXTENSIBLE_KOROBOV if extensible else PointSetKind.KOROBOV
    return PointSet(points, kind, big_n, s, alpha=alpha)


def thin_lattice(ps: PointSet, halvings: int) -> PointSet:
    """Keep lattice rows ``1, 1 + 2^h, 1 + 2*2^h, ...``.

    The result coincides with ``generate_korobov(N / 2^h, s, alpha mod (N / 2^h))``.
    """
    if not ps.is_lattice:
        raise ValueError("only Korobov lattices can be thinned")
    if halvings < 1:
        raise ValueError(f"halvings must be positive, got {halvings}")
    step = 2**halvings
    if ps.big_n % step:
        raise ValueError(f"N={ps.big_n} is not divisible by 2^{halvings}")
    new_n = ps.big_n // step
    new_alpha = ps.alpha % new_n if new_n > 1 else ps.alpha
    return replace(ps, points=ps.points[::step].copy(), big_n=new_n, alpha=new_alpha)


def _bernoulli2(x):
    return x * x - x + 1.0 / 6.0


def lattice_merit(big_n: int, s: int, alpha: int) -> float:
    """Equal-weight P2 figure of merit of a Korobov lattice (smaller is better).

    ``P2 = -1 + (1/N) sum_i prod_j (1 + 2 pi^2 B2(x_ij))``.
    """
    table = 1.0 + 2.0 * math.pi**2 * _bernoulli2(np.arange(big_n) / big_n)
    z = korobov_generator(big_n, s, alpha)
    idx = (np.arange(big_n, dtype=np.int64)[:, None] * z[None, :]) % big_n
    return math.fsum(np.prod(table[idx], axis=1)) / big_n - 1.0


def search_generating_constant(big_n: int, s: int, rtol: float = 1e-12) -> int:
    """Exhaustive search for the coprime ``alpha`` minimizing :func:`lattice_merit`.

    Merits within ``rtol`` of the best are treated as ties and resolved by
    the smallest ``alpha``.
    """
    if big_n < 4:
        raise ValueError(f"constant search needs N >= 4, got {big_n}")
    if s < 1:
        raise ValueError(f"dimension must be positive, got {s}")
    candidates = [a for a in range(1, big_n) if math.gcd(a, big_n) == 1]
    merits = np.array([lattice_merit(big_n, s, a) for a in candidates])
    best = merits.min()
    for a, m in zip(candidates, merits):
        if m <= best + rtol * abs(best):
            return a
    raise AssertionError("unreachable")


def scale_to_region(ps: PointSet, region: IntegrationRegion) -> PointSet:
    """Affine map ``u = a + (b - a) x`` of a unit-cube point set into ``region``."""
    if not ps.on_unit_cube:
        raise ValueError("point set is already scaled to a region")
    if region.dim != ps.dim:
        raise ValueError(f"region has dimension {region.dim}, point set has {ps.dim}")
    u = region.lower + region.widths * ps.points
    return replace(ps, points=u, region=region)


def unscale_from_region(ps: PointSet) -> PointSet:
    """Inverse of :func:`scale_to_region`."""
    if ps.region is None:
        return ps
    r = ps.region
    return replace(ps, points=(ps.points - r.lower) / r.widths, region=None)
