"""End-to-end experiment runs, convergence studies and their on-disk formats."""
from __future__ import annotations

import csv
import dataclasses
import json
import math
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .baselines import dense_grid_oracle, half_gaussian_baseline, reference_marginals
from .marginal import NODES, MarginalApprox, inverse_transform_marginal, to_descriptor
from .marginalize import grid_marginals, qa_marginals, stm_marginals
from .metrics import compare
from .pointset import (
    IntegrationRegion,
    PointSet,
    generate_grid,
    generate_korobov,
    scale_to_region,
    search_generating_constant,
    thin_lattice,
)
from .projection import evaluate_cloud
from .targets import ModeSummary, TargetDensity, build_region, find_modes, make_bimodal, make_gaussian, make_skewed

METHODS = ("grid", "stm", "qa", "cx", "half-gaussian", "oracle")


class ExperimentError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage


def _float_list(v: str) -> list[float]:
    return [float(x) for x in v.split(",") if x]


def parse_target(spec: str) -> TargetDensity:
    """Build a target from ``name:key=value,...``; list values continue across commas.

    ``gaussian:dim=5,sd=1,2,rho=0.3``, ``skewed:shapes=1,2,3,4,5`` and
    ``bimodal:dim=5,axis=2,sep=6,w=0.5`` (``axis`` counts from 1).
    """
    name, _, rest = spec.partition(":")
    params: dict[str, str] = {}
    key = None
    for tok in filter(None, rest.split(",")):
        if "=" in tok:
            key, val = tok.split("=", 1)
            params[key.strip()] = val.strip()
        elif key is None:
            raise ValueError(f"malformed target spec {spec!r}")
        else:
            params[key] += "," + tok.strip()

    def take(allowed):
        unknown = set(params) - set(allowed)
        if unknown:
            raise ValueError(f"unknown parameters {sorted(unknown)} for target {name!r}")

    name = name.strip()
    if name == "gaussian":
        take({"dim", "mean", "sd", "rho"})
        dim = int(params.get("dim", 2))
        mean = np.broadcast_to(_float_list(params.get("mean", "0")), (dim,))
        sd = np.broadcast_to(_float_list(params.get("sd", "1")), (dim,))
        rho = float(params.get("rho", 0.0))
        corr = np.full((dim, dim), rho)
        np.fill_diagonal(corr, 1.0)
        return make_gaussian(mean, corr * np.outer(sd, sd), label=spec)
    if name == "skewed":
        take({"shapes"})
        shapes = _float_list(params.get("shapes", "1,2,3,4,5"))
        return make_skewed(len(shapes), shapes, label=spec)
    if name == "bimodal":
        take({"dim", "axis", "sep", "w"})
        dim = int(params.get("dim", 5))
        return make_bimodal(dim, int(params.get("axis", 2)) - 1, float(params.get("sep", 6.0)),
                            float(params.get("w", 0.5)), label=spec)
    raise ValueError(f"unknown target {name!r}; expected gaussian, skewed or bimodal")


@dataclass
class ExperimentConfig:
    target: str = "skewed:shapes=1,2,3,4,5"
    method: str = "cx"
    point_kind: str = "korobov"
    points: int = 512
    alpha: Optional[int] = 19
    extensible: bool = True
    thin: int = 0
    grid_n: int = 4
    partitions: int = 15
    degree: int = 3
    stm_degree: int = 8
    region_sd: float = 3.0
    region: Optional[list] = None
    metric_grid: int = 1001
    oracle_grid: int = 9
    compare: bool = True
    out: str = "out"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.point_kind not in ("korobov", "grid"):
            raise ValueError(f"unknown point kind {self.point_kind!r}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class RunManifest:
    config: dict
    version: str
    files: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    evaluations: dict = field(default_factory=dict)
    runge_warnings: list = field(default_factory=list)
    comparison: Optional[str] = None

    @property
    def evaluation_count(self) -> int:
        return self.evaluations.get("cloud", 0) + self.evaluations.get("oracle", 0)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["evaluation_count"] = self.evaluation_count
        return d


class _CountingTarget:
    """Wraps a target and counts evaluated points per stage."""

    def __init__(self, target: TargetDensity):
        self.target = target
        self.counts: dict[str, int] = {}
        self.stage = "mode"

    def __getattr__(self, name):
        return getattr(self.target, name)

    def log_density(self, x):
        x = np.asarray(x, dtype=float)
        n = 1 if x.ndim == 1 else x.shape[0]
        self.counts[self.stage] = self.counts.get(self.stage, 0) + n
        return self.target.log_density(x)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return self.log_density(x[None, :])[0]
        return self.log_density(x)


@contextmanager
def _stage(name: str, timings: dict, counter: Optional[_CountingTarget] = None, count_as: Optional[str] = None):
    if counter is not None:
        counter.stage = count_as or name
    t0 = time.perf_counter()
    try:
        yield
    except ExperimentError:
        raise
    except Exception as exc:
        raise ExperimentError(name, exc) from exc
    finally:
        timings[name] = timings.get(name, 0.0) + time.perf_counter() - t0


def build_point_set(cfg: ExperimentConfig, dim: int) -> PointSet:
    if cfg.point_kind == "grid":
        return generate_grid(cfg.grid_n, dim)
    alpha = cfg.alpha if cfg.alpha is not None else search_generating_constant(cfg.points, dim)
    ps = generate_korobov(cfg.points, dim, alpha, cfg.extensible)
    return thin_lattice(ps, cfg.thin) if cfg.thin else ps


def integration_region(cfg: ExperimentConfig, target, modes: Optional[list[ModeSummary]] = None) -> IntegrationRegion:
    if cfg.region is not None:
        return IntegrationRegion.from_bounds(cfg.region)
    return build_region(modes if modes is not None else find_modes(target), cfg.region_sd)


def compute_marginals(cfg: ExperimentConfig, target, region: IntegrationRegion, ps: Optional[PointSet] = None,
                      modes: Optional[list[ModeSummary]] = None) -> list[MarginalApprox]:
    """Marginals in the ``theta_z`` scale for the configured method."""
    m = cfg.method
    if m == "half-gaussian":
        modes = modes if modes is not None else find_modes(target)
        best = max(modes, key=lambda s: s.log_density)
        return half_gaussian_baseline(target, best, region)
    if m == "oracle":
        return dense_grid_oracle(target, region, cfg.oracle_grid)
    if m == "grid":
        if cfg.grid_n < 4:
            raise ValueError(f"grid method needs at least 4 abscissae per axis, got {cfg.grid_n}")
        return grid_marginals(evaluate_cloud(target, scale_to_region(generate_grid(cfg.grid_n, target.dim), region)),
                              target.reparam)
    if ps is None:
        ps = scale_to_region(build_point_set(cfg, target.dim), region)
    cloud = evaluate_cloud(target, ps)
    if m == "stm":
        return stm_marginals(cloud, target.reparam, cfg.stm_degree)
    if cfg.partitions < 3:
        raise ValueError(f"LDS-QA needs at least three partitions, got {cfg.partitions}")
    return qa_marginals(cloud, target.reparam, cfg.partitions, cfg.degree if m == "cx" else None)


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_marginal(m: MarginalApprox, out: Path, stem: str) -> dict:
    desc_path = out / f"{stem}.json"
    desc_path.write_text(json.dumps(to_descriptor(m), indent=2) + "\n")
    csv_path = out / f"{stem}.csv"
    mt = inverse_transform_marginal(m)
    z = m.nodes(NODES)
    theta = mt.nodes(NODES)
    with csv_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theta_z", "density_theta_z", "theta", "density_theta"])
        for row in zip(z, m.density(z), theta, mt.density(theta)):
            w.writerow([_fmt(v) for v in row])
    return {"axis": m.axis + 1, "descriptor": desc_path.name, "table": csv_path.name}


def write_comparison(rows, path: Path) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["axis", "kl", "hellinger"])
        for r in rows:
            w.writerow([r.axis + 1, _fmt(r.kl), _fmt(r.hellinger)])


def run_experiment(cfg: ExperimentConfig) -> RunManifest:
    """Run one configured marginalization, write per-axis files, a comparison table and a manifest."""
    manifest = RunManifest(cfg.to_dict(), __version__)
    timings = manifest.timings
    with _stage("target", timings):
        counter = _CountingTarget(parse_target(cfg.target))
    with _stage("region", timings, counter, "mode"):
        modes = find_modes(counter) if cfg.region is None or cfg.method == "half-gaussian" else None
        region = integration_region(cfg, counter, modes)
    with _stage("marginalize", timings, counter, "cloud"):
        margs = compute_marginals(cfg, counter, region, modes=modes)
    manifest.runge_warnings = [m.runge_warning for m in margs]
    out = Path(cfg.out)
    with _stage("write", timings):
        out.mkdir(parents=True, exist_ok=True)
        for m in margs:
            manifest.files.append(write_marginal(m, out, f"axis{m.axis + 1}_{cfg.method}"))
    if cfg.compare:
        with _stage("reference", timings, counter, "oracle"):
            refs = reference_marginals(counter, region, cfg.oracle_grid)
        with _stage("compare", timings):
            rows = [compare(r, m, cfg.metric_grid) for r, m in zip(refs, margs)]
            write_comparison(rows, out / "comparison.csv")
            manifest.comparison = "comparison.csv"
    manifest.evaluations = dict(counter.counts)
    (out / "manifest.json").write_text(json.dumps(manifest.to_dict(), indent=2) + "\n")
    return manifest


@dataclass(frozen=True)
class StudyRow:
    method: str
    big_n: int
    axis: int
    kl: float
    hellinger: float
    walltime_ms: float


def convergence_study(cfg: ExperimentConfig, sizes: Sequence[int] = (64, 128, 256, 512, 1024),
                      methods: Sequence[str] = ("qa", "cx")) -> list[StudyRow]:
    """Per-axis distances to the reference for lattices of several sizes and budget-matched grids.

    Smaller lattices are obtained by thinning the largest one, so every size
    reuses the same nested point set.
    """
    target = parse_target(cfg.target)
    region = integration_region(cfg, target)
    refs = reference_marginals(target, region, cfg.oracle_grid)
    sizes = sorted(sizes)
    top = sizes[-1]
    alpha = cfg.alpha if cfg.alpha is not None else search_generating_constant(top, target.dim)
    parent = generate_korobov(top, target.dim, alpha, extensible=True)
    rows: list[StudyRow] = []

    def record(method, n_pts, margs, elapsed):
        for r, m in zip(refs, margs):
            d = compare(r, m, cfg.metric_grid)
            rows.append(StudyRow(method, n_pts, m.axis + 1, d.kl, d.hellinger, elapsed * 1e3))

    for n_pts in sizes:
        halvings = int(round(math.log2(top // n_pts)))
        if top // n_pts != 2**halvings or top % n_pts:
            raise ValueError(f"size {n_pts} is not a power-of-two fraction of {top}")
        ps = thin_lattice(parent, halvings) if halvings else parent
        for method in methods:
            sub = dataclasses.replace(cfg, method=method, region=region.to_list())
            t0 = time.perf_counter()
            margs = compute_marginals(sub, target, region, scale_to_region(ps, region))
            record(method, n_pts, margs, time.perf_counter() - t0)
    n = 4
    while n**target.dim <= top:
        sub = dataclasses.replace(cfg, method="grid", grid_n=n, region=region.to_list())
        t0 = time.perf_counter()
        margs = compute_marginals(sub, target, region)
        record("grid", n**target.dim, margs, time.perf_counter() - t0)
        n += 1
    return rows


def write_study(rows: Sequence[StudyRow], path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "N", "axis", "kl", "hellinger", "walltime_ms"])
        for r in rows:
            w.writerow([r.method, r.big_n, r.axis, _fmt(r.kl), _fmt(r.hellinger), _fmt(r.walltime_ms)])
