"""Command-line interface: ``ldsmarg {points,project,marginalize,compare,study}``."""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .experiment import (
    METHODS,
    ExperimentConfig,
    ExperimentError,
    _fmt,
    convergence_study,
    integration_region,
    parse_target,
    run_experiment,
    write_study,
)
from .marginal import Scale, from_descriptor
from .metrics import DEFAULT_GRID, compare
from .pointset import (
    IntegrationRegion,
    generate_grid,
    generate_korobov,
    scale_to_region,
    search_generating_constant,
    thin_lattice,
)
from .projection import evaluate_cloud, partition_means, project_axis


def _region_arg(text: str) -> list:
    """``a1,b1,a2,b2,...`` into ``[[a1, b1], [a2, b2], ...]``."""
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad region {text!r}; expected a1,b1,a2,b2,...") from exc
    if len(vals) % 2:
        raise argparse.ArgumentTypeError(f"region {text!r} needs an even number of bounds")
    return [vals[i:i + 2] for i in range(0, len(vals), 2)]


def _open_out(path: Optional[str]):
    return open(path, "w", newline="") if path else sys.stdout


def _cmd_points(args) -> None:
    if args.kind == "grid":
        ps = generate_grid(args.n, args.dim)
    else:
        alpha = args.alpha if args.alpha is not None else search_generating_constant(args.n, args.dim)
        ps = generate_korobov(args.n, args.dim, alpha, args.extensible)
        if args.thin:
            ps = thin_lattice(ps, args.thin)
    if args.region is not None:
        ps = scale_to_region(ps, IntegrationRegion.from_bounds(args.region))
    fh = _open_out(args.out)
    try:
        w = csv.writer(fh)
        w.writerow([f"x{j + 1}" for j in range(ps.dim)])
        for row in ps.points:
            w.writerow([_fmt(v) for v in row])
    finally:
        if fh is not sys.stdout:
            fh.close()


def _config_from_args(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if getattr(args, "config", None) else ExperimentConfig()
    overrides = {
        "target": args.target,
        "method": getattr(args, "method", None),
        "points": args.points,
        "alpha": args.alpha,
        "partitions": args.partitions,
        "degree": getattr(args, "degree", None),
        "stm_degree": getattr(args, "stm_degree", None),
        "grid_n": getattr(args, "grid_n", None),
        "region_sd": args.region_sd,
        "region": args.region,
        "oracle_grid": getattr(args, "oracle_grid", None),
        "out": getattr(args, "out", None),
    }
    d = cfg.to_dict()
    d.update({k: v for k, v in overrides.items() if v is not None})
    if getattr(args, "search_alpha", False):
        d["alpha"] = None
    if getattr(args, "no_compare", False):
        d["compare"] = False
    return ExperimentConfig.from_dict(d)


def _cmd_project(args) -> None:
    cfg = _config_from_args(args)
    target = parse_target(cfg.target)
    region = integration_region(cfg, target)
    alpha = cfg.alpha if cfg.alpha is not None else search_generating_constant(cfg.points, target.dim)
    ps = scale_to_region(generate_korobov(cfg.points, target.dim, alpha), region)
    cloud = evaluate_cloud(target, ps)
    fh = _open_out(args.out)
    try:
        w = csv.writer(fh)
        w.writerow(["axis", "partition", "midpoint", "count", "log_mean"])
        for k in range(target.dim):
            psum = partition_means(project_axis(cloud, k), cfg.partitions, *region.axis(k))
            for u in range(psum.n):
                w.writerow([k + 1, u + 1, _fmt(psum.midpoints[u]), int(psum.counts[u]), _fmt(psum.log_means[u])])
    finally:
        if fh is not sys.stdout:
            fh.close()


def _cmd_marginalize(args) -> None:
    cfg = _config_from_args(args)
    if args.save_config:
        cfg.save(args.save_config)
    manifest = run_experiment(cfg)
    print(json.dumps({"out": cfg.out, "files": manifest.files, "runge_warnings": manifest.runge_warnings}))


def _descriptors(path: Path) -> dict:
    files = sorted(path.glob("*.json")) if path.is_dir() else [path]
    out = {}
    for f in files:
        d = json.loads(f.read_text())
        if isinstance(d, dict) and "schema" in d and "params" in d:
            out[int(d["axis"])] = d
    if not out:
        raise ValueError(f"no marginal descriptors found in {path}")
    return out


def _cmd_compare(args) -> None:
    ref, approx = _descriptors(Path(args.reference)), _descriptors(Path(args.approx))
    axes = sorted(set(ref) & set(approx))
    if not axes:
        raise ValueError("the two inputs share no axis")
    scale = Scale(args.scale)
    fh = _open_out(args.out)
    try:
        w = csv.writer(fh)
        w.writerow(["axis", "kl", "hellinger"])
        for k in axes:
            r = compare(from_descriptor(ref[k], scale), from_descriptor(approx[k], scale), args.grid)
            w.writerow([k, _fmt(r.kl), _fmt(r.hellinger)])
    finally:
        if fh is not sys.stdout:
            fh.close()


def _cmd_study(args) -> None:
    cfg = _config_from_args(args)
    sizes = [int(v) for v in args.sizes.split(",")]
    methods = [m.strip() for m in args.methods.split(",")]
    rows = convergence_study(cfg, sizes, methods)
    write_study(rows, args.out)


def _add_target_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--target", help="e.g. gaussian:dim=5, skewed:shapes=1,2,3,4,5, bimodal:dim=5,axis=2,sep=6")
    p.add_argument("--points", type=int, help="lattice size N")
    p.add_argument("--alpha", type=int, help="generating constant (default: configured value)")
    p.add_argument("--search-alpha", action="store_true", help="pick the generating constant by merit search")
    p.add_argument("--partitions", type=int, help="number of partitions per axis")
    p.add_argument("--region-sd", type=float, help="half-width of the region in mode standard deviations")
    p.add_argument("--region", type=_region_arg, help="explicit region a1,b1,a2,b2,...")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ldsmarg", description="Marginal densities from low-discrepancy point sets.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("points", help="write a grid or Korobov point set as CSV")
    p.add_argument("--kind", choices=("grid", "korobov"), default="korobov")
    p.add_argument("--n", type=int, required=True, help="N for lattices, points per axis for grids")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--alpha", type=int)
    p.add_argument("--extensible", action="store_true")
    p.add_argument("--thin", type=int, default=0, help="number of halvings")
    p.add_argument("--region", type=_region_arg)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_points)

    p = sub.add_parser("project", help="per-partition log pointwise means as CSV")
    _add_target_args(p)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_project)

    p = sub.add_parser("marginalize", help="run one marginalization and write descriptors, tables and a manifest")
    _add_target_args(p)
    p.add_argument("--config", help="JSON experiment configuration")
    p.add_argument("--save-config", help="write the effective configuration here")
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--degree", type=int, help="correction degree for cx")
    p.add_argument("--stm-degree", type=int)
    p.add_argument("--grid-n", type=int)
    p.add_argument("--oracle-grid", type=int)
    p.add_argument("--no-compare", action="store_true")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=_cmd_marginalize)

    p = sub.add_parser("compare", help="KL and Hellinger distances between two sets of marginal descriptors")
    p.add_argument("reference", help="descriptor file or directory")
    p.add_argument("approx", help="descriptor file or directory")
    p.add_argument("--grid", type=int, default=DEFAULT_GRID)
    p.add_argument("--scale", choices=[s.value for s in Scale], default=Scale.THETA_Z.value)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("study", help="distance versus point count for nested lattices and matched grids")
    _add_target_args(p)
    p.add_argument("--config")
    p.add_argument("--sizes", default="64,128,256,512,1024")
    p.add_argument("--methods", default="qa,cx")
    p.add_argument("--degree", type=int)
    p.add_argument("--oracle-grid", type=int)
    p.add_argument("--out", required=True, help="CSV file")
    p.set_defaults(func=_cmd_study)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with np.errstate(all="ignore"):
            args.func(args)
    except ExperimentError as exc:
        print(f"ldsmarg: error in stage {exc.stage}: {exc.__cause__}", file=sys.stderr)
        return 1
    except (ValueError, RuntimeError, OSError, KeyError) as exc:
        print(f"ldsmarg: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
