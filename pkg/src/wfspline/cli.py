"""Command-line interface.

Verbs: ``gen-meshes``, ``convergence``, ``conserve``, ``sample``,
``split-inspect`` and ``coeffs``.  Exit status is 0 on success, 2 when a
convergence study misses its order bands and 1 on any error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .coefficients import coefficient_domain_points, compute_macro_coefficients
from .fields import FIELDS, get_field
from .meshgen import generate_sequence
from .mshio import load_mesh
from .quadrature import AdaptiveConfig
from .smoothing import build_edge_frames, synchronize
from .split import build_splits
from .study import check_orders, load_grid, run_conservation, run_convergence, run_sample
from .transfer import THREADS_ENV, TransferConfig, build_source_spline, project_analytic, transfer

log = logging.getLogger("wfspline")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VALIDATION = 2


def parse_grids(text: str) -> list[int]:
    """``"1..3"`` -> [1, 2, 3]; ``"2"`` -> [2]; ``"1,3"`` -> [1, 3]."""
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            lo, hi = int(a), int(b)
            if hi < lo:
                raise ValueError
            return list(range(lo, hi + 1))
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid grid range {text!r} (expected e.g. 1..3)") from None


def _common(p: argparse.ArgumentParser, grids: str | None = "1..3") -> None:
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: out)")
    p.add_argument("--meshes", type=Path, default=Path("meshes"), help="mesh directory (default: meshes)")
    p.add_argument("--seed", type=int, default=0, help="random seed for mesh generation")
    p.add_argument("--threads", type=int, default=None, help=f"worker threads (default: ${THREADS_ENV} or 1)")
    if grids is not None:
        p.add_argument("--grids", type=parse_grids, default=parse_grids(grids), help=f"grid levels a..b (default {grids})")


def _transfer_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--field", choices=sorted(FIELDS), default="u1")
    p.add_argument("--k", type=int, choices=(1, 2), default=1, help="target polynomial degree")
    p.add_argument("--method", choices=("wf", "linear", "l2"), default="wf")
    p.add_argument("--spline", choices=("c1", "c0"), default=None, help="spline mode for wf (default c1)")
    p.add_argument("--quad", choices=("fixed", "adaptive"), default=None, help="projection quadrature (default fixed)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wfspline", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("gen-meshes", help="write source/target mesh sequences")
    _common(p)
    p.set_defaults(out=Path("meshes"))
    p.add_argument("--jitter", type=float, default=0.15, help="vertex perturbation (fraction of half-spacing)")

    p = sub.add_parser("convergence", help="L2 error and observed order of a transfer over grid levels")
    _common(p)
    _transfer_opts(p)

    p = sub.add_parser("conserve", help="per-step mass change table")
    _common(p, grids="1")
    _transfer_opts(p)

    p = sub.add_parser("sample", help="sample a field on a tensor Gauss lattice (VTK + CSV)")
    _common(p, grids="1")
    _transfer_opts(p)
    p.add_argument("--n", type=int, default=33, help="points per axis (default 33)")
    p.add_argument("--source", choices=("analytic", "projected", "spline", "transferred"), default="analytic",
                   help="what to sample (default: the analytic field)")
    p.add_argument("--vtk", choices=("structured_points", "rectilinear"), default="structured_points")

    p = sub.add_parser("split-inspect", help="print the WF split of one element")
    _common(p, grids="1")
    p.add_argument("--mesh", type=Path, default=None, help="MSH file (default: source mesh of the first grid)")
    p.add_argument("--elem", type=int, default=1, help="1-based element number")

    p = sub.add_parser("coeffs", help="print the 91 WF coefficients of one element")
    _common(p, grids="1")
    p.add_argument("--mesh", type=Path, default=None, help="MSH file (default: source mesh of the first grid)")
    p.add_argument("--elem", type=int, default=1, help="1-based element number")
    p.add_argument("--field", choices=sorted(FIELDS), default="u1")
    p.add_argument("--k", type=int, choices=(1, 2, 3), default=1, help="degree of the projected source field")
    return ap


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _config(args) -> TransferConfig:
    return TransferConfig(k=args.k, quad=args.quad or "fixed", spline=args.spline or "c1", threads=_threads(args))


def _single_mesh(args):
    if args.mesh is not None:
        return load_mesh(args.mesh)
    return load_grid(args.meshes, args.grids[0])[0]


def _element(mesh, args) -> int:
    if not 1 <= args.elem <= mesh.n_elements:
        raise ValueError(f"element {args.elem} out of range 1..{mesh.n_elements}")
    return args.elem - 1


def cmd_gen_meshes(args) -> int:
    for level, ps, pt in generate_sequence(args.out, args.grids, seed=args.seed, jitter=args.jitter):
        src, tgt = load_mesh(ps), load_mesh(pt)
        print(f"level {level}: {ps} ({src.n_elements} tets, h={src.h:.6f})  {pt} ({tgt.n_elements} tets, h={tgt.h:.6f})")
    return EXIT_OK


def cmd_convergence(args) -> int:
    u = get_field(args.field)
    rep = run_convergence(u, args.grids, args.k, args.method, mesh_dir=args.meshes, cfg=_config(args))
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / f"convergence_{args.field}_{args.method}_k{args.k}.csv"
    rep.to_csv(path)
    print(rep.pretty())
    print(f"wrote {path}")
    if args.method == "wf" and args.field == "u1" and len(args.grids) > 1:
        problems = check_orders(rep, args.k)
        for msg in problems:
            print(f"ORDER CHECK FAILED: {msg}", file=sys.stderr)
        if problems:
            return EXIT_VALIDATION
    return EXIT_OK


def cmd_conserve(args) -> int:
    u = get_field(args.field)
    level = args.grids[0]
    src, tgt = load_grid(args.meshes, level)
    if args.method == "wf" and args.spline is None and args.quad is None:
        variants = None  # the three standard columns
    else:
        cfg = _config(args)
        name = f"{args.method}_{cfg.spline}_{cfg.quad}" if args.method == "wf" else f"{args.method}_{cfg.quad}"
        variants = ((name, args.method, {"spline": cfg.spline, "quad": cfg.quad}),)
    rep = run_conservation(u, src, tgt, args.k, variants, AdaptiveConfig(), _threads(args))
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / f"conservation_{args.field}_grid{level}_k{args.k}.csv"
    rep.to_csv(path)
    print(f"source mass {rep.meta['source_mass']:.14e}")
    print(rep.pretty())
    print(f"wrote {path}")
    return EXIT_OK


def cmd_sample(args) -> int:
    u = get_field(args.field)
    if args.source == "analytic":
        evaluate = lambda x: (u(x), u.grad(x))  # noqa: E731
        name = f"{args.field}_analytic_n{args.n}"
    else:
        level = args.grids[0]
        src, tgt = load_grid(args.meshes, level)
        cfg = _config(args)
        field0 = project_analytic(u, src, args.k)
        if args.source == "projected":
            obj = field0
        elif args.source == "spline":
            obj = build_source_spline(field0, cfg.spline)
        else:
            obj = transfer(args.method, field0, tgt, cfg)
        evaluate = lambda x: obj.evaluate(x, gradient=True)  # noqa: E731
        name = f"{args.field}_{args.source}_grid{level}_k{args.k}_n{args.n}"
    pts, vals, _ = run_sample(evaluate, args.n, args.out, name, vtk_kind=args.vtk)
    print(f"{len(pts)} samples -> {args.out / (name + '.vtk')}, {args.out / (name + '.csv')}")
    return EXIT_OK


def cmd_split_inspect(args) -> int:
    mesh = _single_mesh(args)
    e = _element(mesh, args)
    split = build_splits(mesh).element(mesh, e)
    np.set_printoptions(precision=15, floatmode="maxprec")
    print(f"element {args.elem}: vertices {mesh.tets[e] + 1}")
    for k, p in enumerate(split.vertices):
        print(f"  p{k + 1} = {p}")
    print(f"  incenter = {split.incenter}  kappa = {split.kappa}")
    for j, (q, s) in enumerate(zip(split.split_points, split.sigma)):
        print(f"  split point {j + 1} = {q}  sigma = {s}")
    vols = split.volumes
    for a, v in enumerate(vols):
        print(f"  subtet {a + 1:2d}: volume {v:.15e}")
    print(f"  sum of subtet volumes {vols.sum():.15e}  element volume {mesh.volumes[e]:.15e}")
    return EXIT_OK


def cmd_coeffs(args) -> int:
    mesh = _single_mesh(args)
    e = _element(mesh, args)
    u = get_field(args.field)
    field0 = project_analytic(u, mesh, args.k)
    data = synchronize(field0, build_edge_frames(mesh))
    split = build_splits(mesh).element(mesh, e)
    c = compute_macro_coefficients(split, data[e])
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / f"coeffs_{args.field}_elem{args.elem}.csv"
    xyz = coefficient_domain_points(split)
    lines = ["index,x,y,z,value"]
    for i in range(1, 92):
        x, y, z = xyz[i - 1]
        lines.append(f"{i},{x:.14e},{y:.14e},{z:.14e},{c[i]:.14e}")
        print(f"c{i:<3d} ({x: .6f}, {y: .6f}, {z: .6f})  {c[i]: .14e}")
    path.write_text("\n".join(lines) + "\n")
    print(f"wrote {path}")
    return EXIT_OK


COMMANDS = {
    "gen-meshes": cmd_gen_meshes,
    "convergence": cmd_convergence,
    "conserve": cmd_conserve,
    "sample": cmd_sample,
    "split-inspect": cmd_split_inspect,
    "coeffs": cmd_coeffs,
}


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.verb](args)
    except Exception as exc:  # report, don't trace, unless verbose
        if args.verbose:
            log.exception("failed")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
