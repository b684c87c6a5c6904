"""Command-line surface tying the pipeline together.

Subcommands: gengt (graph → ground-truth grids), loss, gradcheck, extract
(prediction → graph file), eval (five metrics), selftest. Output is
machine-parseable ``key=value`` lines; grids travel as GRDF files and graphs
as the shared text format (flattened, geometry-free).

Exit codes: 0 success, 1 failed check (gradcheck/selftest), 2 usage error,
3 I/O or format error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .annotate import build_ground_truth, format_graph, parse_graph
from .extract import extract_graph, flatten
from .gridfile import read_grid, write_grid, write_labels, write_mask
from .loss import LossConfig, grad_check, total_loss
from .metrics import MetricConfig, evaluate
from .selftest import run_selftest

GRAD_TOL = 1e-3


def _read_graph(path: str):
    return parse_graph(Path(path).read_text())


def _cmd_gengt(args: argparse.Namespace) -> int:
    graph = _read_graph(args.graph)
    gt = build_ground_truth(graph, args.width, args.height, args.dilate, args.dmax)
    write_grid(args.out_dist, gt.dist)
    if args.out_region:
        write_mask(args.out_region, gt.region)
    if args.out_labels:
        write_labels(args.out_labels, gt.labels)
    return 0


def _cmd_loss(args: argparse.Namespace) -> int:
    pred = read_grid(args.pred)
    graph = _read_graph(args.gt_graph)
    gt = build_ground_truth(graph, pred.width, pred.height)
    mode = "global" if getattr(args, "global") else "windowed"
    cfg = LossConfig(alpha=args.alpha, beta=args.beta, window=args.window, mode=mode)
    out = total_loss(pred, gt, cfg, threads=args.threads)
    print(f"mse={out.mse!r}")
    print(f"dis={out.dis!r}")
    print(f"conn={out.conn!r}")
    print(f"total={out.total!r}")
    if args.out_grad:
        write_grid(args.out_grad, out.grad)
    return 0


def _cmd_gradcheck(args: argparse.Namespace) -> int:
    pred = read_grid(args.pred)
    graph = _read_graph(args.gt_graph)
    gt = build_ground_truth(graph, pred.width, pred.height)
    report = grad_check(
        pred, gt, LossConfig(), eps=args.eps, samples=args.samples, seed=args.seed
    )
    print(f"max_rel_err={report.max_rel_err!r}")
    print(f"checked={report.checked}")
    return 0 if report.max_rel_err <= GRAD_TOL else 1


def _cmd_extract(args: argparse.Namespace) -> int:
    pred = read_grid(args.pred)
    graph = flatten(extract_graph(pred, tau=args.tau, min_spur=args.min_spur))
    Path(args.out).write_text(format_graph(graph))
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    pred = _read_graph(args.pred_graph)
    gt = _read_graph(args.gt_graph)
    cfg = MetricConfig(
        seed=args.seed,
        samples=args.samples,
        buffer=args.buffer,
        snap_radius=args.snap,
        rel_tol=args.tol,
    )
    report = evaluate(pred, gt, (args.width, args.height), cfg)
    for key, value in report.as_dict().items():
        print(f"{key}={value!r}")
    if args.json:
        Path(args.json).write_text(json.dumps(report.as_dict(), indent=2) + "\n")
    return 0


def _cmd_selftest(args: argparse.Namespace) -> int:
    return 0 if run_selftest(seeds=args.seeds, log=print) else 1


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="roadtopo",
        description="Connectivity-aware distance-map loss, extraction, metrics.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gengt", help="rasterize a graph into ground-truth grids")
    g.add_argument("--graph", required=True)
    g.add_argument("--width", type=int, required=True)
    g.add_argument("--height", type=int, required=True)
    g.add_argument("--dilate", type=float, default=5.0)
    g.add_argument("--dmax", type=float, default=20.0)
    g.add_argument("--out-dist", required=True)
    g.add_argument("--out-region")
    g.add_argument("--out-labels")
    g.set_defaults(func=_cmd_gengt)

    lo = sub.add_parser("loss", help="windowed loss and gradient of a prediction")
    lo.add_argument("--pred", required=True)
    lo.add_argument("--gt-graph", required=True)
    lo.add_argument("--alpha", type=float, default=1e-4)
    lo.add_argument("--beta", type=float, default=0.1)
    mode = lo.add_mutually_exclusive_group()
    mode.add_argument("--window", type=int, default=64)
    mode.add_argument("--global", action="store_true")
    lo.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    lo.add_argument("--out-grad")
    lo.set_defaults(func=_cmd_loss)

    gc = sub.add_parser("gradcheck", help="finite-difference gradient audit")
    gc.add_argument("--pred", required=True)
    gc.add_argument("--gt-graph", required=True)
    gc.add_argument("--eps", type=float, default=1e-3)
    gc.add_argument("--samples", type=int, default=100)
    gc.add_argument("--seed", type=int, default=17)
    gc.set_defaults(func=_cmd_gradcheck)

    ex = sub.add_parser("extract", help="prediction grid → flattened graph file")
    ex.add_argument("--pred", required=True)
    ex.add_argument("--tau", type=float, default=4.0)
    ex.add_argument("--min-spur", type=float, default=10.0)
    ex.add_argument("--out", required=True)
    ex.set_defaults(func=_cmd_extract)

    ev = sub.add_parser("eval", help="score a predicted graph against reference")
    ev.add_argument("--pred-graph", required=True)
    ev.add_argument("--gt-graph", required=True)
    ev.add_argument("--width", type=int, required=True)
    ev.add_argument("--height", type=int, required=True)
    ev.add_argument("--seed", type=int, default=17)
    ev.add_argument("--samples", type=int, default=500)
    ev.add_argument("--buffer", type=float, default=5.0)
    ev.add_argument("--snap", type=float, default=15.0)
    ev.add_argument("--tol", type=float, default=0.05)
    ev.add_argument("--json")
    ev.set_defaults(func=_cmd_eval)

    st = sub.add_parser("selftest", help="oracle-equivalence and invariant suite")
    st.add_argument("--seeds", type=int, default=200)
    st.set_defaults(func=_cmd_selftest)

    return p


def run(argv: list[str] | None = None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as e:
        code = e.code
        return code if isinstance(code, int) else 2
    try:
        return args.func(args)
    except (ValueError, OSError) as e:  # ParseError/FileFormatError included
        print(f"error: {e}", file=sys.stderr)
        return 3


def main() -> None:
    raise SystemExit(run(sys.argv[1:]))
