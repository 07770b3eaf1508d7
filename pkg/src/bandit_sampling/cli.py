"""Command-line entry point: ``bandit-sampling <command> [options]``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import bench
from .bnormal import TABLE_DELTAS, TABLE_PROPORTIONS
from .racing import VARIANCE_MODES
from .rewards import save_population
from .sampler import ALGORITHMS


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _choices(allowed):
    def parse(text: str) -> list[str]:
        items = [x.strip() for x in text.split(",") if x.strip()]
        bad = [x for x in items if x not in allowed]
        if bad or not items:
            raise argparse.ArgumentTypeError(f"choose from {', '.join(allowed)}; got {text!r}")
        return items
    return parse


def _write(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _common(p: argparse.ArgumentParser, *, out_help: str) -> None:
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--out", help=out_help)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bandit-sampling",
        description="Approximate discrete sampling by best-arm identification.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="misidentification rates on synthetic populations (CSV)",
                       description="Error-rate sweep. The default target over D states is the "
                                   "softmax of logits evenly spaced on [0, 2]; --target "
                                   "loads other probabilities from a text file.")
    _common(p, out_help="CSV path (default stdout)")
    p.add_argument("--algo", type=_choices(ALGORITHMS), default=["racing-normal"],
                   help="comma-separated algorithms")
    p.add_argument("--dist", type=_choices(bench.DISTRIBUTIONS), default=["normal"],
                   help="comma-separated reward distributions")
    p.add_argument("--sigma", type=_floats, default=[0.1], help="comma-separated reward stds")
    p.add_argument("--delta", type=_floats, default=list(bench.DEFAULT_DELTAS),
                   help="comma-separated error bounds")
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--arms", type=int, default=10)
    p.add_argument("--pop", type=int, default=10_000, help="rewards per arm N")
    p.add_argument("--m1", type=int, default=None, help="first mini-batch size for racing")
    p.add_argument("--variance-mode", choices=VARIANCE_MODES, default="pairwise")
    p.add_argument("--target", help="file of D probabilities (whitespace or comma separated)")
    p.add_argument("--workers", type=int, default=1, help="worker processes")

    p = sub.add_parser("bnormal-table", help="table of the Normal racing constant B (CSV)")
    _common(p, out_help="CSV path (default stdout)")
    p.add_argument("--delta", type=_floats, default=list(TABLE_DELTAS))
    p.add_argument("--proportions", type=_floats, default=list(TABLE_PROPORTIONS),
                   help="first-batch proportions m1/N")

    p = sub.add_parser("gibbs-demo", help="exact vs subsampled toy chain (JSON)")
    _common(p, out_help="JSON path (default stdout)")
    p.add_argument("--arms", type=int, default=10, help="number of states")
    p.add_argument("--pop", type=int, default=1000, help="data points N")
    p.add_argument("--trials", type=int, default=100_000, help="chain length")
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--algo", choices=[a for a in ALGORITHMS if a != "exact"],
                   default="racing-normal")
    p.add_argument("--spread", type=float, default=1.0,
                   help="state spacing in posterior standard deviations")

    p = sub.add_parser("gen-population", help="write a synthetic reward population")
    _common(p, out_help=".npy or .csv path (required)")
    p.add_argument("--dist", choices=bench.DISTRIBUTIONS, default="normal")
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument("--arms", type=int, default=10)
    p.add_argument("--pop", type=int, default=10_000)
    return parser


def _load_target(path: str | None):
    if path is None:
        return None
    text = Path(path).read_text().replace(",", " ")
    return np.array([float(x) for x in text.split()])


def run(args: argparse.Namespace) -> None:
    if args.command == "sweep":
        rows = bench.run_error_sweep(
            args.algo, args.dist, args.sigma, args.delta, args.trials, workers=args.workers,
            D=args.arms, N=args.pop, seed=args.seed, m1=args.m1, variance=args.variance_mode,
            target=_load_target(args.target))
        _write(bench.sweep_csv(rows), args.out)
    elif args.command == "bnormal-table":
        _write(bench.emit_bnormal_table(args.delta, args.proportions), args.out)
    elif args.command == "gibbs-demo":
        cfg = bench.GibbsDemoConfig(states=args.arms, N=args.pop, draws=args.trials,
                                    delta=args.delta, algorithm=args.algo, spread=args.spread,
                                    seed=args.seed)
        _write(bench.gibbs_report_json(bench.gibbs_demo(cfg)), args.out)
    elif args.command == "gen-population":
        if args.out is None:
            raise ValueError("gen-population needs --out")
        spec = bench.SyntheticSpec(args.arms, args.pop, args.dist, args.sigma, seed=args.seed)
        population, _ = bench.synth_gen(spec)
        save_population(population, args.out)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        run(args)
    except (ValueError, OSError) as exc:
        parser.exit(2, f"{parser.prog} {args.command}: error: {exc}\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
