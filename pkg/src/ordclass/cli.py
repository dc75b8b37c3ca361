"""Command-line entry point: ``classify``.

Exit codes: 0 success, 2 usage or input error, 3 exact computation
infeasible, 4 internal consistency failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import DataError, InfeasibleError, InvariantError
from .model import Hyperparams
from .report import METHODS, PLOT_KINDS, RunConfig, emit_plot_data, render, run

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_INVARIANT = 0, 2, 3, 4


def _common(p: argparse.ArgumentParser):
    g = p.add_argument_group("data")
    g.add_argument("--data", required=True, help="file path, or a bundled dataset: small10, galaxy")
    g.add_argument("--column", help="read this column of a CSV file")
    g.add_argument("--scale", type=float, default=1.0, help="multiply all observations by this factor")
    h = p.add_argument_group("model")
    h.add_argument("--theta", type=float, default=1.0)
    h.add_argument("--a", type=float, default=1.0)
    h.add_argument("--b", type=float, default=1.0)
    h.add_argument("--c", type=float, default=0.1)
    o = p.add_argument_group("output")
    o.add_argument("--format", choices=("table", "json", "csv"), default="table")
    o.add_argument("--top", type=int, default=5, help="number of top configurations to report")
    o.add_argument("--output", "-o", help="write to this file instead of stdout")
    o.add_argument("--plot", choices=PLOT_KINDS, help="emit plot data of this kind instead of the report")
    o.add_argument("--no-timing", action="store_true", help="omit run times from JSON output")


def _mcmc_args(p: argparse.ArgumentParser):
    g = p.add_argument_group("mcmc")
    g.add_argument("--iters", type=int, default=10_000, help="post burn-in iterations")
    g.add_argument("--burnin", type=int, default=1_000)
    g.add_argument("--seed", type=int, default=1)
    g.add_argument("--q", type=float, default=0.5, help="probability of proposing a split")
    g.add_argument("--no-shuffle", action="store_true", help="disable the shuffle move (scheme m1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="classify", description="Ordered-composition classification of one-dimensional data."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exact", help="exact posterior over all compositions")
    _common(p)

    p = sub.add_parser("mdp-exact", help="exact Dirichlet process mixture posterior over set partitions")
    _common(p)

    p = sub.add_parser("mcmc", help="estimate the posterior by split/merge MCMC")
    _common(p)
    _mcmc_args(p)
    p.add_argument("--scheme", choices=("m1", "m2"), default="m1")

    p = sub.add_parser("ward", help="Ward hierarchical clustering baseline")
    _common(p)
    p.add_argument("--k", type=int, default=2, help="number of clusters to cut the tree at")

    p = sub.add_parser("compare", help="run several methods side by side")
    _common(p)
    _mcmc_args(p)
    p.add_argument(
        "--methods",
        default="exact,mdp-exact,mcmc-m1,mcmc-m2",
        help=f"comma-separated subset of {','.join(METHODS)}",
    )
    p.add_argument("--k", type=int, default=2)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    if args.command == "mcmc":
        methods = (f"mcmc-{args.scheme}",)
    elif args.command == "compare":
        methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    else:
        methods = (args.command,)
    kw = {}
    if hasattr(args, "iters"):
        kw.update(iterations=args.iters, burn_in=args.burnin, seed=args.seed, q=args.q,
                  shuffle=not args.no_shuffle)
    if hasattr(args, "k"):
        kw["k"] = args.k
    return RunConfig(
        data=args.data,
        methods=methods,
        hyper=Hyperparams(args.theta, args.a, args.b, args.c),
        top=args.top,
        column=args.column,
        scale=args.scale,
        **kw,
    )


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        report = run(cfg)
        if args.plot:
            text = emit_plot_data(report, args.plot, "json" if args.format == "json" else "csv")
        else:
            text = render(report, args.format, timing=not args.no_timing)
    except InfeasibleError as exc:
        print(f"classify: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except InvariantError as exc:
        print(f"classify: internal check failed: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (DataError, ValueError) as exc:
        print(f"classify: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
