"""Command-line interface: run / report / fit / wigner.

Exit codes: 0 ok, 2 config error, 3 acceptance failure in report mode.
"""

from __future__ import annotations

import argparse
import sys

from .experiments import (
    ConfigError,
    parse_config,
    read_state_csv,
    report,
    run_experiment,
    write_wigner_csv,
)


def _parse_post_select(text: str) -> dict:
    out = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        key, _, value = part.partition("=")
        key = key.strip()
        if key == "m":
            out["post_select_m"] = float(value)
        elif key == "n":
            out["post_select_n"] = int(value)
        else:
            raise ConfigError(f"unknown post-selection key {key!r} (use m=..., n=...)")
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phantm",
        description="Seeded Monte-Carlo experiments for photon-subtraction-assisted "
        "cluster-state teleportation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config and write its bundle")
    p_run.add_argument("--config", required=True, help="experiment config file")
    p_run.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_run.add_argument("--workers", type=int, default=None, help="trial worker pool size")
    p_run.add_argument("--out", default=None, help="override the output directory")
    p_run.add_argument("--post-select", default=None, help='e.g. "m=0,n=2"')

    p_rep = sub.add_parser("report", help="summarize a bundle and check tolerances")
    p_rep.add_argument("--bundle", required=True, help="bundle directory written by run")

    p_fit = sub.add_parser("fit", help="fit a stored state to a family")
    p_fit.add_argument("--state", required=True, help="state CSV (n,re,im)")
    p_fit.add_argument("--family", default="cat", choices=("cat", "weighted_cat", "qunaught"))
    p_fit.add_argument("--multistart", type=int, default=8)

    p_wig = sub.add_parser("wigner", help="compute a Wigner grid for a stored state")
    p_wig.add_argument("--state", required=True, help="state CSV (n,re,im)")
    p_wig.add_argument("--out", required=True, help="output CSV path")
    p_wig.add_argument("--range", type=float, default=7.0, dest="qrange")
    p_wig.add_argument("--points", type=int, default=281)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            overrides = {}
            if args.seed is not None:
                overrides["seed"] = args.seed
            if args.workers is not None:
                overrides["workers"] = args.workers
            if args.out is not None:
                overrides["out"] = args.out
            if args.post_select:
                overrides.update(_parse_post_select(args.post_select))
            cfg = parse_config(args.config, overrides)
            bundle = run_experiment(cfg, config_path=args.config)
            print(f"bundle written to {bundle}")
            return 0
        if args.command == "report":
            text, ok = report(args.bundle)
            print(text)
            return 0 if ok else 3
        if args.command == "fit":
            from .analysis import fit

            state = read_state_csv(args.state)
            res = fit(state.normalize(), args.family, multistart=args.multistart)
            for key, value in res.params.items():
                print(f"{key} = {value:.6g}")
            print(f"fidelity = {res.fidelity:.6g}")
            print(f"converged = {res.converged}")
            return 0
        if args.command == "wigner":
            from .analysis import wigner

            state = read_state_csv(args.state)
            grid = wigner(state.normalize(), q_range=args.qrange, points=args.points)
            write_wigner_csv(args.out, grid)
            print(f"wigner grid written to {args.out}")
            return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
