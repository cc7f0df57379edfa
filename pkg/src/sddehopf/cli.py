"""Command-line experiment runner.

One subcommand per experiment kind; the config file carries the system and
numerics, flags override the output directory, base seed, thread count, and
the paper-scale switch.  Failures leave a machine-readable error.json in the
output directory and a nonzero exit status.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import EXPERIMENT_KINDS, ConfigError, load_config
from .experiments import NotCritical, run_experiment


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sddehopf",
        description=(
            "Simulate scalar stochastic delay equations at the verge of Hopf "
            "instability and validate their delay-free reductions."
        ),
    )
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in EXPERIMENT_KINDS:
        p = sub.add_parser(kind, help=f"run a '{kind}' experiment")
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--seed", type=int, default=None, help="base seed override")
        p.add_argument("--threads", type=int, default=None, help="worker count override")
        p.add_argument(
            "--paper-scale",
            action="store_true",
            help="run at the published scale (eps=0.025, N=4000) instead of desk scale",
        )
    return parser


def _record_error(out_dir: Path, kind: str, exc: Exception) -> None:
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "error.json").write_text(
            json.dumps(
                {"error": type(exc).__name__, "kind": kind, "message": str(exc)},
                indent=2,
            )
            + "\n"
        )
    except OSError:
        pass


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, out_override=args.out)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        if args.out:
            _record_error(Path(args.out), args.kind, e)
        return 2
    cfg.kind = args.kind
    if args.seed is not None:
        cfg.base_seed = args.seed
    if args.threads is not None:
        cfg.threads = args.threads
    if args.paper_scale:
        cfg.apply_paper_scale()
    try:
        manifest = run_experiment(cfg)
    except (ConfigError, NotCritical) as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        _record_error(cfg.out_dir, args.kind, e)
        return 3
    print(manifest)
    return 0


if __name__ == "__main__":
    sys.exit(main())
