#!/usr/bin/env python3
"""Rate study over the eps ladder for the multiplicative benchmark system.

Fits log-log slopes of the ensemble reduction errors (fourth-moment
reconstruction error for ztilde, mean sup beta^2, mean sup alpha^2) against
eps and reports whether the stochastic stable remainder shrinks with eps.
"""
import argparse
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from sddehopf.cli import main as cli_main

CONFIGS = pathlib.Path(__file__).resolve().parents[1] / "configs"

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--threads", type=int, default=2)
    ap.add_argument("--out", default="out/convergence_multiplicative")
    args = ap.parse_args()
    sys.exit(
        cli_main(
            [
                "convergence",
                "--config", str(CONFIGS / "convergence_multiplicative.json"),
                "--out", args.out,
                "--threads", str(args.threads),
            ]
        )
    )
