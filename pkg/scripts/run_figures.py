#!/usr/bin/env python3
"""Reproduce the terminal-amplitude and exit-time CDF comparisons.

Runs the figures experiment for the stabilizing cubic (gamma_c = 1) and the
purely linear (gamma_c = 0) variants of the pi/2 point-delay system, desk
scale by default (eps = 0.05, N = 1000).  Pass --paper-scale for the
published scale (eps = 0.025, N = 4000; slow).

Outputs land in out/figure1_stabilizing and out/figure1_linear; render them
with the plotting frontend:

    node frontend/dist/cli.js cdf-overlay \
        --full out/figure1_stabilizing/cdf_h_eps.csv \
        --reduced out/figure1_stabilizing/cdf_h0.csv \
        --out out/figure1_stabilizing/cdf_H.svg
"""
import argparse
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from sddehopf.cli import main as cli_main

CONFIGS = pathlib.Path(__file__).resolve().parents[1] / "configs"

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--paper-scale", action="store_true")
    ap.add_argument("--threads", type=int, default=2)
    ap.add_argument("--out", default="out")
    args = ap.parse_args()
    rc = 0
    for name in ("figure1_stabilizing", "figure1_linear"):
        argv = [
            "figures",
            "--config", str(CONFIGS / f"{name}.json"),
            "--out", f"{args.out}/{name}",
            "--threads", str(args.threads),
        ]
        if args.paper_scale:
            argv.append("--paper-scale")
        rc |= cli_main(argv)
    sys.exit(rc)
