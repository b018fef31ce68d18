#!/usr/bin/env python3
"""Monte-Carlo measure of non-Diophantine frequency vectors as alpha shrinks."""

import argparse

from pseudolattice.diophantine import DiophantineParams, bad_fraction
from pseudolattice.geometry import Rect


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--box", type=float, nargs=4, default=(1.0, 2.0, 1.0, 2.0), metavar=("E0", "E1", "G0", "G1"))
    ap.add_argument("--alphas", type=float, nargs="+", default=(0.1, 0.05, 0.025, 0.0125))
    ap.add_argument("--tau", type=float, default=1.0)
    ap.add_argument("--samples", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    box = Rect(*args.box)
    prev = None
    for alpha in args.alphas:
        r = bad_fraction(box, DiophantineParams(alpha, args.tau), args.samples, seed=args.seed)
        ratio = "" if prev is None else f"  ratio {r.fraction / prev:.3f}"
        print(f"alpha {alpha:<8g} bad fraction {r.fraction:.5f} +- {r.stderr:.5f}{ratio}")
        prev = r.fraction


if __name__ == "__main__":
    main()
