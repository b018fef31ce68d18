#!/usr/bin/env python3
"""How the leading-term deviation shrinks when eps and h/eps are halved together.

For a few choices of lower-order coefficients, fit a pseudo-chart along an arc
of the champagne bottle at (h, eps) and at (h/4, eps/2), then print the worst
deviation of its differential from the true action differential and the ratio.
"""

import argparse

import numpy as np

from pseudolattice.charts import assemble_pseudo_chart
from pseudolattice.models import champagne_bottle
from pseudolattice.spectrum import SynthesisOptions, synthesize_band

CASES = {
    "i, i": (1j, 1j),
    "0.5i, i": (0.5j, 1j),
    "i, 0.5i": (1j, 0.5j),
    "1+i, i": (1 + 1j, 1j),
    "i, 1+i": (1j, 1 + 1j),
    "0, 0": (0.0, 0.0),
}


def arc(center, count, half_span):
    R, th0 = np.hypot(*center), np.arctan2(center[1], center[0])
    th = th0 + np.linspace(-half_span, half_span, count) / R
    return np.c_[R * np.cos(th), R * np.sin(th)]


def deviation(model, anchors, h, eps, eps2_coeff, h_coeff, jitter):
    opts = SynthesisOptions(jitter, eps2_coeff=eps2_coeff, h_coeff=h_coeff)
    cloud = synthesize_band(model, None, eps, h, 0.5, None, None, anchors=anchors, options=opts)
    J = model.actions(anchors)[1]
    pc = assemble_pseudo_chart(cloud, anchors, h, eps, frame=J[len(anchors) // 2])
    return float(np.max(np.abs(pc.differential(anchors) - J)))


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--h", type=float, default=1e-4)
    ap.add_argument("--eps", type=float, default=1e-2)
    ap.add_argument("--center", type=float, nargs=2, default=(1.0, 0.5))
    ap.add_argument("--jitter", type=int, default=None)
    args = ap.parse_args()

    model = champagne_bottle()
    anchors = arc(args.center, 7, 0.03)
    print(f"{'eps2, h coeffs':>14}  {'coarse':>10}  {'fine':>10}  ratio")
    for name, (a, b) in CASES.items():
        coarse = deviation(model, anchors, args.h, args.eps, a, b, args.jitter)
        fine = deviation(model, anchors, args.h / 4, args.eps / 2, a, b, args.jitter)
        print(f"{name:>14}  {coarse:10.3e}  {fine:10.3e}  {coarse / fine:.3f}")


if __name__ == "__main__":
    main()
