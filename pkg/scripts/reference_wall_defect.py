"""Show when the cubic-in-angle reference path touches a wall.

The particle velocity left over from the smoothing phase scales like
``1/m``; with a light particle and large data the path through
``h = (1 + sin phi) / 2`` passes ``phi = +-pi/2`` and the tracking phase
cannot start.  This prints the smallest wall distance along the reference
over a grid of masses and amplitudes.
"""
import argparse

from bpc import initial_data
from bpc.control import build_reference, smoothing_phase
from bpc.core import SimConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--n", type=int, default=100)
    ap.add_argument("--kind", default="step")
    ap.add_argument("--masses", type=float, nargs="+", default=[1.0, 3.0, 10.0])
    ap.add_argument("--amplitudes", type=float, nargs="+", default=[5.0, 20.0, 50.0])
    args = ap.parse_args()
    print(f"{'m':>5} {'A':>6} {'ell(T0)':>9} {'min wall distance':>18}")
    for m in args.masses:
        for A in args.amplitudes:
            cfg = SimConfig(m=m, n_left=args.n, n_right=args.n)
            st = smoothing_phase(initial_data.make(args.kind, amplitude=A), 0.3, 0.0, 0.01, cfg).state
            try:
                d = build_reference(st.h, st.ell, 0.6, st.t, st.t + 1.0).min_wall_distance()
                text = f"{d:18.4f}"
            except ValueError:
                text = f"{'touches wall':>18}"
            print(f"{m:5g} {A:6g} {st.ell:9.3f} {text}")


if __name__ == "__main__":
    main()
