"""Largest violation of -(1-x)/tau <= u <= x/tau over the hold phase, per grid size."""
import argparse

from bpc import initial_data
from bpc.control import oleinik_check, run_global_strategy
from bpc.core import SimConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--levels", type=int, nargs="+", default=[50, 100, 200])
    ap.add_argument("--kind", default="step")
    ap.add_argument("--amplitude", type=float, default=50.0)
    ap.add_argument("--m", type=float, default=10.0)
    ap.add_argument("--min-elapsed", type=float, default=0.0)
    args = ap.parse_args()
    for n in args.levels:
        cfg = SimConfig(m=args.m, n_left=n, n_right=n)
        rep = run_global_strategy(initial_data.make(args.kind, amplitude=args.amplitude), 0.3, 0.0,
                                  0.6, 0.05, cfg)
        if "hold" not in rep.phases:
            print(f"N={n}: strategy stopped in {rep.failed_phase}: {rep.message}")
            continue
        o = oleinik_check(rep.phases["hold"], rep.T1, min_elapsed=args.min_elapsed)
        print(f"N={n}: max violation {o.max_violation:.3e} at t={o.t:.4g}, x={o.x:.4g} "
              f"over {o.per_time.shape[0]} samples")


if __name__ == "__main__":
    main()
