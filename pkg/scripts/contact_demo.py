"""Constant push from rest: contact time under successive dt halving."""
import argparse

from bpc.core import CoupledState, SimConfig
from bpc.coupled import Termination, solve


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--g", type=float, default=10.0)
    ap.add_argument("--m", type=float, default=1.0)
    ap.add_argument("--n", type=int, default=50)
    ap.add_argument("--dt", type=float, default=4e-4)
    ap.add_argument("--halvings", type=int, default=4)
    args = ap.parse_args()
    prev = None
    for k in range(args.halvings + 1):
        dt = args.dt / 2 ** k
        cfg = SimConfig(m=args.m, n_left=args.n, n_right=args.n, dt=dt, adaptive=False, decimate=10 ** 9)
        run = solve(CoupledState.rest(0.5, args.n), args.g, 10.0, cfg)
        tc = run.t_event if run.termination is Termination.CONTACT else float("nan")
        change = "" if prev is None else f"  change {abs(tc - prev) / prev:.3%}"
        print(f"dt={dt:.2e}  {run.termination.name}  T_c={tc:.6f}{change}")
        prev = tc


if __name__ == "__main__":
    main()
