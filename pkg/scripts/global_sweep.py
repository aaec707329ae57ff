"""Run the full strategy over a grid of amplitudes and data shapes and print a table."""
import argparse

from bpc import initial_data
from bpc.control import StrategyParams, run_global_strategy
from bpc.core import SimConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--m", type=float, default=10.0)
    ap.add_argument("--h0", type=float, default=0.3)
    ap.add_argument("--h-target", type=float, default=0.6)
    ap.add_argument("--delta", type=float, default=0.05)
    ap.add_argument("--amplitudes", type=float, nargs="+", default=[0.5, 5.0, 50.0])
    ap.add_argument("--kinds", nargs="+", default=["sine", "step"])
    args = ap.parse_args()

    cfg = SimConfig(m=args.m, n_left=args.n, n_right=args.n)
    params = StrategyParams(keep_runs=False)
    print(f"{'data':>6} {'A':>6} {'pass':>5} {'T2':>7} {'|u(T2)|_inf':>12} {'track h err':>12}  phase")
    for kind in args.kinds:
        for A in args.amplitudes:
            rep = run_global_strategy(initial_data.make(kind, amplitude=A), args.h0, 0.0,
                                      args.h_target, args.delta, cfg, params)
            print(f"{kind:>6} {A:6g} {str(rep.passed):>5} {rep.T2:7.3f} "
                  f"{rep.checks.get('u_linf', float('nan')):12.3e} "
                  f"{rep.info.get('tracking_h_error', float('nan')):12.3e}  {rep.failed_phase or '-'}")


if __name__ == "__main__":
    main()
