"""Open-loop replay error of the tracking force under joint (N, dt) refinement."""
import argparse

from bpc.verification import tracking_suite


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--kind", default="sine")
    ap.add_argument("--amplitude", type=float, default=5.0)
    ap.add_argument("--m", type=float, default=10.0)
    ap.add_argument("--rungs", type=int, default=3, help="levels starting at (50, 8e-4)")
    args = ap.parse_args()
    levels = tuple((50 * 2 ** k, 8e-4 / 2 ** k) for k in range(args.rungs))
    res = tracking_suite(levels=levels, kind=args.kind, amplitude=args.amplitude, m=args.m)
    for row in res.rows:
        print("  ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}" for k, v in row.items()))
    print(res.line())


if __name__ == "__main__":
    main()
