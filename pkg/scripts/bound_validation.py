"""Monte-Carlo validation of the inconsistency probability bound over models and deltas."""

import argparse
import os

from tvtv.bound import SurrogateModel, check_bound, ellipse_sampler, prop1_monte_carlo
from tvtv.operators import MaskedFourier, make_cartesian_mask


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--models", nargs="+", default=["blur", "perturb", "zero"])
    parser.add_argument("--no-fit", action="store_true", help="score models without fitting the gain")
    parser.add_argument("--size", type=int, default=16)
    parser.add_argument("--accel", type=float, default=4.0)
    parser.add_argument("--fractions", type=float, nargs="+", default=[0.1, 0.25, 0.5, 0.75, 0.9])
    parser.add_argument("--trials", type=int, default=10_000)
    parser.add_argument("--seeds", type=int, nargs="+", default=[7])
    args = parser.parse_args()

    op = MaskedFourier(make_cartesian_mask(args.size, args.size, args.accel, 2, seed=0))
    workers = int(os.environ.get("TVTV_THREADS", "1")) or os.cpu_count() or 1
    fails = 0
    for seed in args.seeds:
        for kind in args.models:
            s = prop1_monte_carlo(op, SurrogateModel(kind), ellipse_sampler(args.size, args.size), 0.0,
                                  args.trials, seed, fit=not args.no_fit, workers=workers)
            print(f"[{kind} seed={seed}] c={s.c:.4g} eps={s.epsilon:.4g} C={s.max:.4g}")
            for f, r in zip(args.fractions, check_bound(s, [f * s.mean for f in args.fractions])):
                bound = "n/a" if r.bound is None else f"{r.bound:.5f}"
                print(f"  delta={f:.2f}(c+eps)  P={r.empirical:.4f}  bound={bound}  {r.status}")
                fails += r.status == "fail"
    print(f"violations: {fails}")


if __name__ == "__main__":
    main()
