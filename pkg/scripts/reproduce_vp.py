"""Optimizer value, bisected stage upper bound and closed form for each bundled system."""
import argparse

from wpress import io
from wpress.covering import StageSpec
from wpress.cylinders import window_profile
from wpress.variational import OptimizerOptions, vp_report


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("-n", type=int, default=10)
    ap.add_argument("-L", type=int, default=2)
    ap.add_argument("--restarts", type=int, default=8)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    opts = OptimizerOptions(restarts=args.restarts, seed=args.seed)
    print(f"{'system':<14}{'opt lower':>12}{'opt upper':>12}{'stage upper':>13}{'closed':>12}  flags")
    for name in io.bundled_names("system"):
        system = io.load_system(f"bundled:{name}")
        try:
            pot = io.load_potential(f"bundled:{name}", system)
        except io.ConfigError:
            pot = io.load_potential(None, system)
        stage = StageSpec(args.n, args.n, window_profile(system.weights, args.n).m[-1])
        rep = vp_report(system, pot, stage, args.L, opts)
        v = rep.optimizer_value
        closed = f"{rep.closed_form:12.6f}" if rep.closed_form is not None else f"{'-':>12}"
        flags = ",".join(k for k, ok in rep.flags.items() if ok)
        print(f"{name:<14}{v.lower:12.6f}{v.upper:12.6f}{rep.stage_upper:13.6f}{closed}  {flags}")


if __name__ == "__main__":
    main()
