"""Finite-stage gap between stage estimates and the closed form on FS-4/2 with f1.

Columns: single-scale estimate at n with cover lengths 1 and 2, and the
multi-scale LP crossing for stages N=1..n_max (small n_max only).
"""
import argparse
import math

from wpress import io
from wpress.covering import StageSpec, pressure_bisect, upper_pressure
from wpress.cylinders import window_profile
from wpress.variational import fullshift_closed_form


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-max", type=int, default=16)
    ap.add_argument("--lp-max", type=int, default=4, help="largest n_max for the LP column")
    args = ap.parse_args()
    system = io.load_system("bundled:fs42")
    pot = io.load_potential("bundled:fs42", system)
    closed = fullshift_closed_form(system, pot)
    print(f"closed form {closed:.10f}")
    print(f"{'n':>3} {'single L=1':>12} {'single L=2':>12} {'lp N=1':>12}")
    for n in range(1, args.n_max + 1):
        g1 = upper_pressure(system, pot, n) - closed
        g2 = upper_pressure(system, pot, n, cover_lengths=(2, 2)) - closed
        lp = ""
        if n <= args.lp_max:
            stage = StageSpec(1, n, window_profile(system.weights, n).m[-1])
            lp = f"{pressure_bisect(system, pot, stage, 'lp', tol=1e-8).upper - closed:12.6f}"
        print(f"{n:3d} {g1:12.6f} {g2:12.6f} {lp:>12}")


if __name__ == "__main__":
    main()
