"""Packing LP certificate on a small stage: value, violation and the heaviest cylinders."""
import argparse

import numpy as np

from wpress import io
from wpress.covering import StageSpec, w_lp_stage
from wpress.frostman import frostman_lp, verify_frostman


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--system", default="bundled:golden_chain")
    ap.add_argument("--potential")
    ap.add_argument("--stage", default="1,3,5", help="N,n_max,depth")
    ap.add_argument("--top", type=int, default=8)
    args = ap.parse_args()
    system = io.load_system(args.system)
    pot = io.load_potential(args.potential, system)
    stage = StageSpec(*(int(x) for x in args.stage.split(",")))
    for s in (0.0, 0.5, 1.0, 1.9, 5.0):
        cert = frostman_lp(system, pot, s, stage)
        primal = w_lp_stage(system, pot, s, stage)
        viol = verify_frostman(system, pot, cert, s, stage)
        print(f"s={s:4.1f}  c={cert.c:.6e}  cover LP={primal:.6e}  violation={viol:.1e}  no_mass={cert.no_mass}")
    cert = frostman_lp(system, pot, 0.0, stage)
    order = np.argsort(-cert.measure.masses)[: args.top]
    print("heaviest depth-%d words at s=0:" % stage.depth)
    for j in order:
        word = system.base.alphabet.decode(cert.measure.base_words[j])
        print(f"  {word}  {cert.measure.masses[j]:.6f}")


if __name__ == "__main__":
    main()
