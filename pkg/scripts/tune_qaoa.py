#!/usr/bin/env python3
"""Mean path optimality of QAOA by optimizer and depth on random 4-node instances.

Prints one row per (optimizer, p) next to the random-permutation baseline.

    python scripts/tune_qaoa.py --optimizers cobyla,nelder-mead,spsa --reps-max 5
"""

import argparse
import json

from opusnest.pipeline import tune_qaoa
from opusnest.qaoa import QaoaConfig


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--instances", type=int, default=30)
    ap.add_argument("--nodes", type=int, default=4)
    ap.add_argument("--reps-min", type=int, default=1)
    ap.add_argument("--reps-max", type=int, default=5)
    ap.add_argument("--optimizers", default="cobyla,nelder-mead,spsa")
    ap.add_argument("--shots", type=int, default=1000)
    ap.add_argument("--max-evals", type=int, default=QaoaConfig.max_evals)
    ap.add_argument("--initial-step", type=float, default=QaoaConfig.initial_step)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out")
    args = ap.parse_args()

    rows = tune_qaoa(args.instances, args.nodes, range(args.reps_min, args.reps_max + 1),
                     args.optimizers.split(","), args.shots, args.seed, args.max_evals,
                     initial_step=args.initial_step)
    print(f"{'optimizer':<12} " + " ".join(f"{'p=' + str(p):>7}" for p in range(args.reps_min, args.reps_max + 1)))
    for opt in args.optimizers.split(","):
        vals = [r.mean_optimality for r in rows if r.optimizer == opt]
        print(f"{opt:<12} " + " ".join(f"{100 * v:>6.1f}%" for v in vals))
    print(f"{'random':<12} {100 * rows[0].random_baseline:>6.1f}%")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump([r.__dict__ for r in rows], fh, indent=2)


if __name__ == "__main__":
    main()
