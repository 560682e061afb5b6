#!/usr/bin/env python3
"""Solve the bundled puzzles and print length, waste and runtime per instance.

    python scripts/run_puzzles.py --tsp brute --out-dir runs/
"""

import argparse
import time
from pathlib import Path

from opusnest.compat import DiscretizationConfig, NffCache
from opusnest.interface import bundled_instance, load_instance, write_report, write_svg
from opusnest.pipeline import SolverConfig, solve
from opusnest.qaoa import QaoaConfig

PARTITIONS = {"puzzle1": 20, "puzzle2": 40, "puzzle3": 50}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--puzzles", default="puzzle1,puzzle2,puzzle3")
    ap.add_argument("--tsp", choices=("brute", "qaoa"), default="brute")
    ap.add_argument("--reps", type=int, default=5)
    ap.add_argument("--shots", type=int, default=1000)
    ap.add_argument("--delta-r", type=float, default=5.0)
    ap.add_argument("--theta-step", type=float, default=5.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out-dir", type=Path)
    args = ap.parse_args()

    cache = NffCache.from_env()
    if args.out_dir:
        args.out_dir.mkdir(parents=True, exist_ok=True)
    print(f"{'instance':<10} {'H':>6} {'L':>9} {'waste':>7} {'time':>8}  backend")
    for name in args.puzzles.split(","):
        inst = load_instance(bundled_instance(name))
        cfg = SolverConfig(
            discretization=DiscretizationConfig.uniform(args.theta_step, inst.rotation_step_deg or 90, args.delta_r),
            n_partitions=PARTITIONS.get(name, 20),
            tsp_backend=args.tsp,
            qaoa=QaoaConfig(p=args.reps, shots=args.shots, seed=args.seed),
            seed=args.seed,
            workers=args.workers,
        )
        t0 = time.perf_counter()
        layout, report = solve(inst.polygons(), inst.height, cfg, cache)
        report.name = name
        dt = time.perf_counter() - t0
        flag = "" if not report.violations else "  INVALID"
        print(f"{name:<10} {inst.height:>6g} {report.length:>9.2f} {report.waste_percent:>6.2f}% {dt:>7.1f}s  "
              f"{args.tsp}{flag}")
        if args.out_dir:
            write_svg(layout, args.out_dir / f"{name}-{args.tsp}.svg")
            write_report(report, args.out_dir / f"{name}-{args.tsp}.json", layout)


if __name__ == "__main__":
    main()
