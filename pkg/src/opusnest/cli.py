"""Command line entry point: ``solve``, ``tune-qaoa`` and ``nff``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict

from .compat import ConfigurationError, DiscretizationConfig, NffCache, compute_nff, pair_distance, incompatibility
from .geometry import GeometryError
from .interface import ParseError, load_instance, write_report, write_svg
from .pipeline import InfeasibleError, SolverConfig, solve, tune_qaoa
from .qaoa import QaoaConfig

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_PARSE = 2
EXIT_INFEASIBLE = 3
EXIT_INVALID = 4


def _fail(category: str, message: str, code: int) -> int:
    print(json.dumps({"error": category, "message": message}), file=sys.stderr)
    return code


def _instance_arg(p: argparse.ArgumentParser) -> None:
    p.add_argument("instance_pos", nargs="?", metavar="INSTANCE", help="instance JSON file")
    p.add_argument("--instance", help="instance JSON file (alternative to the positional form)")


def _discretization(args, inst) -> DiscretizationConfig:
    step = args.rotation_step or inst.rotation_step_deg or 90.0
    return DiscretizationConfig.uniform(args.theta_step, step, args.delta_r)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="opusnest", description="Irregular strip packing via clustering, TSP ordering and rectangle packing.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="pack an instance")
    _instance_arg(s)
    s.add_argument("--tsp", choices=("brute", "qaoa"), default="brute")
    s.add_argument("--reps", type=int, default=5, help="QAOA layers p")
    s.add_argument("--shots", type=int, default=1000)
    s.add_argument("--optimizer", choices=("cobyla", "nelder-mead", "spsa"), default=QaoaConfig.optimizer)
    s.add_argument("--max-evals", type=int, default=QaoaConfig.max_evals)
    s.add_argument("--qaoa-min-size", type=int, default=3)
    s.add_argument("--rotation-step", type=float, default=None, help="orientation step in degrees")
    s.add_argument("--theta-step", type=float, default=5.0, help="polar angle step of the no-fit scan")
    s.add_argument("--delta-r", type=float, default=5.0)
    s.add_argument("--max-cluster", type=int, default=4)
    s.add_argument("--partitions", type=int, default=20)
    s.add_argument("--grid", type=int, default=100)
    s.add_argument("--hard-stop", action="store_true", help="stop agglomeration at the first oversize merge")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out-svg")
    s.add_argument("--out-report")

    t = sub.add_parser("tune-qaoa", help="QAOA hyper-parameter experiment on random instances")
    t.add_argument("--instances", type=int, default=30)
    t.add_argument("--nodes", type=int, default=4)
    t.add_argument("--reps-min", type=int, default=1)
    t.add_argument("--reps-max", type=int, default=5)
    t.add_argument("--shots", type=int, default=1000)
    t.add_argument("--optimizers", default=QaoaConfig.optimizer, help="comma separated")
    t.add_argument("--max-evals", type=int, default=QaoaConfig.max_evals)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out")

    n = sub.add_parser("nff", help="dump the no-fit table of one ordered piece pair")
    _instance_arg(n)
    n.add_argument("--pair", required=True, help="i,j piece indices")
    n.add_argument("--rotation-step", type=float, default=None)
    n.add_argument("--theta-step", type=float, default=5.0)
    n.add_argument("--delta-r", type=float, default=5.0)
    n.add_argument("--out")
    return parser


def _load(args):
    path = args.instance or args.instance_pos
    if not path:
        raise ParseError("argv", "no instance given")
    return load_instance(path)


def cmd_solve(args) -> int:
    inst = _load(args)
    pieces = inst.polygons()
    cfg = SolverConfig(
        discretization=_discretization(args, inst),
        n_max=args.max_cluster,
        n_partitions=args.partitions,
        tsp_backend=args.tsp,
        qaoa=QaoaConfig(p=args.reps, shots=args.shots, optimizer=args.optimizer, max_evals=args.max_evals,
                        seed=args.seed),
        qaoa_min_size=args.qaoa_min_size,
        grid_divisions=args.grid,
        seed=args.seed,
        hard_stop=args.hard_stop,
        workers=args.workers,
    )
    layout, report = solve(pieces, inst.height, cfg, cache=NffCache.from_env())
    report.name = inst.name
    if args.out_svg:
        write_svg(layout, args.out_svg)
    if args.out_report:
        write_report(report, args.out_report, layout)
    print(f"{inst.name}: L={report.length:.2f} H={report.height:g} waste={report.waste_percent:.2f}% "
          f"partitions={report.partitions_kept}/{report.partitions_generated} tsp_calls={report.tsp_calls}")
    if report.violations:
        return _fail("invalid-layout", "; ".join(report.violations), EXIT_INVALID)
    return EXIT_OK


def cmd_tune(args) -> int:
    opts = [o.strip() for o in args.optimizers.split(",") if o.strip()]
    rows = tune_qaoa(args.instances, args.nodes, range(args.reps_min, args.reps_max + 1), opts,
                     args.shots, args.seed, args.max_evals)
    print(f"{'optimizer':<12} {'p':>2} {'optimality':>10} {'time':>9}")
    for r in rows:
        print(f"{r.optimizer:<12} {r.p:>2} {100 * r.mean_optimality:>9.1f}% {r.wall_time:>8.1f}s")
    if rows:
        print(f"random-path baseline: {100 * rows[0].random_baseline:.1f}%")
    if args.out:
        doc = {"instances": args.instances, "nodes": args.nodes, "shots": args.shots, "seed": args.seed,
               "random_baseline": rows[0].random_baseline if rows else None,
               "rows": [asdict(r) for r in rows]}
        with open(args.out, "w") as fh:
            json.dump(doc, fh, indent=2)
    return EXIT_OK


def cmd_nff(args) -> int:
    inst = _load(args)
    pieces = inst.polygons()
    try:
        i, j = (int(v) for v in args.pair.split(","))
    except ValueError:
        raise ParseError("--pair", f"expected 'i,j', got {args.pair!r}")
    if not (0 <= i < len(pieces) and 0 <= j < len(pieces)):
        raise ParseError("--pair", f"indices must lie in 0..{len(pieces) - 1}")
    cfg = _discretization(args, inst)
    table = compute_nff(pieces[i], pieces[j], cfg)
    pp = pair_distance(pieces[i], pieces[j], table)
    doc = {"pair": [i, j], "distance": pp.distance, "gi": incompatibility(pp),
           "theta_star": pp.theta_star, "r_star": pp.r_star, "phi_star": pp.phi_star,
           "table": table.to_json()}
    text = json.dumps(doc, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        print(text)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(name)s: %(message)s")
    handlers = {"solve": cmd_solve, "tune-qaoa": cmd_tune, "nff": cmd_nff}
    try:
        return handlers[args.command](args)
    except ParseError as exc:
        return _fail("parse", str(exc), EXIT_PARSE)
    except (GeometryError, ConfigurationError, ValueError) as exc:
        return _fail("config", str(exc), EXIT_PARSE)
    except InfeasibleError as exc:
        return _fail("infeasible", str(exc), EXIT_INFEASIBLE)
    except OSError as exc:
        return _fail("io", str(exc), EXIT_ERROR)


if __name__ == "__main__":
    sys.exit(main())
