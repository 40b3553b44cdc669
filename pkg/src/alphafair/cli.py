"""Command-line entry point: ``alphafair {gen,solve,sweep,validate}``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from alphafair import metrics
from alphafair.errors import AlphaFairError
from alphafair.harness import (
    ExperimentConfig,
    generate_instance,
    parse_alpha_grid,
    prepare_instance,
    run_sweep,
    solve_single,
    write_instance_files,
)
from alphafair.solver import SolverConfig, read_allocation_csv, validate_allocation, write_allocation_csv
from alphafair.topology import route_all

EXIT_OK, EXIT_INVALID, EXIT_CONFIG, EXIT_TIMEOUT = 0, 1, 2, 3

log = logging.getLogger("alphafair")


def _instance_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--topology", default="dt14", help="builtin name (dt14) or topology JSON file")
    p.add_argument("--connections", help="connections JSON file; generated from --seed if omitted")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=20, help="connections to generate")
    p.add_argument("--M", dest="slots", type=int, default=100, help="frequency slots per link")
    p.add_argument("--m", dest="menu", type=int, default=50, help="spectrum-allocation choices per connection")
    p.add_argument("--T", dest="samples", type=int, default=1000, help="fluctuation samples per connection")
    p.add_argument("--epsilon", type=float, default=1e-3)


def _solver_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=("exact", "heuristic"), default="heuristic")
    p.add_argument("--time-budget-secs", type=float, default=600.0)
    p.add_argument("--node-limit", type=int, default=None,
                   help="branch-and-bound node budget (default: 2e6 exact, 20000 heuristic)")
    p.add_argument("--strict-first-slot", action="store_true",
                   help="never use slot 1, as the literal boundary constraint demands")
    p.add_argument("--out", default=None, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="alphafair", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="write topology and connection files for a seeded instance")
    _instance_args(gen)
    gen.add_argument("--out", required=True)

    solve = sub.add_parser("solve", help="solve a single alpha")
    _instance_args(solve)
    _solver_args(solve)
    solve.add_argument("--alpha", type=float, required=True)

    sweep = sub.add_parser("sweep", help="solve and evaluate a grid of alpha values")
    _instance_args(sweep)
    _solver_args(sweep)
    sweep.add_argument("--alpha-grid", default="0:5:0.1", help="start:stop:step")
    sweep.add_argument("--workers", type=int, default=1)
    sweep.add_argument("--plots", action="store_true", help="also render SVG charts")

    validate = sub.add_parser("validate", help="check an allocation dump against all RSA constraints")
    _instance_args(validate)
    validate.add_argument("--allocation", required=True)
    validate.add_argument("--strict-first-slot", action="store_true")
    return parser


def _config(args, **extra) -> ExperimentConfig:
    solver = None
    if hasattr(args, "mode"):
        solver = SolverConfig(mode=args.mode, time_budget=args.time_budget_secs, node_limit=args.node_limit,
                              strict_first_slot=args.strict_first_slot)
    kwargs = dict(topology=args.topology, connections=args.connections, n=args.n, m=args.menu,
                  M=args.slots, T=args.samples, seed=args.seed, epsilon=args.epsilon, **extra)
    if solver is not None:
        kwargs["solver"] = solver
    return ExperimentConfig(**kwargs)


def cmd_gen(args) -> int:
    topology, conns = generate_instance(_config(args))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    routes = route_all(topology, conns)
    write_instance_files(out, topology, conns)
    print(f"wrote {len(conns)} connections ({sum(r.hops for r in routes)} link hops) to {out}")
    return EXIT_OK


def cmd_solve(args) -> int:
    config = _config(args)
    instance, alloc, report = solve_single(config, args.alpha)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_allocation_csv(alloc, out / "allocation.csv")
        with open(out / "metrics.csv", "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(metrics.CSV_FIELDS)
            writer.writerow(report.row())
        write_instance_files(out, instance.topology, instance.connections)
    print(",".join(metrics.CSV_FIELDS))
    print(",".join(report.row()))
    print(f"# served {alloc.served}/{alloc.n}, objective {alloc.objective:.9g}, status {alloc.status}",
          file=sys.stderr)
    return EXIT_TIMEOUT if alloc.stats.get("timed_out") else EXIT_OK


def cmd_sweep(args) -> int:
    start, stop, step = parse_alpha_grid(args.alpha_grid)
    config = _config(args, alpha_start=start, alpha_stop=stop, alpha_step=step,
                     out_dir=args.out, workers=args.workers, plots=args.plots)
    result = run_sweep(config)
    print(",".join(metrics.CSV_FIELDS))
    for p in result.points:
        print(",".join(p.report.row()))
    if args.out:
        print(f"# wrote {args.out}/sweep.csv (fingerprint {result.fingerprint[:12]})", file=sys.stderr)
    return EXIT_TIMEOUT if result.timed_out else EXIT_OK


def cmd_validate(args) -> int:
    config = _config(args)
    instance = prepare_instance(config)
    sizes, starts = read_allocation_csv(args.allocation)
    problems = validate_allocation(sizes, starts, instance.P, instance.U, instance.M,
                                   strict_first_slot=args.strict_first_slot)
    for msg in problems:
        print(msg)
    if problems:
        return EXIT_INVALID
    print(f"ok: {len(sizes)} connections satisfy all constraints")
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "solve": cmd_solve, "sweep": cmd_sweep, "validate": cmd_validate}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (AlphaFairError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
