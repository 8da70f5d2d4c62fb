"""Command line front end: ``cgbp solve`` and ``cgbp gen``."""
from __future__ import annotations

import argparse
import logging
import os
import sys

from . import apps
from .apps.report import dumps_report, format_report, solution_report
from .branch_price import BEST_FIRST, DFS, BpConfig, run_bp, write_history
from .colgen import CONVERGED, CgConfig, run_cg, write_trace
from .master import init_rmp
from .oracle import LimitExceeded, brute_force_mip

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_LIMIT = 0, 1, 2, 3
LOG_LEVELS = {"off": logging.CRITICAL + 1, "info": logging.INFO, "debug": logging.DEBUG}


def _beam(text: str):
    if text == "unlimited":
        return None
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("beam width must be >= 1 or 'unlimited'")
    return v


def cmd_solve(args) -> int:
    try:
        inst = apps.load_instance(args.instance)
    except (OSError, apps.InstanceError) as exc:
        print(f"error: {args.instance}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    model = apps.build_model(inst)
    try:
        cg_cfg = CgConfig(rc_tolerance=args.rc_tol, max_iterations=args.max_iters, time_limit=args.time_limit)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    cols = apps.warm_start(model, inst)
    if args.algorithm == "cg":
        result = run_cg(model, init_rmp(model, cols), config=cg_cfg)
        if args.trace:
            write_trace(result, args.trace)
        code = EXIT_OK if result.termination == CONVERGED else EXIT_LIMIT
        if result.artificial_active and result.termination == CONVERGED:
            code = EXIT_INFEASIBLE
    elif args.algorithm == "bp":
        cfg = BpConfig(node_strategy=args.node_strategy, beam_width=args.beam_width, cg=cg_cfg,
                       time_limit=args.time_limit)
        result = run_bp(model, config=cfg, initial_columns=cols)
        if args.trace:
            write_history(result, args.trace)
        if result.status == "Infeasible":
            code = EXIT_INFEASIBLE
        elif result.limited or result.solution is None:
            code = EXIT_LIMIT
        else:
            code = EXIT_OK
    else:
        try:
            result = brute_force_mip(model)
        except LimitExceeded as exc:
            print(f"oracle: {exc}", file=sys.stderr)
            return EXIT_LIMIT
        code = EXIT_OK if result.status == "Optimal" else EXIT_INFEASIBLE
    rep = solution_report(model, result, inst)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(dumps_report(rep))
    print(format_report(rep))
    return code


def cmd_gen(args) -> int:
    try:
        if args.kind == "cutting_stock":
            inst = apps.generate_cutting_stock(args.seed, items=args.items, width=args.width,
                                               max_size=args.max_size, min_size=args.min_size,
                                               max_demand=args.max_demand)
        else:
            inst = apps.generate_net_path(args.seed, nodes=args.nodes, tasks=args.tasks,
                                          arcs_per_node=args.arcs_per_node, max_capacity=args.max_capacity,
                                          max_demand=args.max_demand, hop_limit=args.hop_limit)
    except apps.InstanceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    text = apps.dumps_instance(inst)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cgbp", description="Column generation and branch-and-price solver")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve an instance file")
    s.add_argument("--instance", required=True)
    s.add_argument("--algorithm", choices=("cg", "bp", "oracle"), default="bp")
    s.add_argument("--beam-width", type=_beam, default=None, metavar="N|unlimited")
    s.add_argument("--max-iters", type=int, default=500)
    s.add_argument("--rc-tol", type=float, default=1e-6)
    s.add_argument("--node-strategy", choices=(BEST_FIRST, DFS), default=BEST_FIRST)
    s.add_argument("--time-limit", type=float, default=None, metavar="SECS")
    s.add_argument("--seed", type=int, default=0, help="accepted for reproducible batch scripts; solvers are deterministic")
    s.add_argument("--out", help="report JSON path")
    s.add_argument("--trace", help="CG trace or BP history CSV path")
    s.set_defaults(func=cmd_solve)

    g = sub.add_parser("gen", help="generate a seeded instance")
    g.add_argument("--kind", choices=("cutting_stock", "net_path"), required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")
    g.add_argument("--items", type=int)
    g.add_argument("--width", type=int)
    g.add_argument("--max-size", type=int)
    g.add_argument("--min-size", type=int)
    g.add_argument("--max-demand", type=int, default=None)
    g.add_argument("--nodes", type=int)
    g.add_argument("--tasks", type=int)
    g.add_argument("--arcs-per-node", type=float, default=2.0)
    g.add_argument("--max-capacity", type=int, default=3)
    g.add_argument("--hop-limit", action=argparse.BooleanOptionalAction, default=None)
    g.set_defaults(func=cmd_gen)
    return p


def main(argv=None) -> int:
    level = os.environ.get("COLGEN_LOG", "off").lower()
    logging.basicConfig(level=LOG_LEVELS.get(level, LOG_LEVELS["off"]), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    if getattr(args, "max_demand", 0) is None:
        args.max_demand = 8 if args.kind == "cutting_stock" else 2
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
