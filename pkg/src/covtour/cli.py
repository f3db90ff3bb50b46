"""Command-line entry point: ``covtour {gen,validate,solve,export-milp,decode,compare,oracle}``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from .errors import CovTourError, Infeasible, LimitExceeded, ValidationError
from .instance import PRESETS, InstanceParams, ProblemInstance, generate_sparse, load_instance, save_instance
from .milp import FORMULATIONS, build, decode_solution, export_lp, raw_objective, read_assignment
from .oracle import solve_exact
from .pipeline import SolveOptions, solve
from .solution import Solution, check_feasible, evaluate, load_solution, save_solution, to_dot, to_geojson

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_INFEASIBLE = 4

CROSS_CHECK_TOL = 1e-6
FORMULATION_FLAGS = {tag.lower(): tag for tag in FORMULATIONS}


def _seed(value: Optional[int]) -> int:
    if value is not None:
        return value
    env = os.environ.get("COVTOUR_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise ValidationError("seed", f"COVTOUR_SEED is not an integer: {env!r}") from None


def _read_instance(path: str) -> ProblemInstance:
    return load_instance(Path(path).read_bytes())


def _read_solution(path: str) -> tuple[Solution, Optional[str]]:
    return load_solution(Path(path).read_bytes())


def _write(path: Optional[str], data: bytes):
    if path is None or path == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    else:
        Path(path).write_bytes(data)


def _report(text: str = ""):
    print(text, file=sys.stderr)


def _breakdown(sol: Solution, inst: ProblemInstance) -> str:
    cost = evaluate(inst, sol)
    used = sum(1 for t in sol.tours if len(t))
    return (
        f"travel {cost.travel_s:.3f} s + stops {cost.stop_penalty_s:.3f} s = {cost.total_s:.3f} s "
        f"({used}/{inst.m} tours, {sum(len(t) for t in sol.tours)} stop events)"
    )


def cmd_generate(args) -> int:
    preset = PRESETS[args.preset]
    params = InstanceParams(
        gamma=args.gamma,
        m=args.m,
        capacity=args.capacity,
        buffer=args.buffer,
        stop_penalty=preset["stop_penalty"],
        s_col=preset["s_col"],
        s_dep=preset["s_dep"],
    )
    inst = generate_sparse(args.nodes, args.demand_prob, _seed(args.seed), params)
    _write(args.output, save_instance(inst))
    return EXIT_OK


def cmd_validate(args) -> int:
    inst = _read_instance(args.instance)
    _report(f"instance ok: {len(inst.network.nodes)} nodes, {len(inst.stops)} stops, "
            f"{len(inst.demand_nodes)} demand nodes, m={inst.m}, Q={inst.Q}")
    if args.solution is None:
        return EXIT_OK
    sol, digest = _read_solution(args.solution)
    if digest is not None and digest != inst.digest():
        raise ValidationError("instance", "solution was produced for a different instance")
    report = check_feasible(inst, sol)
    if not report.ok:
        _report(str(report))
        return EXIT_VALIDATION
    _report(f"solution ok: {_breakdown(sol, inst)}")
    return EXIT_OK


def cmd_solve(args) -> int:
    inst = _read_instance(args.instance)
    options = SolveOptions(
        seed=_seed(args.seed),
        max_iterations=args.max_iterations,
        max_length=args.max_length,
        it_no_improve=args.it_no_improve,
        workers=args.workers,
        time_limit=args.time_limit,
    )
    result = solve(inst, options)
    sol = result.solution
    report = check_feasible(inst, sol)
    if not report.ok:
        _report(str(report))
        return EXIT_INFEASIBLE
    fallbacks = sum(r.fallback for r in result.audit)
    _report(f"cost: {_breakdown(sol, inst)}")
    _report(f"phase 1: {result.rounds} round(s), {len(result.audit)} covers routed, {result.phase1_s:.2f} s")
    _report(f"phase 2: {result.phase2_s:.2f} s, {fallbacks} sequential fallback(s)")
    _write(args.output, save_solution(sol, inst))
    if args.geojson:
        Path(args.geojson).write_text(json.dumps(to_geojson(inst, sol), indent=1) + "\n", encoding="utf-8")
    if args.dot:
        Path(args.dot).write_text(to_dot(inst, sol), encoding="utf-8")
    return EXIT_OK


def cmd_export_milp(args) -> int:
    inst = _read_instance(args.instance)
    model = build(inst, FORMULATION_FLAGS[args.formulation], with_valid_ineq=args.valid_ineq == "on")
    _write(args.output, export_lp(model))
    _report(f"{model.tag}: {len(model.variables)} variables, {len(model.constraints)} constraints")
    return EXIT_OK


def cmd_decode(args) -> int:
    inst = _read_instance(args.instance)
    tag = FORMULATION_FLAGS[args.formulation]
    values = read_assignment(Path(args.assignment).read_bytes())
    sol = decode_solution(inst, tag, values)
    raw = raw_objective(build(inst, tag, with_valid_ineq=False), values)
    decoded = evaluate(inst, sol).total_s
    _write(args.output, save_solution(sol, inst))
    _report(f"decoded objective {decoded:.6f}, raw objective {raw:.6f}, difference {decoded - raw:+.3g}")
    if abs(decoded - raw) > CROSS_CHECK_TOL:
        _report("objective cross-check failed")
        return EXIT_VALIDATION
    return EXIT_OK


def _feasibility(inst: Optional[ProblemInstance], sol: Solution) -> str:
    if inst is None:
        return "unchecked"
    report = check_feasible(inst, sol)
    return "feasible" if report.ok else "infeasible (" + ", ".join(sorted(report.kinds())) + ")"


def _total(inst: Optional[ProblemInstance], sol: Solution, path: str) -> float:
    if inst is not None:
        return evaluate(inst, sol).total_s
    if sol.cost is None:
        raise ValidationError("cost", f"{path} records no cost; pass --instance")
    return sol.cost.total_s


def relative_difference(candidate: float, reference: float) -> float:
    """``(candidate - reference) / reference``; zero when both vanish."""
    if reference == 0:
        return 0.0 if candidate == 0 else float("inf")
    return (candidate - reference) / reference


def cmd_compare(args) -> int:
    inst = _read_instance(args.instance) if args.instance else None
    (a, da), (b, db) = _read_solution(args.candidate), _read_solution(args.reference)
    digests = {d for d in (da, db) if d is not None}
    if len(digests) > 1:
        raise ValidationError("instance", "solutions belong to different instances")
    if inst is not None and digests and inst.digest() not in digests:
        raise ValidationError("instance", "solutions do not belong to the given instance")
    za, zb = _total(inst, a, args.candidate), _total(inst, b, args.reference)
    print(f"candidate {za:.6f} [{_feasibility(inst, a)}]")
    print(f"reference {zb:.6f} [{_feasibility(inst, b)}]")
    print(f"relative difference {100 * relative_difference(za, zb):+.2f}%")
    return EXIT_OK


def cmd_oracle(args) -> int:
    inst = _read_instance(args.instance)
    result = solve_exact(inst, allow_splits=not args.no_splits)
    _report(f"optimum: {_breakdown(result.optimum, inst)}; {result.explored} covers explored")
    _write(args.output, save_solution(result.optimum, inst))
    return EXIT_OK


def _add_seed(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=None, help="random seed (falls back to COVTOUR_SEED, then 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="covtour", description="Capacitated covering tours on road networks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a random sparse instance")
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--demand-prob", type=float, required=True)
    _add_seed(p)
    p.add_argument("--gamma", type=float, default=0.0, help="walking radius in metres")
    fleet = p.add_mutually_exclusive_group(required=True)
    fleet.add_argument("--m", type=int, help="number of tours (capacity derived)")
    fleet.add_argument("--capacity", type=int, help="vehicle capacity (tour count derived)")
    p.add_argument("--buffer", type=float, default=0.0, help="unused share of capacity when deriving the tour count")
    p.add_argument("--preset", choices=sorted(PRESETS), default="small")
    p.add_argument("-o", "--output", help="instance file (default stdout)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("validate", help="check an instance and optionally a solution for it")
    p.add_argument("instance")
    p.add_argument("solution", nargs="?")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("solve", help="run the two-phase heuristic")
    p.add_argument("instance")
    _add_seed(p)
    p.add_argument("--max-iterations", type=int, default=SolveOptions.max_iterations)
    p.add_argument("--max-length", type=int, default=SolveOptions.max_length)
    p.add_argument("--it-no-improve", type=int, default=SolveOptions.it_no_improve)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--time-limit", type=float, default=None, help="wall-clock limit in seconds")
    p.add_argument("-o", "--output", help="solution file (default stdout)")
    p.add_argument("--geojson")
    p.add_argument("--dot")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("export-milp", help="write an LP file for one formulation")
    p.add_argument("instance")
    p.add_argument("--formulation", choices=sorted(FORMULATION_FLAGS), required=True)
    p.add_argument("--valid-ineq", choices=("on", "off"), default="on")
    p.add_argument("-o", "--output", help="LP file (default stdout)")
    p.set_defaults(func=cmd_export_milp)

    p = sub.add_parser("decode", help="turn a solver assignment into tours")
    p.add_argument("instance")
    p.add_argument("--formulation", choices=sorted(FORMULATION_FLAGS), required=True)
    p.add_argument("assignment", help="lines of 'name value'")
    p.add_argument("-o", "--output", help="solution file (default stdout)")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("compare", help="relative difference of a candidate against a reference solution")
    p.add_argument("candidate")
    p.add_argument("reference")
    p.add_argument("--instance", help="re-evaluate and check feasibility against this instance")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("oracle", help="exact optimum of a tiny instance")
    p.add_argument("instance")
    p.add_argument("--no-splits", action="store_true", help="forbid split deliveries")
    p.add_argument("-o", "--output", help="solution file (default stdout)")
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "workers", 1) < 1:
        parser.error("--workers must be at least 1")
    try:
        return args.func(args)
    except (Infeasible, LimitExceeded) as exc:
        _report(f"error: {exc}")
        return EXIT_INFEASIBLE
    except CovTourError as exc:
        _report(f"error: {exc}")
        return EXIT_VALIDATION
    except OSError as exc:
        _report(f"error: {exc}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
