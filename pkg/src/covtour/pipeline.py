"""Two-phase heuristic driver: set covers feed CVRP routing, optionally across worker processes."""

from __future__ import annotations

import random
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

from .errors import Infeasible
from .instance import ProblemInstance
from .routing.hgs import HgsParams
from .routing.phase2 import BestCell, CoverReport, route_cover
from .setcover import DEFAULT_MAX_ITERATIONS, DEFAULT_MAX_LENGTH, SetCover, run_phase1
from .solution import Solution, check_feasible


@dataclass(frozen=True)
class SolveOptions:
    seed: int = 0
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    max_length: int = DEFAULT_MAX_LENGTH
    it_no_improve: int = 10000
    workers: int = 1
    time_limit: Optional[float] = None
    max_rounds: Optional[int] = None


@dataclass
class SolveResult:
    solution: Solution
    audit: list[CoverReport] = field(default_factory=list)
    rounds: int = 0
    phase1_s: float = 0.0
    phase2_s: float = 0.0


def cover_rng(seed: int, cover: SetCover) -> random.Random:
    """Routing randomness per cover, independent of which worker handles it."""
    return random.Random(f"{seed}:{cover.key}")


def _route_job(args):
    inst, cover, seed, it_no_improve, params, deadline = args
    return route_cover(inst, cover, cover_rng(seed, cover), it_no_improve, params, deadline)


def solve(inst: ProblemInstance, options: SolveOptions = SolveOptions(), params: HgsParams = HgsParams()) -> SolveResult:
    """Run phase 1 and route the resulting covers; returns the cheapest feasible solution.

    Without a time limit a single round is made. With one, further rounds
    (fresh phase-1 runs that penalize already routed covers) continue until the
    limit or until a round proposes nothing new. ``max_rounds`` overrides both.
    """
    deadline = time.monotonic() + options.time_limit if options.time_limit else None
    max_rounds = options.max_rounds or (None if deadline is not None else 1)
    rng = random.Random(options.seed)
    treated: set = set()
    best = BestCell()
    result = SolveResult(solution=None)  # type: ignore[arg-type]
    pool = ProcessPoolExecutor(options.workers) if options.workers > 1 else None
    try:
        while max_rounds is None or result.rounds < max_rounds:
            if deadline is not None and time.monotonic() > deadline and best.solution is not None:
                break
            t0 = time.monotonic()
            covers = run_phase1(inst, rng, options.max_iterations, options.max_length, treated=treated, deadline=deadline)
            fresh = [c for c in covers if c.key not in treated]
            result.phase1_s += time.monotonic() - t0
            if not fresh:
                break
            result.rounds += 1
            t0 = time.monotonic()
            for c in fresh:
                treated.add(c.key)
            jobs = [(inst, c, options.seed, options.it_no_improve, params, deadline) for c in fresh]
            outcomes = pool.map(_route_job, jobs) if pool else map(_route_job, jobs)
            for cover, (sol, report) in zip(fresh, outcomes):
                result.audit.append(report)
                if check_feasible(inst, sol).ok:
                    best.offer(sol)
                if pool is None and deadline is not None and time.monotonic() > deadline and best.solution is not None:
                    break
            result.phase2_s += time.monotonic() - t0
    finally:
        if pool is not None:
            pool.shutdown(cancel_futures=True)
    if best.solution is None:
        raise Infeasible("no feasible solution found")
    result.solution = best.solution
    return result
