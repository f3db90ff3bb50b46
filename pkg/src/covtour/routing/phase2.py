"""Phase 2: route each set cover as a CVRP over split pieces and keep the cheapest solution."""

from __future__ import annotations

import random
import threading
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional

from ..errors import Infeasible
from ..instance import Number, ProblemInstance
from ..setcover import SetCover
from ..solution import Solution, Tour, check_feasible, with_cost
from .hgs import CvrpSolution, CvrpTask, HgsParams, make_task, solve_cvrp
from .split import split_demands


def _plain(q) -> Number:
    if isinstance(q, Fraction) and q.denominator == 1:
        return int(q)
    return q


def merge_to_solution(inst: ProblemInstance, cover: SetCover, task: CvrpTask, cvrp: CvrpSolution) -> Solution:
    """Tours from CVRP routes: pieces of one stop within a route collapse onto its first visit."""
    tours = []
    for route in cvrp.routes:
        qty: dict[int, Number] = {}
        for c in route:
            j, q = task.customers[c - 1]
            qty[j] = qty.get(j, 0) + q
        tours.append(Tour(tuple((j, _plain(q)) for j, q in qty.items())))
    tours = [t for t in tours if len(t)]
    tours += [Tour()] * (inst.m - len(tours))
    assignment = {i: j for j, w in cover.assigned.items() for i in w}
    return with_cost(inst, Solution(tuple(tours), assignment))


def sequential_fill(inst: ProblemInstance, cover: SetCover) -> Solution:
    """Fill vehicles one after another along the giant tour, splitting a stop at each full vehicle.

    Always feasible when the total demand fits the fleet; used when the
    piece-based CVRP cannot be packed.
    """
    Q = Fraction(inst.Q) if not isinstance(inst.Q, Fraction) else inst.Q
    qty = cover.quantities(inst)
    tours: list[list[tuple[int, Number]]] = [[]]
    room = Q
    for j in cover.stops:
        left = Fraction(qty.get(j, 0)) if not isinstance(qty.get(j, 0), Fraction) else qty.get(j, 0)
        while left > 0:
            if room == 0:
                tours.append([])
                room = Q
            take = min(room, left)
            tours[-1].append((j, _plain(take)))
            room -= take
            left -= take
    if len(tours) > inst.m:
        raise Infeasible("total demand exceeds the fleet capacity")
    out = [Tour(tuple(t)) for t in tours if t]
    out += [Tour()] * (inst.m - len(out))
    assignment = {i: j for j, w in cover.assigned.items() for i in w}
    return with_cost(inst, Solution(tuple(out), assignment))


@dataclass(frozen=True)
class CoverReport:
    """Audit record of one routed cover."""

    key: str
    stops: tuple[int, ...]
    giant_cost: float
    pieces: int
    travel_s: float
    total_s: float
    fallback: bool
    seconds: float


def _rank(sol: Solution) -> tuple:
    return (round(sol.cost.total_s, 9), tuple(t.visits for t in sol.tours))


class BestCell:
    """Best solution so far; :meth:`offer` is an atomic compare-and-swap on total cost."""

    def __init__(self):
        self._lock = threading.Lock()
        self.solution: Optional[Solution] = None

    def offer(self, sol: Solution) -> bool:
        with self._lock:
            if self.solution is None or _rank(sol) < _rank(self.solution):
                self.solution = sol
                return True
            return False


def route_cover(
    inst: ProblemInstance,
    cover: SetCover,
    rng: random.Random,
    it_no_improve: int = 10000,
    params: HgsParams = HgsParams(),
    deadline: Optional[float] = None,
) -> tuple[Solution, CoverReport]:
    """Split, route and merge one cover; falls back to sequential filling if packing fails."""
    start = time.monotonic()
    pieces = split_demands(cover.quantities(inst), inst.Q)
    task = make_task(pieces, inst.travel, inst.depot, inst.Q, inst.m)
    fallback = False
    try:
        cvrp = solve_cvrp(task, rng, it_no_improve, params, deadline)
        sol = merge_to_solution(inst, cover, task, cvrp)
    except Infeasible:
        fallback = True
        sol = sequential_fill(inst, cover)
    report = CoverReport(
        cover.key,
        cover.stops,
        cover.giant_cost,
        len(pieces),
        sol.cost.travel_s,
        sol.cost.total_s,
        fallback,
        time.monotonic() - start,
    )
    return sol, report


def run_phase2(
    inst: ProblemInstance,
    covers: Iterable[SetCover],
    rng: random.Random,
    it_no_improve: int = 10000,
    treated: Optional[set] = None,
    best: Optional[BestCell] = None,
    params: HgsParams = HgsParams(),
    deadline: Optional[float] = None,
) -> tuple[Optional[Solution], list[CoverReport]]:
    """Route every cover in turn, registering each as treated, and keep the cheapest feasible result."""
    best = best if best is not None else BestCell()
    audit = []
    for cover in covers:
        if deadline is not None and time.monotonic() > deadline and best.solution is not None:
            break
        if treated is not None:
            treated.add(cover.key)
        sol, report = route_cover(inst, cover, rng, it_no_improve, params, deadline)
        audit.append(report)
        if check_feasible(inst, sol).ok:
            best.offer(sol)
    return best.solution, audit
