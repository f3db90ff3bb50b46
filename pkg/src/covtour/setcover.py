"""Phase 1: randomized set covers, alternatives, savings giant tours and the best-covers queue."""

from __future__ import annotations

import hashlib
import random
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional

from .errors import UncoverableDemandNode
from .instance import ProblemInstance
from .pqueue import BoundedBest

PENALTY_FACTOR = 1.5
DEFAULT_MAX_ITERATIONS = 200
DEFAULT_MAX_LENGTH = 50


def canonical_key(stops: Iterable[int]) -> str:
    text = ",".join(str(j) for j in sorted(set(stops)))
    return hashlib.sha1(text.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class SetCover:
    """Selected stops with the demand nodes each one serves.

    ``stops`` is in giant-tour order once the cover has been routed, otherwise
    ascending. ``giant_cost`` is the giant tour's travel plus one stop penalty
    per stop (``nan`` before routing).
    """

    stops: tuple[int, ...]
    assigned: Mapping[int, frozenset[int]]
    giant_cost: float = float("nan")
    key: str = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "key", canonical_key(self.stops))

    def quantities(self, inst: ProblemInstance) -> dict[int, object]:
        """Load collected at each stop with a nonempty share."""
        return {j: sum(inst.demands[i] for i in sorted(w)) for j, w in self.assigned.items() if w}


def partition(inst: ProblemInstance, stops: Iterable[int]) -> dict[int, frozenset[int]]:
    """W_j sets: each demand node goes to its best-ranked selected stop."""
    chosen = set(stops)
    out: dict[int, set[int]] = {j: set() for j in chosen}
    for i in inst.demand_nodes:
        j = next((j for j in inst.prefs[i] if j in chosen), None)
        if j is None:
            raise UncoverableDemandNode(i)
        out[j].add(i)
    return {j: frozenset(w) for j, w in out.items()}


def _covers(inst: ProblemInstance, stops: set[int]) -> bool:
    return all(any(j in stops for j in inst.prefs[i]) for i in inst.demand_nodes)


def construct_set(inst: ProblemInstance, rng: random.Random) -> SetCover:
    """Randomized greedy cover followed by redundant-stop removal."""
    coverers = inst.coverers
    uncovered = set(inst.demand_nodes)
    chosen: set[int] = set()
    while uncovered:
        i = rng.choice(sorted(uncovered))
        pref = inst.prefs[i].ranked_stops
        if not pref:
            raise UncoverableDemandNode(i)
        best = max(pref, key=lambda j: (len(coverers[j] & uncovered), -j))
        chosen.add(best)
        uncovered -= coverers[best]
    for j in sorted(chosen):
        if len(chosen) > 1 and _covers(inst, chosen - {j}):
            chosen.discard(j)
    stops = tuple(sorted(chosen))
    return SetCover(stops, partition(inst, stops))


def compute_alternatives(inst: ProblemInstance, cover: SetCover) -> dict[int, tuple[int, ...]]:
    """Group per cover stop: the stop itself plus every other stop able to serve all of its W_j.

    Stops serving nobody get no group.
    """
    coverers = inst.coverers
    groups = {}
    for j in cover.stops:
        w = cover.assigned.get(j, frozenset())
        if not w:
            continue
        alts = [jj for jj in inst.stops if jj != j and w <= coverers[jj]]
        groups[j] = tuple(sorted([j, *alts]))
    return groups


def tour_cost(inst: ProblemInstance, order) -> float:
    if not order:
        return 0.0
    t = inst.travel
    total = t(inst.depot, order[0]) + t(order[-1], inst.depot)
    for a, b in zip(order, order[1:]):
        total += t(a, b)
    return total + inst.stop_penalty * len(order)


def insertion_savings(inst: ProblemInstance, tour: list[int], group, back: bool) -> tuple[float, int]:
    """Best member of ``group`` to attach at one end of ``tour`` and the savings of doing so.

    The member is the one closest to the current end node; savings compare an
    out-and-back trip to the group's nearest member against joining it to the tour.
    """
    t = inst.travel
    depot = inst.depot
    if back:
        end = tour[-1]
        cand = min(group, key=lambda c: (t(end, c), c))
        to_group = min(t(depot, c) for c in group)
        return to_group + t(end, depot) - t(end, cand), cand
    end = tour[0]
    cand = min(group, key=lambda c: (t(c, end), c))
    from_group = min(t(c, depot) for c in group)
    return from_group + t(depot, end) - t(cand, end), cand


def build_giant_tour(
    inst: ProblemInstance, cover: SetCover, groups: Mapping[int, tuple[int, ...]], rng: random.Random
) -> tuple[list[int], SetCover]:
    """Grow a single depot tour from a random cover stop by savings insertions at either end."""
    coverers = inst.coverers
    need = set(inst.demand_nodes)
    start = rng.choice(list(cover.stops))
    if start in groups:
        # enter the drawn group at its depot-closest member
        start = min(groups[start], key=lambda c: (inst.travel(inst.depot, c), c))
    tour = [start]
    covered = set(coverers[start])
    open_groups = {j: g for j, g in groups.items() if start not in g}
    while not need <= covered and open_groups:
        back = rng.random() < 0.5
        best = None
        for j in sorted(open_groups):
            s, cand = insertion_savings(inst, tour, open_groups[j], back)
            key = (-s, cand)
            if best is None or key < best[0]:
                best = (key, cand)
        cand = best[1]
        if back:
            tour.append(cand)
        else:
            tour.insert(0, cand)
        covered |= coverers[cand]
        open_groups = {j: g for j, g in open_groups.items() if cand not in g}
    stops = tuple(tour)
    redefined = SetCover(stops, partition(inst, stops), tour_cost(inst, stops))
    return tour, redefined


class CoverQueue:
    """The best covers found so far by (possibly penalized) giant-tour cost.

    ``treated`` collects keys of covers already routed; it may be shared with
    phase-2 workers and is only ever added to.
    """

    def __init__(self, max_length: int = DEFAULT_MAX_LENGTH, treated: Optional[set] = None):
        self.max_length = max_length
        self.treated: set = treated if treated is not None else set()
        self._best: BoundedBest[SetCover] = BoundedBest(max_length)

    def __len__(self) -> int:
        return len(self._best)

    def __contains__(self, key: str) -> bool:
        return key in self._best

    def score(self, cover: SetCover) -> float:
        return cover.giant_cost * PENALTY_FACTOR if cover.key in self.treated else cover.giant_cost

    def offer(self, cover: SetCover) -> bool:
        """Insert when novel and the queue has room or the cover beats the current worst."""
        return self._best.offer(self.score(cover), cover.key, cover)

    def max_cost(self) -> float:
        return self._best.worst_key()

    def min_cost(self) -> float:
        return self._best.best_key()

    def covers(self) -> list[SetCover]:
        return self._best.items()


def run_phase1(
    inst: ProblemInstance,
    rng: random.Random,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    max_length: int = DEFAULT_MAX_LENGTH,
    sink: Optional[Callable[[SetCover], None]] = None,
    treated: Optional[set] = None,
    deadline: Optional[float] = None,
) -> list[SetCover]:
    """Collect the best covers until ``max_iterations`` constructions in a row bring nothing new.

    Returns the queue from cheapest to dearest and hands each cover to ``sink``.
    ``deadline`` is a :func:`time.monotonic` value that also ends the loop.
    """
    if max_iterations < 1 or max_length < 1:
        raise ValueError("max_iterations and max_length must be at least 1")
    queue = CoverQueue(max_length, treated)
    idle = 0
    while idle < max_iterations:
        if deadline is not None and time.monotonic() > deadline and len(queue):
            break
        cover = construct_set(inst, rng)
        groups = compute_alternatives(inst, cover)
        _, routed = build_giant_tour(inst, cover, groups, rng)
        if queue.offer(routed):
            idle = 0
        else:
            idle += 1
    out = queue.covers()
    if sink is not None:
        for cover in out:
            sink(cover)
    return out
