"""Exact reference solver for desk-scale instances.

Used by tests and the acceptance suite only. Everything here is exhaustive
enumeration plus Held-Karp dynamic programming, kept deliberately independent
of the heuristic code paths it checks.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import networkx as nx

from .errors import Infeasible, LimitExceeded
from .instance import ProblemInstance
from .solution import Solution, Tour, with_cost

INF = float("inf")


@dataclass(frozen=True)
class OracleLimits:
    max_stops: int = 12
    max_m: int = 3
    max_total_demand: int = 40


@dataclass(frozen=True)
class OracleResult:
    optimum: Solution
    cost: float
    explored: int


class HeldKarp:
    """Shortest closed tours from node 0 through every subset of nodes ``1..n``.

    ``tour_cost[mask]`` is the optimal cycle length for the subset encoded by
    ``mask`` (bit ``b`` stands for node ``b + 1``); :meth:`route` recovers the order.
    """

    def __init__(self, dist: Sequence[Sequence[float]], n: int):
        self.n = n
        size = 1 << n
        best = [[INF] * n for _ in range(size)]
        parent = [[-1] * n for _ in range(size)]
        for b in range(n):
            best[1 << b][b] = dist[0][b + 1]
        for mask in range(1, size):
            row = best[mask]
            for last in range(n):
                here = row[last]
                if here == INF:
                    continue
                d_last = dist[last + 1]
                for nxt in range(n):
                    bit = 1 << nxt
                    if mask & bit:
                        continue
                    cand = here + d_last[nxt + 1]
                    target = best[mask | bit]
                    if cand < target[nxt]:
                        target[nxt] = cand
                        parent[mask | bit][nxt] = last
        self.tour_cost = [0.0] * size
        self._last = [-1] * size
        for mask in range(1, size):
            cost, last = min((best[mask][b] + dist[b + 1][0], b) for b in range(n) if mask >> b & 1)
            self.tour_cost[mask] = cost
            self._last[mask] = last
        self._parent = parent

    def route(self, mask: int) -> list[int]:
        """Node indices (1-based) of the optimal cycle through ``mask``, depot excluded."""
        order = []
        last = self._last[mask]
        while mask:
            order.append(last + 1)
            prev = self._parent[mask][last]
            mask ^= 1 << last
            last = prev
        return order[::-1]


def _bits(mask: int) -> list[int]:
    out = []
    b = 0
    while mask:
        if mask & 1:
            out.append(b)
        mask >>= 1
        b += 1
    return out


def _check_limits(inst: ProblemInstance, limits: OracleLimits):
    if len(inst.stops) > limits.max_stops:
        raise LimitExceeded(f"{len(inst.stops)} candidate stops > {limits.max_stops}")
    if inst.m > limits.max_m:
        raise LimitExceeded(f"m = {inst.m} > {limits.max_m}")
    if not inst.integral_demands:
        raise LimitExceeded("demands and capacity must be integers")
    if inst.total_demand > limits.max_total_demand:
        raise LimitExceeded(f"total demand {inst.total_demand} > {limits.max_total_demand}")


def _cover_loads(inst: ProblemInstance, stops: Sequence[int]) -> dict[int, tuple[int, ...]]:
    """Per covering subset without idle stops: the load at each stop bit."""
    n = len(stops)
    bit_of = {j: b for b, j in enumerate(stops)}
    pref_bits = [(inst.demands[i], [bit_of[j] for j in inst.prefs[i]]) for i in inst.demand_nodes]
    out = {}
    for mask in range(1, 1 << n):
        loads = [0] * n
        used = 0
        for qty, bits in pref_bits:
            for b in bits:
                if mask >> b & 1:
                    loads[b] += qty
                    used |= 1 << b
                    break
            else:
                break
        else:
            if used == mask:
                out[mask] = tuple(loads)
    return out


def _key(cost: float, routes: Sequence[int]) -> tuple:
    return (round(cost, 9), tuple(sorted(routes)))


def _hall_feasible(routes: Sequence[int], loads: Sequence[int], Q: int, n: int) -> bool:
    m = len(routes)
    owners = [0] * n
    for k, r in enumerate(routes):
        for b in _bits(r):
            owners[b] |= 1 << k
    for subset in range(1, 1 << m):
        need = sum(loads[b] for b in range(n) if owners[b] and owners[b] & ~subset == 0)
        if need > Q * bin(subset).count("1"):
            return False
    return True


def _allocate(routes: Sequence[int], loads: Sequence[int], Q: int, n: int) -> list[dict[int, int]]:
    graph = nx.DiGraph()
    for b in range(n):
        if loads[b]:
            graph.add_edge("s", ("j", b), capacity=loads[b])
    for k, r in enumerate(routes):
        graph.add_edge(("k", k), "t", capacity=Q)
        for b in _bits(r):
            if loads[b]:
                graph.add_edge(("j", b), ("k", k), capacity=Q)
    _, flow = nx.maximum_flow(graph, "s", "t")
    out = []
    for k, r in enumerate(routes):
        out.append({b: flow.get(("j", b), {}).get(("k", k), 0) for b in _bits(r)})
    return out


def solve_exact(inst: ProblemInstance, allow_splits: bool = True, limits: OracleLimits = OracleLimits()) -> OracleResult:
    """Globally optimal solution by exhaustive enumeration of covers and routings."""
    _check_limits(inst, limits)
    stops = list(inst.stops)
    n = len(stops)
    Q = int(inst.Q)
    r = inst.stop_penalty
    hk = HeldKarp(inst.travel.as_lists(), n)
    route_cost = [0.0] + [hk.tour_cost[mask] + r * bin(mask).count("1") for mask in range(1, 1 << n)]
    covers = _cover_loads(inst, stops)
    explored = 0

    best_key = (INF, ())
    best = None  # (routes, loads)

    for cover, loads in covers.items():
        if any(loads[b] > Q for b in _bits(cover)):
            continue

        @lru_cache(maxsize=None)
        def partition(rest: int, k: int) -> tuple[float, tuple[int, ...]]:
            if rest == 0:
                return 0.0, ()
            if k == 0:
                return INF, ()
            low = rest & -rest
            others = rest ^ low
            best_here = (INF, ())
            sub = others
            while True:
                group = sub | low
                if sum(loads[b] for b in _bits(group)) <= Q:
                    tail_cost, tail = partition(rest ^ group, k - 1)
                    cost = route_cost[group] + tail_cost
                    if cost < best_here[0]:
                        best_here = (cost, (group,) + tail)
                if sub == 0:
                    break
                sub = (sub - 1) & others
            return best_here

        cost, routes = partition(cover, inst.m)
        explored += 1
        if cost < INF and _key(cost, routes) < best_key:
            best_key = _key(cost, routes)
            best = (routes, loads)

    if allow_splits:
        ordered = sorted((route_cost[mask], mask) for mask in range(1, 1 << n))

        def search(start: int, chosen: list[int], cost: float, union: int):
            nonlocal best_key, best, explored
            if chosen and union in covers:
                explored += 1
                loads = covers[union]
                key = _key(cost, chosen)
                if key < best_key and _hall_feasible(chosen, loads, Q, n):
                    best_key = key
                    best = (tuple(chosen), loads)
            if len(chosen) == inst.m:
                return
            for idx in range(start, len(ordered)):
                c, mask = ordered[idx]
                if cost + c > best_key[0] + 1e-9:
                    break
                chosen.append(mask)
                search(idx, chosen, cost + c, union | mask)
                chosen.pop()

        search(0, [], 0.0, 0)

    if best is None:
        raise Infeasible("no feasible solution exists")
    routes, loads = best
    allocation = _allocate(routes, loads, Q, n)
    bit_of = {j: b for b, j in enumerate(stops)}
    tours = []
    for mask, qty in zip(routes, allocation):
        order = [stops[b - 1] for b in hk.route(mask)]
        visits = tuple((j, qty[bit_of[j]]) for j in order if qty[bit_of[j]] > 0)
        tours.append(Tour(visits))
    tours.sort(key=lambda t: (not len(t), t.nodes))
    tours += [Tour()] * (inst.m - len(tours))
    chosen_mask = 0
    for mask in routes:
        chosen_mask |= mask
    assignment = {}
    visited = {stops[b] for b in _bits(chosen_mask)}
    for i in inst.demand_nodes:
        assignment[i] = next(j for j in inst.prefs[i] if j in visited)
    sol = with_cost(inst, Solution(tuple(tours), assignment))
    return OracleResult(sol, sol.cost.total_s, explored)


def solve_cvrp_exact(dist: Sequence[Sequence[float]], demands: Sequence[float], Q: float, m: int) -> tuple[float, list[list[int]]]:
    """Optimal CVRP by set partitioning into at most ``m`` routes, each routed by Held-Karp.

    ``dist`` is indexed with the depot at 0 and customers at ``1..n``;
    ``demands[c - 1]`` is the demand of customer ``c``. Returns ``(cost, routes)``.
    """
    n = len(demands)
    if n == 0:
        return 0.0, []
    hk = HeldKarp(dist, n)
    size = 1 << n
    load = [0.0] * size
    for mask in range(1, size):
        low = mask & -mask
        load[mask] = load[mask ^ low] + demands[low.bit_length() - 1]

    @lru_cache(maxsize=None)
    def best(rest: int, k: int) -> tuple[float, tuple[int, ...]]:
        if rest == 0:
            return 0.0, ()
        if k == 0:
            return INF, ()
        low = rest & -rest
        others = rest ^ low
        out = (INF, ())
        sub = others
        while True:
            group = sub | low
            if load[group] <= Q + 1e-9:
                tail_cost, tail = best(rest ^ group, k - 1)
                cost = hk.tour_cost[group] + tail_cost
                if cost < out[0]:
                    out = (cost, (group,) + tail)
            if sub == 0:
                break
            sub = (sub - 1) & others
        return out

    cost, groups = best(size - 1, m)
    return cost, [hk.route(g) for g in groups]
