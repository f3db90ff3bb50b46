"""Hybrid genetic search for the CVRP with a bounded fleet.

Chromosomes are giant tours without route delimiters. Each offspring is cut
into at most ``m`` routes by an exact soft-capacity split, improved by local
search (relocate, swap, 2-opt, 2-opt*) under a linear overload penalty, and
filed into a feasible or an infeasible subpopulation. Survivors are chosen by
a biased fitness mixing cost rank and broken-pairs diversity.
"""

from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional, Sequence

from ..errors import Infeasible
from ..instance import Number

LOAD_TOL = 1e-9


@dataclass(frozen=True)
class HgsParams:
    mu: int = 25
    lam: int = 40
    n_elite: int = 4
    n_close: int = 5
    granular: int = 20
    target_feasible: float = 0.2
    penalty_up: float = 1.2
    penalty_down: float = 0.85
    adapt_every: int = 100
    repair_prob: float = 0.5
    repair_factor: float = 10.0


@dataclass(frozen=True)
class CvrpTask:
    """Pieces to collect; ``dist`` is indexed with the depot at 0 and piece ``c`` at ``c``."""

    customers: tuple[tuple[int, Number], ...]
    dist: tuple[tuple[float, ...], ...]
    Q: Number
    m: int

    @property
    def n(self) -> int:
        return len(self.customers)

    def demand(self, c: int) -> Number:
        return self.customers[c - 1][1]


@dataclass(frozen=True)
class CvrpSolution:
    routes: tuple[tuple[int, ...], ...]
    cost: float


def make_task(pieces: Sequence[tuple[int, Number]], travel, depot: int, Q: Number, m: int) -> CvrpTask:
    """Task over ``(origin, piece)`` pairs using stop-to-stop travel times ``travel(a, b)``."""
    where = [depot] + [j for j, _ in pieces]
    dist = tuple(tuple(0.0 if a == b else float(travel(a, b)) for b in where) for a in where)
    return CvrpTask(tuple(pieces), dist, Q, m)


def route_length(dist, route: Sequence[int]) -> float:
    if not route:
        return 0.0
    total = dist[0][route[0]] + dist[route[-1]][0]
    for a, b in zip(route, route[1:]):
        total += dist[a][b]
    return total


# --------------------------------------------------------------------------- split


def split_tour(tour: Sequence[int], dist, demand: Sequence[float], Q: float, m: int, penalty: float) -> list[list[int]]:
    """Optimal cut of a giant tour into at most ``m`` routes, overload charged at ``penalty`` per unit."""
    n = len(tour)
    inf = math.inf
    best = [[inf] * (n + 1) for _ in range(m + 1)]
    pred = [[-1] * (n + 1) for _ in range(m + 1)]
    best[0][0] = 0.0
    for k in range(m):
        row, nxt, back = best[k], best[k + 1], pred[k + 1]
        for i in range(n):
            base = row[i]
            if base == inf:
                continue
            load = 0.0
            inner = 0.0
            first = tour[i]
            for j in range(i, n):
                c = tour[j]
                load += demand[c]
                if j > i:
                    inner += dist[tour[j - 1]][c]
                cost = base + dist[0][first] + inner + dist[c][0] + penalty * max(0.0, load - Q)
                if cost < nxt[j + 1]:
                    nxt[j + 1] = cost
                    back[j + 1] = i
                if load > 2 * Q + 1e-9 and j > i:
                    break
    k = min(range(1, m + 1), key=lambda kk: (best[kk][n], kk)) if n else 0
    routes = []
    j = n
    while k > 0 and j > 0:
        i = pred[k][j]
        routes.append(list(tour[i:j]))
        j = i
        k -= 1
    if j > 0:
        # the load cap above made the tour unsplittable; fall back to one overloaded route
        routes.append(list(tour[:j]))
    routes.reverse()
    return routes


# --------------------------------------------------------------------------- local search


class _Routes:
    """Mutable route set with per-node positions and cached loads."""

    def __init__(self, routes: list[list[int]], m: int, demand, dist):
        self.routes = [list(r) for r in routes] + [[] for _ in range(m - len(routes))]
        self.demand = demand
        self.dist = dist
        self.route_of: dict[int, int] = {}
        self.pos: dict[int, int] = {}
        self.load = [0.0] * len(self.routes)
        for r in range(len(self.routes)):
            self._refresh(r)

    def _refresh(self, r: int):
        route = self.routes[r]
        for i, c in enumerate(route):
            self.route_of[c] = r
            self.pos[c] = i
        self.load[r] = sum(self.demand[c] for c in route)

    def prev(self, c: int) -> int:
        i = self.pos[c]
        return self.routes[self.route_of[c]][i - 1] if i > 0 else 0

    def next(self, c: int) -> int:
        route = self.routes[self.route_of[c]]
        i = self.pos[c]
        return route[i + 1] if i + 1 < len(route) else 0


def _excess(load: float, Q: float) -> float:
    return load - Q if load > Q + LOAD_TOL else 0.0


def local_search(
    routes: list[list[int]],
    task_dist,
    demand,
    Q: float,
    m: int,
    penalty: float,
    rng: random.Random,
    neighbors,
    origin: Optional[Sequence[int]] = None,
) -> list[list[int]]:
    """First-improvement descent over relocate, swap, 2-opt and 2-opt* moves.

    With ``origin`` given, runs of consecutive pieces from the same stop are
    also relocated and swapped as a whole, since moving a single piece of a
    stop that stays visited rarely pays off.
    """
    d = task_dist
    st = _Routes(routes, m, demand, d)
    customers = sorted(st.route_of)

    def pen_delta(ra, new_a, rb, new_b):
        if ra == rb:
            return 0.0
        return penalty * (
            _excess(new_a, Q) + _excess(new_b, Q) - _excess(st.load[ra], Q) - _excess(st.load[rb], Q)
        )

    clock = 0
    modified = [0] * len(st.routes)
    tested = {c: -1 for c in customers}

    def apply(ra: int, new_a: list[int], rb: int, new_b: Optional[list[int]]):
        nonlocal clock
        clock += 1
        st.routes[ra] = new_a
        st._refresh(ra)
        modified[ra] = clock
        if new_b is not None and rb != ra:
            st.routes[rb] = new_b
            st._refresh(rb)
            modified[rb] = clock

    def try_relocate(u: int, v: int) -> bool:
        # move u right after v
        ru = st.route_of[u]
        pu, nu = st.prev(u), st.next(u)
        du = demand[u]
        if v == u:
            return False
        rv = st.route_of[v]
        nv = st.next(v)
        if nv == u:
            return False
        delta = d[pu][nu] - d[pu][u] - d[u][nu] + d[v][u] + d[u][nv] - d[v][nv]
        if ru != rv:
            delta += pen_delta(ru, st.load[ru] - du, rv, st.load[rv] + du)
        if delta < -1e-9:
            a = st.routes[ru][:]
            a.remove(u)
            if ru == rv:
                a.insert(a.index(v) + 1, u)
                apply(ru, a, ru, None)
            else:
                b = st.routes[rv][:]
                b.insert(st.pos[v] + 1, u)
                apply(ru, a, rv, b)
            return True
        return False

    def try_front(u: int, r: int) -> bool:
        # move u to the start of route r
        ru = st.route_of[u]
        route = st.routes[r]
        if route and route[0] == u:
            return False
        pu, nu = st.prev(u), st.next(u)
        first = route[0] if route else 0
        du = demand[u]
        delta = d[pu][nu] - d[pu][u] - d[u][nu] + d[0][u] + d[u][first] - d[0][first]
        if ru != r:
            delta += pen_delta(ru, st.load[ru] - du, r, st.load[r] + du)
        if delta < -1e-9:
            a = st.routes[ru][:]
            a.remove(u)
            if ru == r:
                apply(ru, [u] + a, ru, None)
            else:
                apply(ru, a, r, [u] + route)
            return True
        return False

    def try_swap(u: int, v: int) -> bool:
        if u == v:
            return False
        ru, rv = st.route_of[u], st.route_of[v]
        pu, nu, pv, nv = st.prev(u), st.next(u), st.prev(v), st.next(v)
        if nu == v:
            delta = d[pu][v] + d[v][u] + d[u][nv] - d[pu][u] - d[u][v] - d[v][nv]
        elif nv == u:
            delta = d[pv][u] + d[u][v] + d[v][nu] - d[pv][v] - d[v][u] - d[u][nu]
        else:
            delta = (
                d[pu][v] + d[v][nu] - d[pu][u] - d[u][nu]
                + d[pv][u] + d[u][nv] - d[pv][v] - d[v][nv]
            )
        if ru != rv:
            du, dv = demand[u], demand[v]
            delta += pen_delta(ru, st.load[ru] - du + dv, rv, st.load[rv] - dv + du)
        if delta < -1e-9:
            a = st.routes[ru][:]
            if ru == rv:
                i, j = st.pos[u], st.pos[v]
                a[i], a[j] = a[j], a[i]
                apply(ru, a, ru, None)
            else:
                b = st.routes[rv][:]
                a[st.pos[u]] = v
                b[st.pos[v]] = u
                apply(ru, a, rv, b)
            return True
        return False

    def try_two_opt(u: int, v: int) -> bool:
        # same route, u before v: reverse the segment after u up to v
        r = st.route_of[u]
        route = st.routes[r]
        i, j = st.pos[u], st.pos[v]
        if j <= i + 1:
            return False
        seg = route[i + 1 : j + 1]
        nv = st.next(v)
        fwd = sum(d[a][b] for a, b in zip(seg, seg[1:]))
        bwd = sum(d[b][a] for a, b in zip(seg, seg[1:]))
        delta = d[u][seg[-1]] + d[seg[0]][nv] - d[u][seg[0]] - d[seg[-1]][nv] + bwd - fwd
        if delta < -1e-9:
            apply(r, route[: i + 1] + seg[::-1] + route[j + 1 :], r, None)
            return True
        return False

    def try_two_opt_star(u: int, v: int) -> bool:
        # different routes: swap the tails after u and after v
        ru, rv = st.route_of[u], st.route_of[v]
        if ru == rv:
            return False
        a, b = st.routes[ru], st.routes[rv]
        i, j = st.pos[u], st.pos[v]
        nu, nv = st.next(u), st.next(v)
        delta = d[u][nv] + d[v][nu] - d[u][nu] - d[v][nv]
        tail_a = sum(demand[c] for c in a[i + 1 :])
        tail_b = sum(demand[c] for c in b[j + 1 :])
        delta += pen_delta(ru, st.load[ru] - tail_a + tail_b, rv, st.load[rv] - tail_b + tail_a)
        if delta < -1e-9:
            apply(ru, a[: i + 1] + b[j + 1 :], rv, b[: j + 1] + a[i + 1 :])
            return True
        return False

    def block(u: int) -> tuple[int, int]:
        route = st.routes[st.route_of[u]]
        s = e = st.pos[u]
        if origin is None:
            return s, e
        o = origin[u]
        while s > 0 and origin[route[s - 1]] == o:
            s -= 1
        while e + 1 < len(route) and origin[route[e + 1]] == o:
            e += 1
        return s, e

    def try_relocate_block(u: int, v: Optional[int], front_of: Optional[int] = None) -> bool:
        # move u's run after v, or to the start of route ``front_of``
        ru = st.route_of[u]
        route = st.routes[ru]
        s, e = block(u)
        if s == e:
            return False
        seg = route[s : e + 1]
        p = route[s - 1] if s > 0 else 0
        n = route[e + 1] if e + 1 < len(route) else 0
        if front_of is None:
            rv = st.route_of[v]
            if (rv == ru and s <= st.pos[v] <= e) or v == p:
                return False
            nv = st.next(v)
            at = v
        else:
            rv = front_of
            if rv == ru and s == 0:
                return False
            nv = st.routes[rv][0] if st.routes[rv] else 0
            at = 0
        delta = d[p][n] - d[p][seg[0]] - d[seg[-1]][n] + d[at][seg[0]] + d[seg[-1]][nv] - d[at][nv]
        if ru != rv:
            moved = sum(demand[c] for c in seg)
            delta += pen_delta(ru, st.load[ru] - moved, rv, st.load[rv] + moved)
        if delta < -1e-9:
            a = route[:s] + route[e + 1 :]
            if ru == rv:
                k = a.index(v) + 1 if front_of is None else 0
                apply(ru, a[:k] + seg + a[k:], ru, None)
            else:
                b = st.routes[rv]
                k = st.pos[v] + 1 if front_of is None else 0
                apply(ru, a, rv, b[:k] + seg + b[k:])
            return True
        return False

    def try_swap_block(u: int, v: int) -> bool:
        ru, rv = st.route_of[u], st.route_of[v]
        if ru == rv:
            return False
        (su, eu), (sv, ev) = block(u), block(v)
        if su == eu and sv == ev:
            return False
        a, b = st.routes[ru], st.routes[rv]
        bu, bv = a[su : eu + 1], b[sv : ev + 1]
        pu = a[su - 1] if su > 0 else 0
        nu = a[eu + 1] if eu + 1 < len(a) else 0
        pv = b[sv - 1] if sv > 0 else 0
        nv = b[ev + 1] if ev + 1 < len(b) else 0
        delta = (
            d[pu][bv[0]] + d[bv[-1]][nu] - d[pu][bu[0]] - d[bu[-1]][nu]
            + d[pv][bu[0]] + d[bu[-1]][nv] - d[pv][bv[0]] - d[bv[-1]][nv]
        )
        lu = sum(demand[c] for c in bu)
        lv = sum(demand[c] for c in bv)
        delta += pen_delta(ru, st.load[ru] - lu + lv, rv, st.load[rv] - lv + lu)
        if delta < -1e-9:
            apply(ru, a[:su] + bv + a[eu + 1 :], rv, b[:sv] + bu + b[ev + 1 :])
            return True
        return False

    improved = True
    while improved:
        improved = False
        order = customers[:]
        rng.shuffle(order)
        for u in order:
            # pairs whose routes are untouched since u's last scan cannot improve
            since = tested[u]
            tested[u] = clock
            for v in neighbors[u]:
                ru, rv = st.route_of[u], st.route_of[v]
                if modified[ru] <= since and modified[rv] <= since:
                    continue
                if ru == rv and origin is not None and origin[u] == origin[v]:
                    continue
                if try_relocate(u, v) or try_swap(u, v):
                    improved = True
                    continue
                if try_relocate_block(u, v) or try_swap_block(u, v):
                    improved = True
                    continue
                if st.route_of[u] == st.route_of[v]:
                    first, second = (u, v) if st.pos[u] < st.pos[v] else (v, u)
                    if try_two_opt(first, second):
                        improved = True
                elif try_two_opt_star(u, v):
                    improved = True
            for r in range(len(st.routes)):
                if modified[st.route_of[u]] <= since and modified[r] <= since:
                    continue
                if try_front(u, r) or try_relocate_block(u, None, front_of=r):
                    improved = True
    return [r for r in st.routes if r]


# --------------------------------------------------------------------------- population


@dataclass
class _Individual:
    tour: list[int]
    routes: list[list[int]]
    distance: float
    excess: float
    succ: dict[int, int] = field(default_factory=dict)
    pred: dict[int, int] = field(default_factory=dict)
    fitness: float = 0.0

    @property
    def feasible(self) -> bool:
        return self.excess <= LOAD_TOL

    def penalized(self, penalty: float) -> float:
        return self.distance + penalty * self.excess


def _individual(routes: list[list[int]], dist, demand, Q: float) -> _Individual:
    routes = [r for r in routes if r]
    distance = sum(route_length(dist, r) for r in routes)
    excess = sum(_excess(sum(demand[c] for c in r), Q) for r in routes)
    ind = _Individual([c for r in routes for c in r], routes, distance, excess)
    for r in routes:
        seq = [0, *r, 0]
        for a, b in zip(seq, seq[1:]):
            if b:
                ind.pred[b] = a
            if a:
                ind.succ[a] = b
    return ind


def _broken_pairs(a: _Individual, b: _Individual, n: int) -> float:
    diff = 0
    for c in range(1, n + 1):
        sa, sb, pb = a.succ[c], b.succ[c], b.pred[c]
        if sa != sb and sa != pb:
            diff += 1
        if a.pred[c] == 0 and b.pred[c] != 0 and b.succ[c] != 0:
            diff += 1
    return diff / n


def _order_crossover(p1: list[int], p2: list[int], rng: random.Random) -> list[int]:
    n = len(p1)
    if n < 2:
        return p1[:]
    i, j = sorted(rng.sample(range(n), 2))
    child: list[Optional[int]] = [None] * n
    child[i : j + 1] = p1[i : j + 1]
    taken = set(p1[i : j + 1])
    k = (j + 1) % n
    for t in range(n):
        c = p2[(j + 1 + t) % n]
        if c in taken:
            continue
        child[k] = c
        k = (k + 1) % n
    return child  # type: ignore[return-value]


class _Population:
    """Feasible and infeasible pools with cached pairwise broken-pairs distances."""

    def __init__(self, params: HgsParams, n: int):
        self.params = params
        self.n = n
        self.feasible: list[_Individual] = []
        self.infeasible: list[_Individual] = []
        self._prox: dict[int, dict[int, float]] = {}
        self._dirty = True

    def _fitness(self, pool: list[_Individual], penalty: float):
        size = len(pool)
        if not size:
            return
        by_cost = sorted(range(size), key=lambda k: pool[k].penalized(penalty))
        ids = [id(ind) for ind in pool]
        div = []
        for k in range(size):
            row = self._prox[ids[k]]
            close = sorted(row[o] for o in ids if o != ids[k])[: self.params.n_close]
            div.append(-sum(close) / len(close) if close else 0.0)
        by_div = sorted(range(size), key=lambda k: div[k])
        scale = max(1, size - 1)
        fit = [0.0] * size
        elite_share = 1.0 - min(self.params.n_elite, size) / size
        for r, k in enumerate(by_cost):
            fit[k] += r / scale
        for r, k in enumerate(by_div):
            fit[k] += elite_share * r / scale
        for k, ind in enumerate(pool):
            ind.fitness = fit[k]

    def add(self, ind: _Individual, penalty: float):
        pool = self.feasible if ind.feasible else self.infeasible
        row = {}
        for other in pool:
            dist = _broken_pairs(ind, other, self.n)
            row[id(other)] = dist
            self._prox[id(other)][id(ind)] = dist
        self._prox[id(ind)] = row
        pool.append(ind)
        self._dirty = True
        if len(pool) > self.params.mu + self.params.lam:
            self._survivors(pool, penalty)

    def _remove(self, pool: list[_Individual], k: int):
        gone = id(pool.pop(k))
        for other in pool:
            self._prox[id(other)].pop(gone, None)
        del self._prox[gone]

    def _survivors(self, pool: list[_Individual], penalty: float):
        while len(pool) > self.params.mu:
            clone = next((k for k, ind in enumerate(pool) if 0.0 in self._prox[id(ind)].values()), None)
            if clone is None:
                self._fitness(pool, penalty)
                clone = max(range(len(pool)), key=lambda k: pool[k].fitness)
            self._remove(pool, clone)

    def select(self, rng: random.Random, penalty: float) -> _Individual:
        if self._dirty:
            self._fitness(self.feasible, penalty)
            self._fitness(self.infeasible, penalty)
            self._dirty = False
        pool = self.feasible + self.infeasible
        a, b = rng.choice(pool), rng.choice(pool)
        return a if a.fitness <= b.fitness else b


def _closest(dist, n: int, k: int) -> dict[int, list[int]]:
    out = {}
    for c in range(1, n + 1):
        others = sorted((o for o in range(1, n + 1) if o != c), key=lambda o: (min(dist[c][o], dist[o][c]), o))
        out[c] = others[:k]
    return out


def solve_cvrp(
    task: CvrpTask,
    rng: random.Random,
    it_no_improve: int = 10000,
    params: HgsParams = HgsParams(),
    deadline: Optional[float] = None,
) -> CvrpSolution:
    """Capacity-feasible routes (at most ``m``) for ``task``; raises ``Infeasible`` if none is found."""
    n = task.n
    Qx = Fraction(task.Q) if not isinstance(task.Q, Fraction) else task.Q
    total = sum(Fraction(q) if not isinstance(q, Fraction) else q for _, q in task.customers)
    if total > task.m * Qx:
        raise Infeasible(f"total demand {total} exceeds {task.m} x {task.Q}")
    if n == 0:
        return CvrpSolution((), 0.0)
    # small tasks do not need the full population
    params = replace(params, mu=min(params.mu, max(5, n)), lam=min(params.lam, max(10, 2 * n)))
    dist = task.dist
    Q = float(task.Q)
    demand = [0.0] + [float(q) for _, q in task.customers]
    origin = [None] + [j for j, _ in task.customers]
    neighbors = _closest(dist, n, min(params.granular, n - 1))
    legs = [dist[a][b] for a in range(n + 1) for b in range(n + 1) if a != b]
    # one unit of overload costs as much as an average leg
    penalty = max(1e-3, sum(legs) / len(legs)) if legs else 1.0

    def educate(tour: list[int], pen: float) -> _Individual:
        routes = split_tour(tour, dist, demand, Q, task.m, pen)
        routes = local_search(routes, dist, demand, Q, task.m, pen, rng, neighbors, origin)
        return _individual(routes, dist, demand, Q)

    pop = _Population(params, n)
    best: Optional[_Individual] = None
    recent: list[bool] = []

    def consider(ind: _Individual):
        nonlocal best
        if ind.feasible and (best is None or ind.distance < best.distance - 1e-9):
            best = ind
            return True
        return False

    def offspring(tour: list[int]) -> bool:
        nonlocal penalty
        ind = educate(tour, penalty)
        recent.append(ind.feasible)
        improved = consider(ind)
        pop.add(ind, penalty)
        if not ind.feasible and rng.random() < params.repair_prob:
            fixed = educate(ind.tour, penalty * params.repair_factor)
            if fixed.feasible:
                improved = consider(fixed) or improved
                pop.add(fixed, penalty)
        return improved

    base = list(range(1, n + 1))
    by_origin: dict = {}
    for c in base:
        by_origin.setdefault(origin[c], []).append(c)
    stops = sorted(by_origin)
    for t in range(4 * params.mu):
        if t % 2 == 0:
            # pieces of a stop start out next to each other
            rng.shuffle(stops)
            tour = [c for j in stops for c in by_origin[j]]
        else:
            tour = base[:]
            rng.shuffle(tour)
        offspring(tour)
        if deadline is not None and time.monotonic() > deadline and best is not None:
            break

    idle = 0
    it = 0
    # without any feasible solution keep searching a while longer before giving up
    cap = max(it_no_improve, 1) * 5
    while idle < it_no_improve or (best is None and it < cap):
        if deadline is not None and time.monotonic() > deadline and best is not None:
            break
        it += 1
        p1 = pop.select(rng, penalty)
        p2 = pop.select(rng, penalty)
        child = _order_crossover(p1.tour, p2.tour, rng)
        idle = 0 if offspring(child) else idle + 1
        if it % params.adapt_every == 0 and recent:
            share = sum(recent) / len(recent)
            if share < params.target_feasible - 0.05:
                penalty *= params.penalty_up
            elif share > params.target_feasible + 0.05:
                penalty *= params.penalty_down
            recent.clear()
    if best is None:
        raise Infeasible("no capacity-feasible routing found")
    return CvrpSolution(tuple(tuple(r) for r in best.routes), best.distance)
