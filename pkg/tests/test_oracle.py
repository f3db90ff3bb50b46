import itertools
import math

import pytest

from covtour.errors import Infeasible, LimitExceeded, Uncovered
from covtour.instance import InstanceParams, build_instance, generate_sparse
from covtour.network import PreferenceList
from covtour.oracle import OracleLimits, solve_cvrp_exact, solve_exact
from covtour.solution import assign_demands, check_feasible, evaluate

from conftest import make_instance, make_network, tight_fleet


def test_single_demand_node():
    inst = make_instance([(0, 1, 30), (1, 2, 10), (2, 0, 25)], {1: 3}, prefs=[PreferenceList(1, (2,))])
    res = solve_exact(inst)
    assert res.optimum.tours[0].visits == ((2, 3),)
    assert res.cost == inst.travel(0, 2) + inst.travel(2, 0) + 5


def test_gamma_zero_is_a_tsp():
    edges = [(0, 1, 14), (1, 2, 9), (2, 3, 11), (3, 4, 8), (4, 0, 17), (1, 3, 13), (0, 2, 16)]
    inst = make_instance(edges, {1: 1, 2: 2, 3: 1, 4: 3}, m=1)
    best = min(
        sum(inst.travel(a, b) for a, b in zip((0, *p), (*p, 0)))
        for p in itertools.permutations(inst.demand_nodes)
    )
    assert solve_exact(inst).cost == best + 5 * 4


def _brute_no_split(inst):
    """Every covering subset, every tour label per stop, every visiting order."""
    best = math.inf
    stops = inst.stops
    for r in range(1, len(stops) + 1):
        for visited in itertools.combinations(stops, r):
            try:
                load = assign_demands(inst, visited).load
            except Uncovered:
                continue
            for labels in itertools.product(range(inst.m), repeat=r):
                groups = [[j for j, k in zip(visited, labels) if k == t] for t in range(inst.m)]
                if any(sum(load.get(j, 0) for j in g) > inst.Q for g in groups):
                    continue
                cost = 0.0
                for g in groups:
                    if g:
                        cost += min(
                            sum(inst.travel(a, b) for a, b in zip((0, *p), (*p, 0))) for p in itertools.permutations(g)
                        )
                best = min(best, cost + inst.stop_penalty * r)
    return best


@pytest.mark.parametrize("seed", range(6))
def test_no_split_matches_brute_force(seed):
    inst = generate_sparse(6, 0.6, seed, InstanceParams(gamma=35, m=2))
    try:
        got = solve_exact(inst, allow_splits=False).cost
    except Infeasible:
        got = math.inf
    assert got == pytest.approx(_brute_no_split(inst))


def test_splits_beat_no_splits():
    net = make_network([(0, 1, 20), (1, 2, 15), (2, 0, 30)], demand=[1, 2])
    inst = build_instance(net, {1: 6, 2: 2}, InstanceParams(m=2, capacity=5))
    with pytest.raises(Infeasible):
        solve_exact(inst, allow_splits=False)
    res = solve_exact(inst, allow_splits=True)
    assert check_feasible(inst, res.optimum).ok
    assert res.optimum.splits() == 1


@pytest.mark.parametrize("seed", range(8))
def test_optimum_properties(seed):
    inst = tight_fleet(seed, 30)
    res = solve_exact(inst)
    assert check_feasible(inst, res.optimum).ok
    assert res.cost == evaluate(inst, res.optimum).total_s
    assert res.optimum.splits() <= inst.m - 1
    assert solve_exact(inst).optimum == res.optimum


@pytest.mark.parametrize("seed", range(5))
def test_larger_gamma_never_costs_more(seed):
    base = generate_sparse(8, 0.6, seed, InstanceParams(gamma=60, m=2))
    costs = [solve_exact(build_instance(base.network, base.demands, InstanceParams(gamma=g, m=2))).cost for g in (0, 20, 60)]
    assert costs[0] >= costs[1] >= costs[2]


def test_limits():
    inst = generate_sparse(20, 1.0, 1, InstanceParams(gamma=0, m=2))
    with pytest.raises(LimitExceeded):
        solve_exact(inst)
    small = tight_fleet(0, 0)
    with pytest.raises(LimitExceeded):
        solve_exact(small, limits=OracleLimits(max_stops=1))


def test_cvrp_oracle_by_enumeration():
    pts = [(0, 0), (4, 0), (4, 3), (0, 3), (-2, 1)]
    dist = [[math.dist(a, b) for b in pts] for a in pts]
    demands = [3, 2, 4, 1]
    cost, routes = solve_cvrp_exact(dist, demands, 6, 2)
    best = math.inf
    for labels in itertools.product(range(2), repeat=4):
        total = 0.0
        for t in range(2):
            group = [c + 1 for c in range(4) if labels[c] == t]
            if sum(demands[c - 1] for c in group) > 6:
                break
            if group:
                total += min(sum(dist[a][b] for a, b in zip((0, *p), (*p, 0))) for p in itertools.permutations(group))
        else:
            best = min(best, total)
    assert cost == pytest.approx(best)
    assert sorted(c for r in routes for c in r) == [1, 2, 3, 4]
