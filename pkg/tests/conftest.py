import math
from pathlib import Path

import pytest

from covtour.errors import LimitExceeded
from covtour.instance import InstanceParams, build_instance, generate_sparse, load_instance
from covtour.network import Arc, Node, RoadNetwork
from covtour.oracle import solve_exact

FIXTURES = Path(__file__).parent / "fixtures"

_acceptance_lines: list[str] = []


def record_acceptance(number: int, ok: bool, detail: str):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
    _acceptance_lines.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_acceptance_lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


def two_way(edges):
    """Arcs in both directions for ``(u, v, length)`` triples."""
    out = []
    for u, v, length in edges:
        out += [Arc(u, v, length), Arc(v, u, length)]
    return out


def make_network(edges, depot=0, stops=None, demand=(), coords=None):
    ids = sorted({u for u, _, _ in edges} | {v for _, v, _ in edges})
    coords = coords or {}
    nodes = [Node(i, *coords.get(i, (float(i), 0.0))) for i in ids]
    if stops is None:
        stops = [i for i in ids if i != depot]
    return RoadNetwork(nodes, two_way(edges), depot, stops, demand)


def make_instance(edges, demands, gamma=0.0, m=1, prefs=None, stop_penalty=5.0, capacity=None, **kw):
    net = make_network(edges, demand=sorted(demands), **kw)
    params = InstanceParams(gamma=gamma, m=m, capacity=capacity, stop_penalty=stop_penalty)
    return build_instance(net, demands, params, prefs)


def oracle_ok(inst):
    """Oracle optimum or ``None`` when the instance exceeds the oracle limits."""
    try:
        return solve_exact(inst)
    except LimitExceeded:
        return None


def loose_fleet(seed: int, gamma: float, n_nodes: int = 9, demand_prob: float = 0.6):
    """Generated tiny instance with capacity sized for two tours at 80% loading."""
    base = generate_sparse(n_nodes, demand_prob, seed, InstanceParams(gamma=gamma, m=2))
    cap = math.ceil(base.total_demand / 1.6)
    return build_instance(base.network, base.demands, InstanceParams(gamma=gamma, capacity=cap, buffer=0.2))


def tight_fleet(seed: int, gamma: float, n_nodes: int = 8, demand_prob: float = 0.5):
    return generate_sparse(n_nodes, demand_prob, seed, InstanceParams(gamma=gamma, m=2))


@pytest.fixture(scope="session")
def toy3():
    return load_instance((FIXTURES / "toy3.json").read_bytes())


def expected_constraints(inst, tag: str, valid_ineq: bool = True) -> int:
    """Constraint count by closed form, independent of the builders."""
    W = len(inst.demand_nodes)
    S = len(inst.stops)
    U = sum(1 for i in inst.demand_nodes if len(inst.prefs[i]) < S)
    P = sum(len(inst.prefs[i]) for i in inst.demand_nodes)
    m = inst.m
    if tag == "CG-noS":
        return W + U + P + S + S + (S + 1) + 1 + S + 1 + S + (S + 1) * S
    if tag.startswith("RN"):
        V, A = len(inst.network.nodes), len(inst.network.arcs)
    else:
        V, A = S + 1, (S + 1) * S
    common = W + U + S + m + S * m + V * m + (V - 1) * m + m + S * m + A * m
    if tag.endswith("noS"):
        return common + P + S
    return common + P * m + (S + S * m + 1 if valid_ineq else 0)


def expected_variables(inst, tag: str, valid_ineq: bool = True) -> int:
    W = len(inst.demand_nodes)
    S = len(inst.stops)
    m = inst.m
    if tag == "CG-noS":
        return 2 * (S + 1) * S + 2 * S + W * S
    A = len(inst.network.arcs) if tag.startswith("RN") else (S + 1) * S
    extra = S if tag.endswith("wS") and valid_ineq else 0
    return 2 * A * m + 2 * S * m + W * S + extra
