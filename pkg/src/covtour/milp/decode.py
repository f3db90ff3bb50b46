"""Turn a solver's variable assignment back into a Solution.

Per vehicle, the chosen arcs form a directed multigraph. Components that do
not touch the depot are dropped, the rest is walked as an Eulerian circuit
from the depot, and the stops with a positive pickup are recorded in walk
order. Consecutive stops are then joined by shortest paths, which can only
shorten the walk.
"""

from __future__ import annotations

from typing import Mapping

import networkx as nx

from ..errors import Disconnected, NotEulerian
from ..instance import ProblemInstance
from ..solution import Solution, Tour, with_cost
from .model import CONS_TOL, INT_TOL, MilpModel


def _parse_name(name: str) -> tuple[str, list[int]]:
    head, *rest = name.split("_")
    return head, [int(p) for p in rest]


def _rounded(value: float, name: str) -> int:
    r = round(value)
    if abs(value - r) > INT_TOL:
        raise ValueError(f"{name} = {value} is not integral")
    return int(r)


def _circuit(vehicle: int, depot: int, arcs: dict[tuple[int, int], int], needed: set[int]) -> list[int]:
    """Node sequence of an Eulerian circuit through the depot component (closed, depot first and last)."""
    graph = nx.MultiDiGraph()
    for (t, h), count in sorted(arcs.items()):
        for _ in range(count):
            graph.add_edge(t, h)
    for v in sorted(graph.nodes):
        if graph.in_degree(v) != graph.out_degree(v):
            raise NotEulerian(vehicle, v)
    if depot not in graph:
        if needed:
            raise Disconnected(vehicle, min(needed))
        return [depot]
    keep = nx.node_connected_component(graph.to_undirected(as_view=True), depot)
    for j in sorted(needed):
        if j not in keep:
            raise Disconnected(vehicle, j)
    sub = graph.subgraph(keep)
    walk = [depot]
    walk.extend(h for _, h in nx.eulerian_circuit(sub, source=depot))
    return walk


def _stops_on(walk: list[int], chosen: dict[int, float]) -> list[tuple[int, float]]:
    seen = set()
    out = []
    for v in walk:
        if v in chosen and v not in seen:
            seen.add(v)
            out.append((v, chosen[v]))
    return out


def _clean(q: float):
    r = round(q)
    return int(r) if abs(q - r) <= CONS_TOL else q


def decode_solution(inst: ProblemInstance, tag: str, values: Mapping[str, float]) -> Solution:
    """Solution encoded by ``values`` in formulation ``tag``.

    Visits whose pickup is zero are dropped: either another vehicle collects
    the stop's load, or nobody is assigned there, and in both cases removing
    the visit leaves every assignment unchanged and lowers the cost.
    """
    arcs: dict[int | None, dict[tuple[int, int], int]] = {}
    stop_flag: dict[int | None, set[int]] = {}
    qty: dict[int | None, dict[int, float]] = {}
    assignment: dict[int, int] = {}
    for name, value in values.items():
        head, idx = _parse_name(name)
        k = idx[2] if head in ("x", "f") and len(idx) == 3 else idx[1] if head in ("y", "q") and len(idx) == 2 else None
        if head == "x":
            count = _rounded(value, name)
            if count:
                arcs.setdefault(k, {})[(idx[0], idx[1])] = count
        elif head == "y":
            if _rounded(value, name):
                stop_flag.setdefault(k, set()).add(idx[0])
        elif head == "q":
            if value > CONS_TOL:
                qty.setdefault(k, {})[idx[0]] = value
        elif head == "z":
            if _rounded(value, name) and idx[0] in inst.prefs and idx[1] in inst.prefs[idx[0]]:
                assignment[idx[0]] = idx[1]

    depot = inst.depot
    if tag == "CG-noS":
        chosen = {j: q for j, q in qty.get(None, {}).items() if j in stop_flag.get(None, set())}
        walk = _circuit(1, depot, arcs.get(None, {}), set(chosen))
        tours = []
        current: list[int] = []
        for v in walk[1:]:
            if v == depot:
                if current:
                    tours.append(current)
                current = []
            else:
                current.append(v)
        tours = [Tour(tuple((j, _clean(q)) for j, q in _stops_on(t, chosen))) for t in tours]
        tours = [t for t in tours if len(t)]
    else:
        tours = []
        for k in range(1, inst.m + 1):
            chosen = {j: q for j, q in qty.get(k, {}).items() if j in stop_flag.get(k, set())}
            walk = _circuit(k, depot, arcs.get(k, {}), set(chosen))
            tours.append(Tour(tuple((j, _clean(q)) for j, q in _stops_on(walk, chosen))))
    tours += [Tour()] * (inst.m - len(tours))
    return with_cost(inst, Solution(tuple(tours), assignment))


def raw_objective(model: MilpModel, values: Mapping[str, float]) -> float:
    """Objective of the assignment as given, before any re-routing."""
    return model.objective_value(values)


def raw_travel(model: MilpModel, values: Mapping[str, float]) -> float:
    """Arc part of the objective (the travel the assignment pays for)."""
    return sum(c * values.get(v, 0.0) for v, c in model.objective.items() if v.startswith("x_"))
