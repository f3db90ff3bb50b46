"""Builders for the road-network (RN) and customer-graph (CG) formulations, with and without splits.

Vehicles are numbered ``1..m``. Constraint families are emitted in this order:
cover, pref, qty, cap, stop/succ, deg, depot_out, flow, sink, qlink, flink,
then either the split-counting families vis, visk, splits (when requested) or,
for the vehicle-indexed no-split model, once.
"""

from __future__ import annotations

from typing import Iterable

from ..instance import ProblemInstance
from .model import BINARY, CONTINUOUS, INTEGER, MilpModel


def _x(t, h, k=None):
    return f"x_{t}_{h}" if k is None else f"x_{t}_{h}_{k}"


def _f(t, h, k=None):
    return f"f_{t}_{h}" if k is None else f"f_{t}_{h}_{k}"


def _y(j, k=None):
    return f"y_{j}" if k is None else f"y_{j}_{k}"


def _q(j, k=None):
    return f"q_{j}" if k is None else f"q_{j}_{k}"


def _z(i, j):
    return f"z_{i}_{j}"


def _rn_graph(inst: ProblemInstance):
    nodes = list(inst.network.node_ids)
    arcs = [((a.tail, a.head), inst.travel.arc_time(a.tail, a.head)) for a in inst.network.arcs]
    return nodes, arcs


def _cg_graph(inst: ProblemInstance):
    nodes = [inst.depot, *inst.stops]
    arcs = [((a, b), inst.travel(a, b)) for a in nodes for b in nodes if a != b]
    return nodes, arcs


def _declare_assignment(model: MilpModel, inst: ProblemInstance):
    for i in inst.demand_nodes:
        for j in inst.stops:
            model.add_var(_z(i, j), BINARY)


def _forbid_unlisted(model: MilpModel, inst: ProblemInstance, i: int):
    """z_ij = 0 for stops outside pref(i); without it a solver may set them freely."""
    pref = set(inst.prefs[i])
    model.add_constraint(f"nopref_{i}", {_z(i, j): 1 for j in inst.stops if j not in pref}, "=", 0)


def _later(inst: ProblemInstance, i: int, j: int) -> Iterable[int]:
    stops = inst.prefs[i].ranked_stops
    return stops[stops.index(j) + 1 :]


def _qty(model: MilpModel, inst: ProblemInstance, vehicles):
    for j in inst.stops:
        terms = {_z(i, j): inst.demands[i] for i in sorted(inst.coverers[j])}
        for k in vehicles:
            terms[_q(j, k)] = -1
        model.add_constraint(f"qty_{j}", terms, "=", 0)


def _build_vehicle_indexed(inst: ProblemInstance, tag: str, road: bool, splits: bool, valid_ineq: bool) -> MilpModel:
    model = MilpModel(tag, inst.digest())
    nodes, arcs = _rn_graph(inst) if road else _cg_graph(inst)
    vehicles = range(1, inst.m + 1)
    Q = inst.Q
    r = inst.stop_penalty
    depot = inst.depot
    stops = inst.stops
    stop_set = set(stops)
    xkind = INTEGER if road else BINARY

    for (t, h), _ in arcs:
        for k in vehicles:
            model.add_var(_x(t, h, k), xkind)
    for j in stops:
        for k in vehicles:
            model.add_var(_y(j, k), BINARY)
    _declare_assignment(model, inst)
    for j in stops:
        for k in vehicles:
            model.add_var(_q(j, k), CONTINUOUS)
    for (t, h), _ in arcs:
        for k in vehicles:
            model.add_var(_f(t, h, k), CONTINUOUS)
    if splits and valid_ineq:
        for j in stops:
            model.add_var(f"s_{j}", BINARY)

    for (t, h), cost in arcs:
        for k in vehicles:
            model.objective[_x(t, h, k)] = cost
    for j in stops:
        for k in vehicles:
            model.objective[_y(j, k)] = r

    for i in inst.demand_nodes:
        model.add_constraint(f"cover_{i}", {_z(i, j): 1 for j in inst.prefs[i]}, "=", 1)
        _forbid_unlisted(model, inst, i)
    for i in inst.demand_nodes:
        for j in inst.prefs[i]:
            later = {_z(i, jj): 1 for jj in _later(inst, i, j)}
            if splits:
                for k in vehicles:
                    model.add_constraint(f"pref_{i}_{j}_{k}", {**later, _y(j, k): 1}, "<=", 1)
            else:
                terms = dict(later)
                for k in vehicles:
                    terms[_y(j, k)] = 1
                model.add_constraint(f"pref_{i}_{j}", terms, "<=", 1)
    _qty(model, inst, vehicles)
    for k in vehicles:
        model.add_constraint(f"cap_{k}", {_q(j, k): 1 for j in stops}, "<=", Q)

    in_arcs: dict[int, list] = {v: [] for v in nodes}
    out_arcs: dict[int, list] = {v: [] for v in nodes}
    for (t, h), _ in arcs:
        out_arcs[t].append((t, h))
        in_arcs[h].append((t, h))

    for j in stops:
        for k in vehicles:
            if road:
                terms = {_x(t, h, k): 1 for t, h in in_arcs[j]}
                terms[_y(j, k)] = -1
                model.add_constraint(f"stop_{j}_{k}", terms, ">=", 0)
            else:
                terms = {_x(t, h, k): 1 for t, h in out_arcs[j]}
                terms[_y(j, k)] = -1
                model.add_constraint(f"succ_{j}_{k}", terms, "=", 0)
    for v in nodes:
        for k in vehicles:
            terms = {_x(t, h, k): 1 for t, h in in_arcs[v]}
            for t, h in out_arcs[v]:
                terms[_x(t, h, k)] = terms.get(_x(t, h, k), 0) - 1
            model.add_constraint(f"deg_{v}_{k}", terms, "=", 0)
    for v in nodes:
        if v == depot:
            continue
        for k in vehicles:
            terms = {_f(t, h, k): 1 for t, h in out_arcs[v]}
            for t, h in in_arcs[v]:
                terms[_f(t, h, k)] = terms.get(_f(t, h, k), 0) - 1
            if v in stop_set:
                terms[_q(v, k)] = -1
            model.add_constraint(f"flow_{v}_{k}", terms, "=", 0)
    for k in vehicles:
        terms = {_f(t, h, k): 1 for t, h in in_arcs[depot]}
        for j in stops:
            terms[_q(j, k)] = -1
        model.add_constraint(f"sink_{k}", terms, "=", 0)
    for j in stops:
        for k in vehicles:
            model.add_constraint(f"qlink_{j}_{k}", {_q(j, k): 1, _y(j, k): -Q}, "<=", 0)
    for (t, h), _ in arcs:
        for k in vehicles:
            model.add_constraint(f"flink_{t}_{h}_{k}", {_f(t, h, k): 1, _x(t, h, k): -Q}, "<=", 0)

    if splits and valid_ineq:
        for j in stops:
            terms = {f"s_{j}": 1}
            for k in vehicles:
                terms[_y(j, k)] = -1
            model.add_constraint(f"vis_{j}", terms, "<=", 0)
        for j in stops:
            for k in vehicles:
                model.add_constraint(f"visk_{j}_{k}", {f"s_{j}": 1, _y(j, k): -1}, ">=", 0)
        terms = {}
        for j in stops:
            for k in vehicles:
                terms[_y(j, k)] = 1
            terms[f"s_{j}"] = -1
        model.add_constraint("splits", terms, "<=", inst.m - 1)
    if not splits:
        for j in stops:
            model.add_constraint(f"once_{j}", {_y(j, k): 1 for k in vehicles}, "<=", 1)
    return model


def build_rn_ws(inst: ProblemInstance, with_valid_ineq: bool = True) -> MilpModel:
    """Road-network model with splits; optionally with the split-count valid inequality."""
    return _build_vehicle_indexed(inst, "RN-wS", road=True, splits=True, valid_ineq=with_valid_ineq)


def build_rn_nos(inst: ProblemInstance) -> MilpModel:
    """Road-network model forbidding splits: at most one vehicle per stop, strengthened preference rows."""
    return _build_vehicle_indexed(inst, "RN-noS", road=True, splits=False, valid_ineq=False)


def build_cg_ws(inst: ProblemInstance, with_valid_ineq: bool = True) -> MilpModel:
    """Customer-graph model with splits on the complete graph over depot and stops.

    Leaving a stop is tied to stopping there (equality instead of the road-network ``>=``).
    """
    return _build_vehicle_indexed(inst, "CG-wS", road=False, splits=True, valid_ineq=with_valid_ineq)


def build_cg_nos(inst: ProblemInstance) -> MilpModel:
    """Two-index customer-graph model without splits and exactly ``m`` departures from the depot."""
    model = MilpModel("CG-noS", inst.digest())
    nodes, arcs = _cg_graph(inst)
    depot = inst.depot
    stops = inst.stops
    Q = inst.Q

    for (a, b), _ in arcs:
        model.add_var(_x(a, b), BINARY)
    for j in stops:
        model.add_var(_y(j), BINARY)
    _declare_assignment(model, inst)
    for j in stops:
        model.add_var(_q(j), CONTINUOUS)
    for (a, b), _ in arcs:
        model.add_var(_f(a, b), CONTINUOUS)

    for j in stops:
        model.objective[_y(j)] = inst.stop_penalty
    for (a, b), cost in arcs:
        model.objective[_x(a, b)] = cost

    for i in inst.demand_nodes:
        model.add_constraint(f"cover_{i}", {_z(i, j): 1 for j in inst.prefs[i]}, "=", 1)
        _forbid_unlisted(model, inst, i)
    for i in inst.demand_nodes:
        for j in inst.prefs[i]:
            terms = {_z(i, jj): 1 for jj in _later(inst, i, j)}
            terms[_y(j)] = 1
            model.add_constraint(f"pref_{i}_{j}", terms, "<=", 1)
    for j in stops:
        terms = {_z(i, j): inst.demands[i] for i in sorted(inst.coverers[j])}
        terms[_q(j)] = -1
        model.add_constraint(f"qty_{j}", terms, "=", 0)
    for j in stops:
        terms = {_x(j, b): 1 for b in nodes if b != j}
        terms[_y(j)] = -1
        model.add_constraint(f"succ_{j}", terms, "=", 0)
    for v in nodes:
        terms = {_x(a, v): 1 for a in nodes if a != v}
        for b in nodes:
            if b != v:
                terms[_x(v, b)] = -1
        model.add_constraint(f"deg_{v}", terms, "=", 0)
    model.add_constraint("depot_out", {_x(depot, b): 1 for b in stops}, "=", inst.m)
    for j in stops:
        terms = {_f(j, b): 1 for b in nodes if b != j}
        for a in nodes:
            if a != j:
                terms[_f(a, j)] = -1
        terms[_q(j)] = -1
        model.add_constraint(f"flow_{j}", terms, "=", 0)
    terms = {}
    for j in stops:
        terms[_f(j, depot)] = 1
        terms[_f(depot, j)] = -1
        terms[_q(j)] = -1
    model.add_constraint("sink", terms, "=", 0)
    for j in stops:
        model.add_constraint(f"qlink_{j}", {_q(j): 1, _y(j): -Q}, "<=", 0)
    for (a, b), _ in arcs:
        model.add_constraint(f"flink_{a}_{b}", {_f(a, b): 1, _x(a, b): -Q}, "<=", 0)
    return model


BUILDERS = {
    "RN-wS": build_rn_ws,
    "RN-noS": build_rn_nos,
    "CG-wS": build_cg_ws,
    "CG-noS": build_cg_nos,
}


def build(inst: ProblemInstance, tag: str, with_valid_ineq: bool = True) -> MilpModel:
    if tag not in BUILDERS:
        raise ValueError(f"unknown formulation {tag!r}")
    if tag in ("RN-wS", "CG-wS"):
        return BUILDERS[tag](inst, with_valid_ineq)
    return BUILDERS[tag](inst)
