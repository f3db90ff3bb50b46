"""Map a Solution onto the variables of a formulation (the inverse of decoding)."""

from __future__ import annotations

from ..instance import ProblemInstance
from ..solution import Solution
from .formulations import _f, _q, _x, _y, _z


def _walk(inst: ProblemInstance, nodes, road: bool) -> list[tuple[int, int, int | None]]:
    """Arcs of one closed tour as ``(tail, head, stop)``; ``stop`` is the stop reached at the arc's head, if any."""
    seq = [inst.depot, *nodes, inst.depot]
    out = []
    for a, b in zip(seq, seq[1:]):
        legs = inst.travel.path_arcs(a, b) if road else [(a, b)]
        for n, (t, h) in enumerate(legs):
            out.append((t, h, b if n == len(legs) - 1 and b != inst.depot else None))
    return out


def encode(inst: ProblemInstance, sol: Solution, tag: str, with_valid_ineq: bool = True) -> dict[str, float]:
    """Variable assignment representing ``sol`` in formulation ``tag``.

    Tours on the road network are expanded along shortest paths; flows carry
    the cumulative load and restart at zero whenever a walk leaves the depot.
    Raises ``ValueError`` when ``sol`` is outside the formulation's scope
    (a stop visited twice by one tour, splits in a no-split model, or fewer
    than ``m`` nonempty tours in the two-index model).
    """
    road = tag.startswith("RN")
    splits = tag.endswith("wS")
    values: dict[str, float] = {}
    for i, j in sol.assignment.items():
        values[_z(i, j)] = 1
    for k, tour in enumerate(sol.tours, 1):
        if len(set(tour.nodes)) != len(tour.nodes):
            raise ValueError(f"tour {k} stops twice at one node")
    visits: dict[int, int] = {}
    for tour in sol.tours:
        for j in tour.nodes:
            visits[j] = visits.get(j, 0) + 1
    if not splits and any(c > 1 for c in visits.values()):
        raise ValueError("solution splits a stop but the formulation forbids splits")

    if tag == "CG-noS":
        if sum(1 for t in sol.tours if len(t)) != inst.m:
            raise ValueError("two-index model needs exactly m nonempty tours")
        for tour in sol.tours:
            _trace(inst, tour, road, values, lambda t, h: _x(t, h), lambda t, h: _f(t, h))
            for j, q in tour:
                values[_y(j)] = 1
                values[_q(j)] = q
        return _numeric(values)

    for k, tour in enumerate(sol.tours, 1):
        _trace(inst, tour, road, values, lambda t, h, k=k: _x(t, h, k), lambda t, h, k=k: _f(t, h, k))
        for j, q in tour:
            values[_y(j, k)] = 1
            values[_q(j, k)] = values.get(_q(j, k), 0) + q
    if splits and with_valid_ineq:
        for j in visits:
            values[f"s_{j}"] = 1
    return _numeric(values)


def _trace(inst, tour, road, values, x_name, f_name):
    # the arc into a stop carries the load collected before it
    qty = dict(tour.visits)
    load = 0
    for t, h, stop in _walk(inst, tour.nodes, road):
        if t == inst.depot:
            load = 0
        values[x_name(t, h)] = values.get(x_name(t, h), 0) + 1
        values[f_name(t, h)] = values.get(f_name(t, h), 0) + load
        if stop is not None:
            load += qty[stop]


def _numeric(values: dict) -> dict[str, float]:
    return {k: float(v) for k, v in values.items() if v != 0}
