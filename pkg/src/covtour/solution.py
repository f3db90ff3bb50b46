"""m-tour solutions: first-visited demand assignment, cost evaluation and feasibility checks."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Mapping, Sequence

from .errors import ParseError, Uncovered
from .instance import Number, ProblemInstance

QTY_TOL = 1e-9


@dataclass(frozen=True)
class Tour:
    """Ordered ``(stop, quantity)`` visits; start and end at the depot are implicit."""

    visits: tuple[tuple[int, Number], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "visits", tuple((int(j), q) for j, q in self.visits))

    @property
    def nodes(self) -> tuple[int, ...]:
        return tuple(j for j, _ in self.visits)

    @property
    def load(self) -> Number:
        return sum(q for _, q in self.visits)

    def __len__(self):
        return len(self.visits)

    def __iter__(self):
        return iter(self.visits)


@dataclass(frozen=True)
class CostBreakdown:
    travel_s: float
    stop_penalty_s: float
    total_s: float


@dataclass(frozen=True)
class Solution:
    tours: tuple[Tour, ...]
    assignment: Mapping[int, int]
    cost: CostBreakdown | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "tours", tuple(self.tours))
        object.__setattr__(self, "assignment", dict(self.assignment))

    def visited(self) -> set[int]:
        return {j for t in self.tours for j in t.nodes}

    def stop_events(self) -> int:
        return sum(len(t) for t in self.tours)

    def splits(self) -> int:
        """Number of extra visits to stops served by more than one tour."""
        counts: dict[int, int] = {}
        for t in self.tours:
            for j in set(t.nodes):
                counts[j] = counts.get(j, 0) + 1
        return sum(c - 1 for c in counts.values())


@dataclass(frozen=True)
class DemandAssignment:
    """Result of :func:`assign_demands`.

    ``stop_of`` maps each demand node to the stop serving it, ``load`` holds the
    positive per-stop totals and ``idle`` the visited stops receiving nothing.
    """

    stop_of: dict[int, int]
    load: dict[int, Number]
    idle: frozenset[int]


def assign_demands(inst: ProblemInstance, visited: Iterable[int]) -> DemandAssignment:
    """Assign each demand node to the most preferred visited stop in its list."""
    visited = set(visited)
    stop_of: dict[int, int] = {}
    for i in inst.demand_nodes:
        for j in inst.prefs[i]:
            if j in visited:
                stop_of[i] = j
                break
        else:
            raise Uncovered(i)
    load: dict[int, Number] = {}
    for i, j in stop_of.items():
        load[j] = load.get(j, 0) + inst.demands[i]
    load = {j: q for j, q in load.items() if q > 0}
    return DemandAssignment(stop_of, load, frozenset(visited - set(load)))


def tour_travel(inst: ProblemInstance, nodes: Sequence[int]) -> float:
    if not nodes:
        return 0.0
    t = inst.travel
    depot = inst.depot
    total = t(depot, nodes[0]) + t(nodes[-1], depot)
    for a, b in zip(nodes, nodes[1:]):
        total += t(a, b)
    return total


def evaluate(inst: ProblemInstance, sol: Solution) -> CostBreakdown:
    travel = sum(tour_travel(inst, t.nodes) for t in sol.tours)
    penalty = inst.stop_penalty * sol.stop_events()
    return CostBreakdown(travel, penalty, travel + penalty)


def with_cost(inst: ProblemInstance, sol: Solution) -> Solution:
    return Solution(sol.tours, sol.assignment, evaluate(inst, sol))


@dataclass(frozen=True)
class Violation:
    kind: str  # coverage | preference | capacity | conservation | tour_count | structure
    detail: str


@dataclass
class FeasibilityReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}

    def add(self, kind: str, detail: str):
        self.violations.append(Violation(kind, detail))

    def __str__(self):
        if self.ok:
            return "feasible"
        return "\n".join(f"{v.kind}: {v.detail}" for v in self.violations)


def _close(a: Number, b: Number) -> bool:
    if isinstance(a, float) or isinstance(b, float):
        return abs(a - b) <= QTY_TOL * max(1.0, abs(a), abs(b))
    return a == b


def check_feasible(inst: ProblemInstance, sol: Solution) -> FeasibilityReport:
    report = FeasibilityReport()
    if len(sol.tours) != inst.m:
        report.add("tour_count", f"{len(sol.tours)} tours, expected {inst.m}")
    stops = set(inst.stops)
    visited = sol.visited()
    for k, tour in enumerate(sol.tours):
        for j, q in tour:
            if j not in stops:
                report.add("structure", f"tour {k} stops at non-candidate node {j}")
            if q < 0:
                report.add("structure", f"tour {k} has negative quantity at {j}")
        for a, b in zip(tour.nodes, tour.nodes[1:]):
            if a == b:
                report.add("structure", f"tour {k} stops twice in a row at {a}")
        load = tour.load
        if load > inst.Q and not _close(load, inst.Q):
            report.add("capacity", f"tour {k} carries {load} > Q = {inst.Q}")

    served: dict[int, Number] = {}
    for i in inst.demand_nodes:
        pref = inst.prefs[i]
        first = next((j for j in pref if j in visited), None)
        if first is None:
            report.add("coverage", f"demand node {i} is not covered")
            continue
        assigned = sol.assignment.get(i)
        if assigned is None:
            report.add("coverage", f"demand node {i} has no assignment")
            continue
        if assigned not in pref:
            report.add("preference", f"demand node {i} assigned to {assigned}, not in its list")
        elif assigned != first:
            report.add("preference", f"demand node {i} assigned to {assigned} but {first} is visited and preferred")
        served[assigned] = served.get(assigned, 0) + inst.demands[i]
    extra = set(sol.assignment) - set(inst.demand_nodes)
    if extra:
        report.add("structure", f"assignment lists non-demand nodes {sorted(extra)}")

    delivered: dict[int, Number] = {}
    for tour in sol.tours:
        for j, q in tour:
            delivered[j] = delivered.get(j, 0) + q
    for j in sorted(set(served) | set(delivered)):
        if not _close(served.get(j, 0), delivered.get(j, 0)):
            report.add("conservation", f"stop {j}: assigned {served.get(j, 0)}, collected {delivered.get(j, 0)}")
    return report


# --------------------------------------------------------------------------- files


def _json_qty(q: Number):
    if isinstance(q, Fraction):
        return int(q) if q.denominator == 1 else float(q)
    return q


def solution_to_doc(sol: Solution, inst: ProblemInstance | None = None) -> dict:
    cost = sol.cost if sol.cost is not None or inst is None else evaluate(inst, sol)
    doc: dict[str, Any] = {
        "tours": [[{"node": j, "qty": _json_qty(q)} for j, q in t] for t in sol.tours],
        "assignment": {str(i): j for i, j in sorted(sol.assignment.items())},
    }
    if cost is not None:
        doc["cost"] = {"travel_s": cost.travel_s, "stop_penalty_s": cost.stop_penalty_s, "total_s": cost.total_s}
    if inst is not None:
        doc["instance"] = inst.digest()
    return doc


def save_solution(sol: Solution, inst: ProblemInstance | None = None) -> bytes:
    return (json.dumps(solution_to_doc(sol, inst), indent=1) + "\n").encode("utf-8")


def load_solution(text: bytes | str) -> tuple[Solution, str | None]:
    """Parse a solution document; returns the solution and its instance digest, if recorded."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno}", exc.msg) from exc
    if not isinstance(doc, dict) or not {"tours", "assignment"} <= set(doc):
        raise ParseError("document", "expected keys tours and assignment")
    unknown = set(doc) - {"tours", "assignment", "cost", "instance"}
    if unknown:
        raise ParseError("document", f"unknown keys {sorted(unknown)}")
    try:
        tours = tuple(Tour(tuple((int(v["node"]), v["qty"]) for v in t)) for t in doc["tours"])
        assignment = {int(i): int(j) for i, j in doc["assignment"].items()}
        cost = None
        if "cost" in doc:
            c = doc["cost"]
            cost = CostBreakdown(float(c["travel_s"]), float(c["stop_penalty_s"]), float(c["total_s"]))
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise ParseError("tours/assignment", f"malformed entry: {exc}") from exc
    return Solution(tours, assignment, cost), doc.get("instance")


def to_geojson(inst: ProblemInstance, sol: Solution) -> dict:
    """One LineString per tour (expanded along shortest paths) and one Point per visit."""
    net = inst.network
    features = []
    for k, tour in enumerate(sol.tours):
        if not len(tour):
            continue
        seq = [inst.depot, *tour.nodes, inst.depot]
        path = [inst.depot]
        for a, b in zip(seq, seq[1:]):
            path.extend(inst.travel.path(a, b)[1:])
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "LineString", "coordinates": [list(net.coords(v)) for v in path]},
                "properties": {"tour": k, "load": _json_qty(tour.load)},
            }
        )
        for j, q in tour:
            features.append(
                {
                    "type": "Feature",
                    "geometry": {"type": "Point", "coordinates": list(net.coords(j))},
                    "properties": {"tour": k, "node": j, "qty": _json_qty(q)},
                }
            )
    return {"type": "FeatureCollection", "features": features}


_PALETTE = ("red", "blue", "darkgreen", "orange", "purple", "brown", "magenta", "cyan")


def to_dot(inst: ProblemInstance, sol: Solution) -> str:
    """Graphviz rendering: road network in grey, tours colored by index."""
    net = inst.network
    demand = set(inst.demand_nodes)
    stops = set(inst.stops)
    lines = ["digraph covtour {", "  node [shape=circle, width=0.15, label=\"\"];"]
    for n in net.nodes:
        if n.id == net.depot:
            style = "shape=square, style=filled, fillcolor=black"
        elif n.id in demand:
            style = "penwidth=2.5"
        elif n.id in stops:
            style = "penwidth=1"
        else:
            style = "shape=point"
        lines.append(f"  {n.id} [pos=\"{n.x},{n.y}!\", {style}];")
    for a in net.arcs:
        lines.append(f"  {a.tail} -> {a.head} [color=grey80, arrowsize=0.3];")
    for k, tour in enumerate(sol.tours):
        color = _PALETTE[k % len(_PALETTE)]
        seq = [inst.depot, *tour.nodes, inst.depot] if len(tour) else []
        for a, b in zip(seq, seq[1:]):
            path = inst.travel.path(a, b)
            for u, v in zip(path, path[1:]):
                lines.append(f"  {u} -> {v} [color={color}, penwidth=2];")
        for j, q in tour:
            lines.append(f"  {j} [style=filled, fillcolor={color}, xlabel=\"{_json_qty(q)}\"];")
    lines.append("}")
    return "\n".join(lines) + "\n"
