"""Problem instances: assembly, fleet sizing, JSON (de)serialization and a synthetic generator."""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Any, Mapping, Sequence, Union

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import minimum_spanning_tree
from scipy.spatial import Delaunay

from .errors import InvalidParams, ParseError, ValidationError
from .network import (
    Arc,
    Node,
    PreferenceList,
    RoadNetwork,
    SpeedModel,
    TravelCostMatrix,
    build_preference_lists,
    densify_stops,
    restrict_to_preferred,
)

Number = Union[int, float, Fraction]

# Presets for speeds (m/s) and stop penalty (s).
PRESETS = {
    "small": dict(s_col=1.0, s_dep=1.0, stop_penalty=5.0),
    "real": dict(s_col=2.0, s_dep=14.0, stop_penalty=5.0),
}
DEFAULT_MAX_GAP = 50.0


@dataclass(frozen=True)
class InstanceParams:
    """Instance parameters.

    Give either the tour count ``m`` (capacity is derived) or a ``capacity``
    with an optional loading ``buffer`` (tour count is derived). Giving both
    fixes the fleet explicitly. ``max_gap`` is the densification gap used
    when candidate stops are not listed.
    """

    gamma: float = 0.0
    m: int | None = None
    capacity: Number | None = None
    buffer: float = 0.0
    stop_penalty: float = 5.0
    s_col: float = 1.0
    s_dep: float = 1.0
    max_gap: float | None = None

    def __post_init__(self):
        if self.m is None and self.capacity is None:
            raise InvalidParams("one of m or capacity is required")
        if self.m is not None and (int(self.m) != self.m or self.m < 1):
            raise InvalidParams("m must be a positive integer")
        if self.capacity is not None and not self.capacity > 0:
            raise InvalidParams("capacity must be positive")
        if not 0 <= self.buffer < 1:
            raise InvalidParams("buffer must lie in [0, 1)")
        if self.gamma < 0 or self.stop_penalty < 0:
            raise InvalidParams("gamma and stop_penalty must be non-negative")
        if self.max_gap is not None and not self.max_gap > 0:
            raise InvalidParams("max_gap must be positive")

    @property
    def speeds(self) -> SpeedModel:
        return SpeedModel(self.s_col, self.s_dep)


def _exact(value: Number) -> Fraction:
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(value)


def _tidy(value: Fraction) -> Number:
    return int(value) if value.denominator == 1 else value


def derive_fleet(total_demand: Number, params: InstanceParams) -> tuple[int, Number]:
    """Return ``(m, Q)`` such that ``m * Q >= total_demand``."""
    if params.m is not None and params.capacity is not None:
        return int(params.m), params.capacity
    if not total_demand > 0:
        raise InvalidParams("total demand must be positive")
    total = _exact(total_demand)
    if params.capacity is not None:
        usable = _exact(params.capacity) * (1 - _exact(params.buffer))
        return math.ceil(total / usable), params.capacity
    return int(params.m), math.ceil(total / params.m)


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    network: RoadNetwork
    demands: Mapping[int, Number]
    prefs: Mapping[int, PreferenceList]
    m: int
    Q: Number
    params: InstanceParams
    prefs_explicit: bool = False
    travel: TravelCostMatrix = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "demands", dict(self.demands))
        object.__setattr__(self, "prefs", dict(self.prefs))
        self._validate()
        object.__setattr__(self, "travel", TravelCostMatrix(self.network, self.params.speeds))

    def _validate(self):
        net = self.network
        if set(self.demands) != set(net.demand_nodes):
            raise ValidationError("demands", "demand map must cover exactly the demand nodes")
        if any(q < 0 for q in self.demands.values()):
            raise ValidationError("demands", "quantities must be non-negative")
        stops = set(net.candidate_stops)
        for i in net.demand_nodes:
            if i not in self.prefs:
                raise ValidationError("prefs", f"demand node {i} has no preference list")
            bad = [j for j in self.prefs[i] if j not in stops]
            if bad:
                raise ValidationError("prefs", f"preference list of {i} contains non-candidate stops {bad}")
        if self.m < 1 or not self.Q > 0:
            raise ValidationError("fleet", "m >= 1 and Q > 0 required")
        if _exact(self.total_demand) > self.m * _exact(self.Q):
            raise ValidationError("capacity", f"total demand {self.total_demand} exceeds m*Q = {self.m * self.Q}")

    def __eq__(self, other):
        if not isinstance(other, ProblemInstance):
            return NotImplemented
        return (
            self.network == other.network
            and self.demands == other.demands
            and self.prefs == other.prefs
            and self.m == other.m
            and self.Q == other.Q
            and self.params == other.params
        )

    __hash__ = None

    @property
    def depot(self) -> int:
        return self.network.depot

    @property
    def stops(self) -> tuple[int, ...]:
        return self.network.candidate_stops

    @property
    def demand_nodes(self) -> tuple[int, ...]:
        return self.network.demand_nodes

    @property
    def stop_penalty(self) -> float:
        return self.params.stop_penalty

    @property
    def gamma(self) -> float:
        return self.params.gamma

    @property
    def total_demand(self) -> Number:
        return sum(self.demands.values())

    @property
    def integral_demands(self) -> bool:
        """Whether all demands and the capacity are integers (required by the exact solver)."""
        return all(int(q) == q for q in self.demands.values()) and int(self.Q) == self.Q

    @cached_property
    def ranks(self) -> dict[int, dict[int, int]]:
        return {i: {j: r for r, j in enumerate(p.ranked_stops)} for i, p in self.prefs.items()}

    def rank(self, i: int, j: int) -> int:
        return self.ranks[i][j]

    @cached_property
    def coverers(self) -> dict[int, frozenset[int]]:
        """For each candidate stop, the demand nodes that list it."""
        out: dict[int, set[int]] = {j: set() for j in self.stops}
        for i, p in self.prefs.items():
            for j in p:
                out[j].add(i)
        return {j: frozenset(v) for j, v in out.items()}

    def digest(self) -> str:
        return hashlib.sha256(save_instance(self)).hexdigest()[:16]


def build_instance(
    network: RoadNetwork,
    demands: Mapping[int, Number],
    params: InstanceParams,
    prefs: Sequence[PreferenceList] | None = None,
) -> ProblemInstance:
    """Assemble an instance, deriving preference lists and the fleet when needed."""
    network = network.replace(
        nodes=tuple(sorted(network.nodes, key=lambda n: n.id)),
        arcs=tuple(sorted(network.arcs, key=lambda a: (a.tail, a.head))),
        candidate_stops=tuple(sorted(network.candidate_stops)),
        demand_nodes=tuple(sorted(network.demand_nodes)),
    )
    explicit = prefs is not None
    if explicit:
        network = restrict_to_preferred(network, prefs)
    else:
        network, prefs = build_preference_lists(network, params.gamma)
    m, Q = derive_fleet(sum(demands.values()), params)
    return ProblemInstance(
        network=network,
        demands=dict(demands),
        prefs={p.owner: p for p in prefs},
        m=m,
        Q=Q,
        params=params,
        prefs_explicit=explicit,
    )


# --------------------------------------------------------------------------- JSON

_TOP_KEYS = {"nodes", "arcs", "depot", "candidate_stops", "demands", "prefs", "params"}
_REQUIRED = {"nodes", "arcs", "depot", "demands", "params"}
_PARAM_KEYS = {"gamma_m", "m", "capacity", "stop_penalty_s", "s_col", "s_dep", "max_gap_m"}


def _expect_keys(obj: Any, allowed: set, required: set, locus: str) -> dict:
    if not isinstance(obj, dict):
        raise ParseError(locus, "expected an object")
    unknown = set(obj) - allowed
    if unknown:
        raise ParseError(locus, f"unknown keys {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise ParseError(locus, f"missing keys {sorted(missing)}")
    return obj


def _number(value: Any, locus: str) -> Number:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(locus, f"expected a number, got {value!r}")
    return value


def _node_id(value: Any, locus: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ParseError(locus, f"expected an integer node id, got {value!r}")
    return value


def _list(value: Any, locus: str) -> list:
    if not isinstance(value, list):
        raise ParseError(locus, "expected a list")
    return value


def _parse_params(raw: Any) -> InstanceParams:
    obj = _expect_keys(raw, _PARAM_KEYS, {"gamma_m", "stop_penalty_s", "s_col", "s_dep"}, "params")
    kwargs: dict[str, Any] = dict(
        gamma=_number(obj["gamma_m"], "params.gamma_m"),
        stop_penalty=_number(obj["stop_penalty_s"], "params.stop_penalty_s"),
        s_col=_number(obj["s_col"], "params.s_col"),
        s_dep=_number(obj["s_dep"], "params.s_dep"),
    )
    if "m" in obj:
        kwargs["m"] = _node_id(obj["m"], "params.m")
    if "capacity" in obj:
        cap = _expect_keys(obj["capacity"], {"Q", "buffer"}, {"Q"}, "params.capacity")
        kwargs["capacity"] = _number(cap["Q"], "params.capacity.Q")
        kwargs["buffer"] = _number(cap.get("buffer", 0.0), "params.capacity.buffer")
    if "max_gap_m" in obj:
        kwargs["max_gap"] = _number(obj["max_gap_m"], "params.max_gap_m")
    return InstanceParams(**kwargs)


def load_instance(text: bytes | str) -> ProblemInstance:
    """Parse and validate an instance document.

    Raises:
        ParseError: malformed JSON or schema violation, with a line or field locus.
        ValidationError: the document parses but violates an instance invariant.
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"byte {exc.start}", "not valid UTF-8") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno}", exc.msg) from exc
    _expect_keys(doc, _TOP_KEYS, _REQUIRED, "document")

    nodes = []
    for k, raw in enumerate(_list(doc["nodes"], "nodes")):
        loc = f"nodes[{k}]"
        obj = _expect_keys(raw, {"id", "x", "y"}, {"id"}, loc)
        nodes.append(
            Node(
                _node_id(obj["id"], f"{loc}.id"),
                _number(obj.get("x", 0.0), f"{loc}.x"),
                _number(obj.get("y", 0.0), f"{loc}.y"),
            )
        )
    arcs = []
    for k, raw in enumerate(_list(doc["arcs"], "arcs")):
        loc = f"arcs[{k}]"
        obj = _expect_keys(raw, {"tail", "head", "length_m"}, {"tail", "head", "length_m"}, loc)
        arcs.append(
            Arc(
                _node_id(obj["tail"], f"{loc}.tail"),
                _node_id(obj["head"], f"{loc}.head"),
                _number(obj["length_m"], f"{loc}.length_m"),
            )
        )
    depot = _node_id(doc["depot"], "depot")
    demands: dict[int, Number] = {}
    for k, raw in enumerate(_list(doc["demands"], "demands")):
        loc = f"demands[{k}]"
        obj = _expect_keys(raw, {"node", "qty"}, {"node", "qty"}, loc)
        node = _node_id(obj["node"], f"{loc}.node")
        if node in demands:
            raise ParseError(f"{loc}.node", f"duplicate demand node {node}")
        demands[node] = _number(obj["qty"], f"{loc}.qty")
    params = _parse_params(doc["params"])

    if "candidate_stops" in doc:
        stops = [_node_id(v, f"candidate_stops[{k}]") for k, v in enumerate(_list(doc["candidate_stops"], "candidate_stops"))]
        densify = False
    else:
        stops = [n.id for n in nodes if n.id != depot]
        densify = True

    prefs = None
    if "prefs" in doc:
        prefs = []
        for k, raw in enumerate(_list(doc["prefs"], "prefs")):
            loc = f"prefs[{k}]"
            obj = _expect_keys(raw, {"node", "stops"}, {"node", "stops"}, loc)
            ranked = [_node_id(v, f"{loc}.stops[{n}]") for n, v in enumerate(_list(obj["stops"], f"{loc}.stops"))]
            prefs.append(PreferenceList(_node_id(obj["node"], f"{loc}.node"), tuple(ranked)))

    network = RoadNetwork(tuple(nodes), tuple(arcs), depot, tuple(stops), tuple(demands))
    if densify:
        network = densify_stops(network, params.max_gap or DEFAULT_MAX_GAP)
    return build_instance(network, demands, params, prefs)


def _params_doc(params: InstanceParams) -> dict:
    out: dict[str, Any] = {"gamma_m": params.gamma}
    if params.m is not None:
        out["m"] = params.m
    if params.capacity is not None:
        out["capacity"] = {"Q": params.capacity, "buffer": params.buffer}
    out["stop_penalty_s"] = params.stop_penalty
    out["s_col"] = params.s_col
    out["s_dep"] = params.s_dep
    if params.max_gap is not None:
        out["max_gap_m"] = params.max_gap
    return out


def instance_to_doc(inst: ProblemInstance) -> dict:
    net = inst.network
    doc: dict[str, Any] = {
        "nodes": [{"id": n.id, "x": n.x, "y": n.y} for n in net.nodes],
        "arcs": [{"tail": a.tail, "head": a.head, "length_m": a.length} for a in net.arcs],
        "depot": net.depot,
        "candidate_stops": list(net.candidate_stops),
        "demands": [{"node": i, "qty": inst.demands[i]} for i in net.demand_nodes],
    }
    if inst.prefs_explicit:
        doc["prefs"] = [{"node": i, "stops": list(inst.prefs[i].ranked_stops)} for i in net.demand_nodes]
    doc["params"] = _params_doc(inst.params)
    return doc


def save_instance(inst: ProblemInstance) -> bytes:
    return (json.dumps(instance_to_doc(inst), indent=1) + "\n").encode("utf-8")


# --------------------------------------------------------------------------- generator


def _planar_edges(points: np.ndarray, rng: random.Random, extra_prob: float) -> list[tuple[int, int]]:
    n = len(points)
    if n < 3:
        return [(0, 1)] if n == 2 else []
    try:
        tri = Delaunay(points)
        candidates = set()
        for simplex in tri.simplices:
            a, b, c = sorted(int(v) for v in simplex)
            candidates.update({(a, b), (a, c), (b, c)})
    except Exception:  # collinear point sets
        order = np.argsort(points[:, 0] + 1e-9 * points[:, 1])
        candidates = {tuple(sorted((int(u), int(v)))) for u, v in zip(order, order[1:])}
    candidates = sorted(candidates)
    weights = [float(np.hypot(*(points[a] - points[b]))) + 1e-9 for a, b in candidates]
    graph = coo_matrix((weights, ([a for a, _ in candidates], [b for _, b in candidates])), shape=(n, n))
    tree = minimum_spanning_tree(graph).tocoo()
    kept = {tuple(sorted((int(a), int(b)))) for a, b in zip(tree.row, tree.col)}
    for edge in candidates:
        if edge not in kept and rng.random() < extra_prob:
            kept.add(edge)
    return sorted(kept)


def generate_sparse(
    n_nodes: int,
    demand_prob: float,
    seed: int,
    params: InstanceParams,
    *,
    spacing: float = 25.0,
    extra_edge_prob: float = 0.35,
) -> ProblemInstance:
    """Random sparse planar-style road network with node 0 as depot.

    Edges are a Euclidean spanning tree of a Delaunay triangulation plus a
    random share of the remaining triangulation edges, each emitted as two
    arcs of integer length. Every non-depot node is a candidate stop; each is a
    demand node with probability ``demand_prob`` and demand uniform on 1..9.
    """
    if n_nodes < 3:
        raise InvalidParams("n_nodes must be at least 3")
    if not 0 < demand_prob <= 1:
        raise InvalidParams("demand_prob must lie in (0, 1]")
    rng = random.Random(seed)
    side = spacing * math.sqrt(n_nodes)
    points = np.array([[round(rng.uniform(0, side), 1), round(rng.uniform(0, side), 1)] for _ in range(n_nodes)])
    edges = _planar_edges(points, rng, extra_edge_prob)
    arcs = []
    for a, b in edges:
        length = max(1, round(float(np.hypot(*(points[a] - points[b])))))
        arcs.append(Arc(a, b, length))
        arcs.append(Arc(b, a, length))
    nodes = tuple(Node(k, float(points[k, 0]), float(points[k, 1])) for k in range(n_nodes))
    demands = {k: rng.randint(1, 9) for k in range(1, n_nodes) if rng.random() < demand_prob}
    if not demands:
        demands[rng.randrange(1, n_nodes)] = rng.randint(1, 9)
    network = RoadNetwork(nodes, tuple(arcs), 0, tuple(range(1, n_nodes)), tuple(sorted(demands)))
    return build_instance(network, demands, params)

