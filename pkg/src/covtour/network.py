"""Directed road networks, shortest travel times, stop densification and preference lists."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order, dijkstra

from .errors import Unreachable, UncoverableDemandNode, ValidationError

# Absolute slack (meters) when comparing walking distances against gamma.
WALK_TOL = 1e-9


@dataclass(frozen=True)
class Node:
    id: int
    x: float = 0.0
    y: float = 0.0


@dataclass(frozen=True)
class Arc:
    tail: int
    head: int
    length: float


@dataclass(frozen=True)
class SpeedModel:
    """Average vehicle speeds in m/s.

    ``s_dep`` applies to arcs with the depot as tail or head, ``s_col`` to every other arc.
    """

    s_col: float = 1.0
    s_dep: float = 1.0

    def __post_init__(self):
        if not (self.s_col > 0 and self.s_dep > 0):
            raise ValidationError("speeds", "speeds must be positive")

    def arc_time(self, arc: Arc, depot: int) -> float:
        speed = self.s_dep if depot in (arc.tail, arc.head) else self.s_col
        return arc.length / speed


@dataclass(frozen=True)
class RoadNetwork:
    """Immutable directed road graph with a depot, candidate stops and demand nodes.

    Construction validates the structural invariants, including strong connectivity.
    """

    nodes: tuple[Node, ...]
    arcs: tuple[Arc, ...]
    depot: int
    candidate_stops: tuple[int, ...]
    demand_nodes: tuple[int, ...]
    _index: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "arcs", tuple(self.arcs))
        object.__setattr__(self, "candidate_stops", tuple(self.candidate_stops))
        object.__setattr__(self, "demand_nodes", tuple(self.demand_nodes))
        index = {}
        for pos, node in enumerate(self.nodes):
            if node.id in index:
                raise ValidationError("nodes", f"duplicate node id {node.id}")
            index[node.id] = pos
        object.__setattr__(self, "_index", index)
        self._validate()

    def _validate(self):
        ids = self._index
        if self.depot not in ids:
            raise ValidationError("depot", f"depot {self.depot} is not a node")
        seen = set()
        for arc in self.arcs:
            if arc.tail not in ids or arc.head not in ids:
                raise ValidationError("arcs", f"arc ({arc.tail}, {arc.head}) references an unknown node")
            if arc.tail == arc.head:
                raise ValidationError("arcs", f"self-loop at {arc.tail}")
            if not arc.length > 0 or not math.isfinite(arc.length):
                raise ValidationError("arcs", f"arc ({arc.tail}, {arc.head}) has non-positive length")
            key = (arc.tail, arc.head)
            if key in seen:
                raise ValidationError("arcs", f"duplicate arc {key}")
            seen.add(key)
        for name, group in (("candidate_stops", self.candidate_stops), ("demand_nodes", self.demand_nodes)):
            if len(set(group)) != len(group):
                raise ValidationError(name, "duplicate entries")
            missing = [v for v in group if v not in ids]
            if missing:
                raise ValidationError(name, f"unknown nodes {missing}")
        if self.depot in self.candidate_stops:
            raise ValidationError("candidate_stops", "the depot cannot be a candidate stop")
        if self.depot in self.demand_nodes:
            raise ValidationError("demand_nodes", "the depot cannot be a demand node")
        self._check_strongly_connected()

    def _check_strongly_connected(self):
        n = len(self.nodes)
        if n == 1:
            return
        graph = self._csr(lambda arc: 1.0)
        root = self._index[self.depot]
        forward = set(breadth_first_order(graph, root, directed=True, return_predecessors=False).tolist())
        backward = set(breadth_first_order(graph.T.tocsr(), root, directed=True, return_predecessors=False).tolist())
        for pos, node in enumerate(self.nodes):
            if pos not in forward:
                raise Unreachable(self.depot, node.id)
            if pos not in backward:
                raise Unreachable(node.id, self.depot)

    def _csr(self, weight) -> csr_matrix:
        n = len(self.nodes)
        rows = [self._index[a.tail] for a in self.arcs]
        cols = [self._index[a.head] for a in self.arcs]
        data = [weight(a) for a in self.arcs]
        return csr_matrix((data, (rows, cols)), shape=(n, n))

    def index_of(self, node: int) -> int:
        return self._index[node]

    @property
    def node_ids(self) -> tuple[int, ...]:
        return tuple(node.id for node in self.nodes)

    def coords(self, node: int) -> tuple[float, float]:
        n = self.nodes[self._index[node]]
        return n.x, n.y

    def arc_map(self) -> dict[tuple[int, int], Arc]:
        return {(a.tail, a.head): a for a in self.arcs}

    def replace(self, **changes) -> "RoadNetwork":
        fields = dict(
            nodes=self.nodes,
            arcs=self.arcs,
            depot=self.depot,
            candidate_stops=self.candidate_stops,
            demand_nodes=self.demand_nodes,
        )
        fields.update(changes)
        return RoadNetwork(**fields)


class TravelCostMatrix:
    """Shortest-path travel times (seconds) between the depot and candidate stops.

    ``nodes`` lists the depot first, then the candidate stops in network order.
    Any entry can be expanded into the arc path realising it with :meth:`path`.
    """

    def __init__(self, network: RoadNetwork, speeds: SpeedModel):
        self.depot = network.depot
        self.nodes: tuple[int, ...] = (network.depot,) + tuple(network.candidate_stops)
        self.index = {v: k for k, v in enumerate(self.nodes)}
        self._graph_ids = network.node_ids
        self._gpos = {v: k for k, v in enumerate(self._graph_ids)}
        graph = network._csr(lambda arc: speeds.arc_time(arc, network.depot))
        sources = [network.index_of(v) for v in self.nodes]
        dist, pred = dijkstra(graph, directed=True, indices=sources, return_predecessors=True)
        if not np.all(np.isfinite(dist)):
            row, col = np.argwhere(~np.isfinite(dist))[0]
            raise Unreachable(self.nodes[row], self._graph_ids[col])
        self._pred = pred
        self._sources = sources
        self.cost: np.ndarray = dist[:, sources]
        np.fill_diagonal(self.cost, 0.0)
        self._rows = self.cost.tolist()
        self._arc_time = {(a.tail, a.head): speeds.arc_time(a, network.depot) for a in network.arcs}

    def __call__(self, a: int, b: int) -> float:
        return self._rows[self.index[a]][self.index[b]]

    def as_lists(self) -> list[list[float]]:
        """Row-major copy of the matrix, indexed like :attr:`nodes`."""
        return [row[:] for row in self._rows]

    def path(self, a: int, b: int) -> list[int]:
        """Node sequence of a shortest path from ``a`` to ``b`` (both included)."""
        row = self.index[a]
        target = self._gpos[b]
        source = self._sources[row]
        seq = [target]
        while seq[-1] != source:
            seq.append(int(self._pred[row, seq[-1]]))
        return [self._graph_ids[p] for p in reversed(seq)]

    def path_arcs(self, a: int, b: int) -> list[tuple[int, int]]:
        seq = self.path(a, b)
        return list(zip(seq, seq[1:]))

    def arc_time(self, tail: int, head: int) -> float:
        return self._arc_time[(tail, head)]


def all_pairs_shortest(network: RoadNetwork, speeds: SpeedModel) -> TravelCostMatrix:
    return TravelCostMatrix(network, speeds)


def densify_stops(network: RoadNetwork, max_gap: float) -> RoadNetwork:
    """Split every road segment longer than ``max_gap`` into equal stretches.

    Both directions of a two-way segment share the splitting points, which become
    candidate stops with interpolated coordinates. Arcs touching the depot are
    access links and are left alone.
    """
    if not max_gap > 0:
        raise ValidationError("max_gap", "must be positive")
    segments: dict[tuple[int, int], list[Arc]] = {}
    for arc in network.arcs:
        segments.setdefault((min(arc.tail, arc.head), max(arc.tail, arc.head)), []).append(arc)

    next_id = max(network.node_ids) + 1
    nodes = list(network.nodes)
    arcs: list[Arc] = []
    new_stops: list[int] = []
    limit = max_gap * (1 + 1e-12)
    for (u, v), group in sorted(segments.items()):
        longest = max(a.length for a in group)
        if network.depot in (u, v) or longest <= limit:
            arcs.extend(group)
            continue
        pieces = math.ceil(longest / max_gap)
        (ux, uy), (vx, vy) = network.coords(u), network.coords(v)
        inner = []
        for step in range(1, pieces):
            t = step / pieces
            inner.append(Node(next_id, ux + t * (vx - ux), uy + t * (vy - uy)))
            next_id += 1
        nodes.extend(inner)
        new_stops.extend(n.id for n in inner)
        chain = [u] + [n.id for n in inner] + [v]
        for arc in group:
            seq = chain if arc.tail == u else chain[::-1]
            stretch = arc.length / pieces
            arcs.extend(Arc(a, b, stretch) for a, b in zip(seq, seq[1:]))
    if not new_stops:
        return network
    return network.replace(
        nodes=tuple(nodes),
        arcs=tuple(arcs),
        candidate_stops=tuple(network.candidate_stops) + tuple(new_stops),
    )


@dataclass(frozen=True)
class PreferenceList:
    """Ranked stops for one demand node; rank 0 is the most preferred.

    ``walk_distances`` is ``None`` for lists given explicitly rather than derived.
    """

    owner: int
    ranked_stops: tuple[int, ...]
    walk_distances: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "ranked_stops", tuple(self.ranked_stops))
        if self.walk_distances is not None:
            object.__setattr__(self, "walk_distances", tuple(self.walk_distances))
        if not self.ranked_stops:
            raise UncoverableDemandNode(self.owner)
        if len(set(self.ranked_stops)) != len(self.ranked_stops):
            raise ValidationError("prefs", f"duplicate stop in preference list of {self.owner}")
        if self.walk_distances is not None:
            if len(self.walk_distances) != len(self.ranked_stops):
                raise ValidationError("prefs", f"walk distances of {self.owner} do not match its stops")
            if any(b < a for a, b in zip(self.walk_distances, self.walk_distances[1:])):
                raise ValidationError("prefs", f"walk distances of {self.owner} are not sorted")

    def __iter__(self):
        return iter(self.ranked_stops)

    def __len__(self):
        return len(self.ranked_stops)

    def __contains__(self, stop):
        return stop in self.ranked_stops

    def rank(self, stop: int) -> int:
        return self.ranked_stops.index(stop)


def walking_distances(network: RoadNetwork, sources: Sequence[int], limit: float = np.inf) -> np.ndarray:
    """Undirected shortest-path distances (meters) from ``sources`` to every node."""
    lengths: dict[tuple[int, int], float] = {}
    for arc in network.arcs:
        key = (network.index_of(arc.tail), network.index_of(arc.head))
        key = (min(key), max(key))
        lengths[key] = min(lengths.get(key, np.inf), arc.length)
    n = len(network.nodes)
    rows = [k[0] for k in lengths]
    cols = [k[1] for k in lengths]
    graph = csr_matrix((list(lengths.values()), (rows, cols)), shape=(n, n))
    idx = [network.index_of(s) for s in sources]
    return dijkstra(graph, directed=False, indices=idx, limit=limit)


def build_preference_lists(network: RoadNetwork, gamma: float) -> tuple[RoadNetwork, list[PreferenceList]]:
    """Rank, for every demand node, the candidate stops within walking distance ``gamma``.

    Returns the network with unused candidate stops removed, and one list per
    demand node. Ties on distance are broken by ascending node id.
    """
    if gamma < 0:
        raise ValidationError("gamma", "must be non-negative")
    prefs: list[PreferenceList] = []
    if network.demand_nodes:
        dist = walking_distances(network, network.demand_nodes, limit=gamma + WALK_TOL)
    stops = network.candidate_stops
    stop_pos = [network.index_of(s) for s in stops]
    for row, owner in enumerate(network.demand_nodes):
        ranked = sorted(
            (float(dist[row, pos]), stop)
            for pos, stop in zip(stop_pos, stops)
            if dist[row, pos] <= gamma + WALK_TOL
        )
        if not ranked:
            raise UncoverableDemandNode(owner)
        prefs.append(PreferenceList(owner, tuple(s for _, s in ranked), tuple(d for d, _ in ranked)))
    return restrict_to_preferred(network, prefs), prefs


def restrict_to_preferred(network: RoadNetwork, prefs: Iterable[PreferenceList]) -> RoadNetwork:
    """Drop candidate stops that appear in no preference list."""
    used = set()
    for p in prefs:
        used.update(p.ranked_stops)
    kept = tuple(s for s in network.candidate_stops if s in used)
    if kept == network.candidate_stops:
        return network
    return network.replace(candidate_stops=kept)
