"""Directed graphs, union graphs and stochastic topology schedules."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidInput


@dataclass(frozen=True)
class DirectedGraph:
    """A directed graph on nodes ``0..node_count-1``.

    ``edges`` keeps declaration order; the order matters because the
    simulator maps physical channels onto edge slots by position.
    """

    node_count: int
    edges: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if self.node_count < 1:
            raise InvalidInput("node_count must be positive")
        edges = tuple((int(i), int(j)) for i, j in self.edges)
        seen = set()
        for i, j in edges:
            if not (0 <= i < self.node_count and 0 <= j < self.node_count):
                raise InvalidInput(f"edge ({i}, {j}) out of range")
            if i == j:
                raise InvalidInput(f"self-loop at node {i}")
            if (i, j) in seen:
                raise InvalidInput(f"duplicate edge ({i}, {j})")
            seen.add((i, j))
        object.__setattr__(self, "edges", edges)

    @property
    def edge_set(self) -> frozenset:
        return frozenset(self.edges)

    def out_neighbors(self, node: int) -> list[int]:
        return [j for i, j in self.edges if i == node]

    def successors(self) -> list[list[int]]:
        succ = [[] for _ in range(self.node_count)]
        for i, j in self.edges:
            succ[i].append(j)
        return succ

    @classmethod
    def from_adjacency(cls, node_count: int, adjacency: dict) -> "DirectedGraph":
        edges = []
        for src in sorted(adjacency, key=int):
            for dst in adjacency[src]:
                edges.append((int(src), int(dst)))
        return cls(node_count, tuple(edges))

    def to_adjacency(self) -> dict[int, list[int]]:
        adj: dict[int, list[int]] = {}
        for i, j in self.edges:
            adj.setdefault(i, []).append(j)
        return adj


def union_graph(graphs: Sequence[DirectedGraph]) -> DirectedGraph:
    """Graph on the shared node set whose edges are the union of all edge sets.

    Edges are emitted in first-seen order, so the result is deterministic.
    """
    if not graphs:
        raise InvalidInput("union of an empty list of graphs")
    n = graphs[0].node_count
    if any(g.node_count != n for g in graphs):
        raise InvalidInput("graphs do not share node_count")
    edges: dict[tuple[int, int], None] = {}
    for g in graphs:
        for e in g.edges:
            edges.setdefault(e, None)
    return DirectedGraph(n, tuple(edges))


def _reachable(succ: list[list[int]], start: int) -> list[bool]:
    seen = [False] * len(succ)
    seen[start] = True
    stack = [start]
    while stack:
        u = stack.pop()
        for v in succ[u]:
            if not seen[v]:
                seen[v] = True
                stack.append(v)
    return seen


def is_strongly_connected(g: DirectedGraph) -> bool:
    """Forward and reverse reachability sweeps from node 0."""
    if g.node_count == 1:
        return True
    succ = g.successors()
    if not all(_reachable(succ, 0)):
        return False
    pred = [[] for _ in range(g.node_count)]
    for i, j in g.edges:
        pred[j].append(i)
    return all(_reachable(pred, 0))


@dataclass(frozen=True)
class TopologySchedule:
    """Finite family of graphs with an i.i.d. categorical draw per slot."""

    graphs: tuple[DirectedGraph, ...]
    selection: tuple[float, ...] | None = None
    epsilon_floor: float = 0.0

    def __post_init__(self):
        graphs = tuple(self.graphs)
        if not graphs:
            raise InvalidInput("schedule needs at least one graph")
        n = graphs[0].node_count
        if any(g.node_count != n for g in graphs):
            raise InvalidInput("graphs do not share node_count")
        if self.selection is None:
            sel = tuple([1.0 / len(graphs)] * len(graphs))
        else:
            sel = tuple(float(p) for p in self.selection)
        if len(sel) != len(graphs):
            raise InvalidInput("selection length does not match graph count")
        if any(p < 0 for p in sel) or abs(sum(sel) - 1.0) > 1e-12:
            raise InvalidInput("selection probabilities must be >= 0 and sum to 1")
        if not 0.0 <= self.epsilon_floor < 1.0:
            raise InvalidInput("epsilon_floor must lie in [0, 1)")
        object.__setattr__(self, "graphs", graphs)
        object.__setattr__(self, "selection", sel)

    @property
    def node_count(self) -> int:
        return self.graphs[0].node_count

    def union(self) -> DirectedGraph:
        return union_graph(self.graphs)


@dataclass
class ConnectivityReport:
    connected: bool
    min_graph_probability: float
    epsilon_floor: float
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = self.connected and self.min_graph_probability > self.epsilon_floor


def check_stochastic_strong_connectivity(schedule: TopologySchedule) -> ConnectivityReport:
    connected = is_strongly_connected(schedule.union())
    return ConnectivityReport(connected, min(schedule.selection), schedule.epsilon_floor)


def sample_topology(schedule: TopologySchedule, rng: np.random.Generator) -> DirectedGraph:
    return schedule.graphs[sample_topology_index(schedule, rng)]


def sample_topology_index(schedule: TopologySchedule, rng: np.random.Generator) -> int:
    if len(schedule.graphs) == 1:
        # still consume one draw so streams stay aligned with multi-graph schedules
        rng.random()
        return 0
    return _categorical(schedule.selection, rng.random())


def sample_topology_indices(schedule: TopologySchedule, count: int,
                            rng: np.random.Generator) -> np.ndarray:
    """Vectorised form of :func:`sample_topology_index`; same stream usage."""
    u = rng.random(count)
    if len(schedule.graphs) == 1:
        return np.zeros(count, dtype=np.int64)
    cdf = np.cumsum(schedule.selection)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, u, side="right").astype(np.int64)


def _categorical(probs: Sequence[float], u: float) -> int:
    acc = 0.0
    for k, p in enumerate(probs):
        acc += p
        if u < acc:
            return k
    return len(probs) - 1


def directed_cycle(nodes: Iterable[int], node_count: int) -> DirectedGraph:
    nodes = list(nodes)
    edges = [(nodes[k], nodes[(k + 1) % len(nodes)]) for k in range(len(nodes))]
    return DirectedGraph(node_count, tuple(edges))


def experiment_cycle_topologies(node_count: int = 16) -> list[DirectedGraph]:
    """Four edge-disjoint directed cycles of ``node_count // 2`` nodes each.

    Cycles run over the lower half, the upper half, the even nodes and the
    odd nodes. Each has ``node_count // 2`` edges, one per physical channel,
    and the union is strongly connected.
    """
    if node_count < 4 or node_count % 4:
        raise InvalidInput("node_count must be a positive multiple of 4")
    half = node_count // 2
    return [
        directed_cycle(range(half), node_count),
        directed_cycle(range(half, node_count), node_count),
        directed_cycle(range(0, node_count, 2), node_count),
        directed_cycle(range(1, node_count, 2), node_count),
    ]


def doubled_walk(g: DirectedGraph) -> list[tuple[int, int]]:
    """Closed walk on a strongly connected graph that visits every node at
    least twice, built by chaining shortest paths 0 -> 1 -> ... -> n-1 -> 0
    and repeating the tour once."""
    if not is_strongly_connected(g):
        raise InvalidInput("graph is not strongly connected")
    succ = g.successors()
    tour: list[tuple[int, int]] = []
    order = list(range(g.node_count)) + [0]
    for a, b in zip(order, order[1:]):
        tour.extend(_shortest_path(succ, a, b))
    return tour + tour


def _shortest_path(succ, a, b):
    if a == b:
        return []
    prev = {a: None}
    frontier = [a]
    while frontier and b not in prev:
        nxt = []
        for u in frontier:
            for v in succ[u]:
                if v not in prev:
                    prev[v] = u
                    nxt.append(v)
        frontier = nxt
    path = []
    v = b
    while prev[v] is not None:
        path.append((prev[v], v))
        v = prev[v]
    return path[::-1]
