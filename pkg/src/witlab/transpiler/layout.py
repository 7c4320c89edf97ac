"""Initial placement of logical qubits on physical nodes."""

from __future__ import annotations

import heapq
import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..circuit import Circuit
from ..topology import CouplingGraph

STRATEGIES = ("trivial", "degree_greedy", "noise_aware")
# small per-hop cost so that noise-aware placement still prefers adjacency
HOP_COST = 1e-3


class LayoutError(ValueError):
    pass


@dataclass(frozen=True)
class Layout:
    """Injective map logical qubit -> physical node (``physical[i]`` hosts logical i)."""

    physical: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "physical", tuple(int(p) for p in self.physical))
        if len(set(self.physical)) != len(self.physical):
            raise LayoutError(f"layout is not injective: {self.physical}")

    def __getitem__(self, logical: int) -> int:
        return self.physical[logical]

    def __len__(self) -> int:
        return len(self.physical)

    def inverse(self) -> dict[int, int]:
        return {p: i for i, p in enumerate(self.physical)}

    def validate(self, graph: CouplingGraph) -> None:
        bad = [p for p in self.physical if not 0 <= p < graph.node_count]
        if bad:
            raise LayoutError(f"layout uses nodes {bad} outside the graph")

    def to_text(self) -> str:
        return "{" + ", ".join(f"q[{i}]:n[{p}]" for i, p in enumerate(self.physical)) + "}"


def interaction_counts(circuit: Circuit) -> Counter:
    """Number of two-qubit gates per unordered logical pair."""
    counts: Counter = Counter()
    for g in circuit.gates:
        if g.arity == 2 and g.kind != "id":
            a, b = sorted(g.qubits)
            counts[(a, b)] += 1
    return counts


def _weighted_distances(graph: CouplingGraph) -> np.ndarray:
    """All-pairs path cost with edge weight HOP_COST - log(1 - error)."""
    n = graph.node_count
    out = np.full((n, n), math.inf)
    for src in range(n):
        dist = out[src]
        dist[src] = 0.0
        heap = [(0.0, src)]
        while heap:
            d, u = heapq.heappop(heap)
            if d > dist[u]:
                continue
            for v in graph.neighbors[u]:
                e = min(graph.error(u, v), 1 - 1e-12)
                nd = d + HOP_COST - math.log1p(-e)
                if nd < dist[v] - 1e-15:
                    dist[v] = nd
                    heapq.heappush(heap, (nd, v))
    return out


def _placement_order(n: int, weights: Counter) -> list[int]:
    """BFS over the interaction graph from the busiest qubit, heaviest links first."""
    adj: dict[int, dict[int, int]] = {q: {} for q in range(n)}
    for (a, b), w in weights.items():
        adj[a][b] = w
        adj[b][a] = w
    busy = {q: sum(adj[q].values()) for q in range(n)}
    order: list[int] = []
    seen: set[int] = set()
    while len(order) < n:
        start = min((q for q in range(n) if q not in seen), key=lambda q: (-busy[q], q))
        queue = [start]
        seen.add(start)
        while queue:
            q = queue.pop(0)
            order.append(q)
            for nb in sorted(adj[q], key=lambda v: (-adj[q][v], -busy[v], v)):
                if nb not in seen:
                    seen.add(nb)
                    queue.append(nb)
    return order


def layout_init(
    circuit: Circuit, graph: CouplingGraph, strategy: str = "degree_greedy"
) -> Layout:
    """Initial layout by the named strategy."""
    n = circuit.qubit_count
    if graph.node_count < n:
        raise LayoutError(f"{n} logical qubits do not fit on {graph.node_count} nodes")
    if strategy not in STRATEGIES:
        raise LayoutError(f"unknown layout strategy {strategy!r}; choose from {STRATEGIES}")
    if strategy == "trivial":
        return Layout(tuple(range(n)))
    weights = interaction_counts(circuit)
    noisy = strategy == "noise_aware"
    if noisy:
        cost = _weighted_distances(graph)
    else:
        cost = np.array(graph.distances, dtype=float)
        cost[cost < 0] = math.inf

    def node_quality(p: int) -> tuple:
        if noisy:
            incident = [-math.log1p(-min(graph.error(p, v), 1 - 1e-12)) for v in graph.neighbors[p]]
            mean_err = sum(incident) / len(incident) if incident else math.inf
            return (-graph.degree(p), mean_err + graph.node_error.get(p, 0.0), p)
        return (-graph.degree(p), p)

    partners: dict[int, dict[int, int]] = {q: {} for q in range(n)}
    for (a, b), w in weights.items():
        partners[a][b] = w
        partners[b][a] = w
    placed: dict[int, int] = {}
    used: set[int] = set()
    for q in _placement_order(n, weights):
        free = [p for p in range(graph.node_count) if p not in used]
        anchors = [(placed[o], w) for o, w in partners[q].items() if o in placed]
        if not anchors:
            target = min(free, key=node_quality)
        else:

            def score(p: int) -> tuple:
                total = sum(w * cost[p][a] for a, w in anchors)
                return (total, node_quality(p))

            target = min(free, key=score)
        placed[q] = target
        used.add(target)
    return Layout(tuple(placed[q] for q in range(n)))


def random_layouts(n: int, graph: CouplingGraph, count: int, seed: int = 0) -> list[Layout]:
    """``count`` seeded random layouts whose images are connected subgraphs."""
    if graph.node_count < n:
        raise LayoutError(f"{n} logical qubits do not fit on {graph.node_count} nodes")
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        start = int(rng.integers(graph.node_count))
        nodes = [start]
        frontier = set(graph.neighbors[start])
        while len(nodes) < n:
            options = sorted(frontier - set(nodes))
            if not options:
                options = sorted(set(range(graph.node_count)) - set(nodes))
            pick = int(options[int(rng.integers(len(options)))])
            nodes.append(pick)
            frontier |= set(graph.neighbors[pick])
        perm = rng.permutation(n)
        out.append(Layout(tuple(nodes[int(i)] for i in perm)))
    return out


def image_is_connected(layout: Layout, circuit: Circuit, graph: CouplingGraph, qubits: Sequence[int] | None = None) -> bool:
    """Whether the physical image of ``qubits`` (default: all) forms a connected subgraph."""
    qubits = range(len(layout)) if qubits is None else qubits
    return graph.is_connected({layout[q] for q in qubits})
