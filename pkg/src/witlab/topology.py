"""Device coupling graphs.

Topology files are JSON documents of the form::

    {
      "version": 1,
      "nodes": 27,
      "edges": [[0, 1], [1, 2], ...],
      "edge_error": {"0-1": 0.012, ...},
      "node_error": {"3": 0.002, ...}
    }

``edge_error`` and ``node_error`` are optional. Edge keys may be written in
either node order. Built-in graphs ship with the package under
``witlab/transpiler/data`` and are addressed by name.
"""

from __future__ import annotations

import json
import re
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path

BUILTIN = ("heavy-hex-27", "square-15", "line-10", "all-to-all-10")


class TopologyError(ValueError):
    """Malformed topology file or graph."""


def _edge(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class CouplingGraph:
    node_count: int
    edges: frozenset[tuple[int, int]]
    edge_error: dict[tuple[int, int], float] = field(default_factory=dict)
    node_error: dict[int, float] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        edges = frozenset(_edge(int(a), int(b)) for a, b in self.edges)
        for a, b in edges:
            if a == b:
                raise TopologyError(f"self-loop on node {a}")
            if not (0 <= a < self.node_count and 0 <= b < self.node_count):
                raise TopologyError(f"edge ({a}, {b}) references a node outside 0..{self.node_count - 1}")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "edge_error", {_edge(*e): float(r) for e, r in self.edge_error.items()})
        for e, r in self.edge_error.items():
            if e not in edges:
                raise TopologyError(f"edge_error given for missing edge {e}")
            if not 0 <= r <= 1:
                raise TopologyError(f"edge_error {r} for {e} outside [0, 1]")
        for q, r in self.node_error.items():
            if not 0 <= q < self.node_count:
                raise TopologyError(f"node_error given for missing node {q}")
            if not 0 <= r <= 1:
                raise TopologyError(f"node_error {r} for node {q} outside [0, 1]")

    def __hash__(self):
        return hash((self.node_count, self.edges, self.name))

    @classmethod
    def all_to_all(cls, n: int) -> CouplingGraph:
        return cls(n, frozenset((a, b) for a in range(n) for b in range(a + 1, n)), name=f"all-to-all-{n}")

    @classmethod
    def line(cls, n: int) -> CouplingGraph:
        return cls(n, frozenset((a, a + 1) for a in range(n - 1)), name=f"line-{n}")

    @cached_property
    def neighbors(self) -> tuple[tuple[int, ...], ...]:
        adj: list[list[int]] = [[] for _ in range(self.node_count)]
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        return tuple(tuple(sorted(x)) for x in adj)

    def degree(self, node: int) -> int:
        return len(self.neighbors[node])

    def has_edge(self, a: int, b: int) -> bool:
        return _edge(a, b) in self.edges

    def error(self, a: int, b: int) -> float:
        return self.edge_error.get(_edge(a, b), 0.0)

    @cached_property
    def distances(self) -> tuple[tuple[int, ...], ...]:
        """All-pairs hop distances (-1 for unreachable)."""
        rows = []
        for src in range(self.node_count):
            dist = [-1] * self.node_count
            dist[src] = 0
            queue = deque([src])
            while queue:
                u = queue.popleft()
                for v in self.neighbors[u]:
                    if dist[v] < 0:
                        dist[v] = dist[u] + 1
                        queue.append(v)
            rows.append(tuple(dist))
        return tuple(rows)

    def distance(self, a: int, b: int) -> int:
        return self.distances[a][b]

    def shortest_path(self, a: int, b: int) -> list[int]:
        """Lexicographically smallest shortest path from ``a`` to ``b``."""
        d = self.distances[b]
        if d[a] < 0:
            raise TopologyError(f"nodes {a} and {b} are disconnected")
        path = [a]
        while path[-1] != b:
            u = path[-1]
            path.append(min(v for v in self.neighbors[u] if d[v] == d[u] - 1))
        return path

    def is_connected(self, nodes=None) -> bool:
        nodes = set(range(self.node_count) if nodes is None else nodes)
        if not nodes:
            return True
        start = min(nodes)
        seen = {start}
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in self.neighbors[u]:
                if v in nodes and v not in seen:
                    seen.add(v)
                    queue.append(v)
        return seen == nodes

    def with_errors(self, edge_error=None, node_error=None) -> CouplingGraph:
        return CouplingGraph(
            self.node_count,
            self.edges,
            dict(self.edge_error if edge_error is None else edge_error),
            dict(self.node_error if node_error is None else node_error),
            self.name,
        )

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "name": self.name,
            "nodes": self.node_count,
            "edges": [list(e) for e in sorted(self.edges)],
            "edge_error": {f"{a}-{b}": r for (a, b), r in sorted(self.edge_error.items())},
            "node_error": {str(q): r for q, r in sorted(self.node_error.items())},
        }


def _line_of(text: str, pattern: str) -> int | None:
    m = re.search(pattern, text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _schema_error(text: str, message: str, pattern: str | None = None) -> TopologyError:
    line = _line_of(text, pattern) if pattern else None
    where = f"line {line}: " if line else ""
    return TopologyError(f"{where}{message}")


def parse_topology(text: str, name: str = "") -> CouplingGraph:
    """Parse a topology document, reporting the offending line where possible."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TopologyError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise TopologyError("line 1: top level must be a JSON object")
    if "nodes" not in doc or "edges" not in doc:
        raise TopologyError("line 1: topology needs 'nodes' and 'edges'")
    nodes = doc["nodes"]
    if isinstance(nodes, list):
        nodes = len(nodes)
    if not isinstance(nodes, int) or nodes < 1:
        raise _schema_error(text, f"'nodes' must be a positive integer, got {doc['nodes']!r}", r'"nodes"')
    edges = []
    for e in doc["edges"]:
        if not (isinstance(e, list) and len(e) == 2 and all(isinstance(v, int) for v in e)):
            raise _schema_error(text, f"edge {e!r} must be a pair of integers", r'"edges"')
        a, b = e
        if a == b or not (0 <= a < nodes and 0 <= b < nodes):
            raise _schema_error(
                text, f"invalid edge {e!r} for {nodes} nodes", rf"\[\s*{a}\s*,\s*{b}\s*\]"
            )
        edges.append((a, b))
    edge_error = {}
    for key, rate in (doc.get("edge_error") or {}).items():
        try:
            a, b = (int(v) for v in key.split("-"))
        except ValueError:
            raise _schema_error(text, f"edge_error key {key!r} is not 'a-b'", re.escape(f'"{key}"')) from None
        if _edge(a, b) not in {_edge(*e) for e in edges}:
            raise _schema_error(text, f"edge_error key {key!r} names a missing edge", re.escape(f'"{key}"'))
        edge_error[(a, b)] = float(rate)
    node_error = {}
    for key, rate in (doc.get("node_error") or {}).items():
        try:
            node_error[int(key)] = float(rate)
        except ValueError:
            raise _schema_error(text, f"node_error key {key!r} is not a node", re.escape(f'"{key}"')) from None
    try:
        return CouplingGraph(nodes, frozenset(edges), edge_error, node_error, doc.get("name", name))
    except TopologyError as exc:
        raise _schema_error(text, str(exc)) from exc


def load_topology(name_or_path: str | Path) -> CouplingGraph:
    """Load a built-in topology by name, or a JSON file by path."""
    key = str(name_or_path)
    if key in BUILTIN:
        text = resources.files("witlab.transpiler").joinpath("data", f"{key}.json").read_text()
        return parse_topology(text, key)
    path = Path(key)
    if not path.exists():
        raise TopologyError(f"unknown topology {key!r} (built-ins: {', '.join(BUILTIN)})")
    return parse_topology(path.read_text(), path.stem)


def save_topology(graph: CouplingGraph, path: str | Path) -> None:
    Path(path).write_text(json.dumps(graph.to_dict(), indent=1) + "\n")
