"""SWAP routing onto a coupling graph.

``greedy_path``
    Walk the circuit in order; when a two-qubit gate's operands are not
    adjacent, move the first operand along the lexicographically smallest
    shortest path until it is.
``sabre_lite``
    Reduced SABRE: front-layer scheduling, candidate SWAPs on edges that
    touch front-layer qubits, scored by the summed front-layer distance with
    a decay factor against ping-ponging. Forward/backward passes refine the
    initial layout before the final forward pass (``passes`` rounds). Ties are broken by a
    seeded generator over a sorted candidate list.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..circuit import Circuit, Gate, GateReport, gate_report
from ..topology import CouplingGraph, TopologyError
from .layout import Layout

HEURISTICS = ("greedy_path", "sabre_lite")
DECAY_STEP = 0.001
DECAY_RESET = 5


class RoutingError(RuntimeError):
    pass


@dataclass(frozen=True)
class RoutedCircuit:
    circuit: Circuit
    initial_layout: Layout
    final_layout: Layout
    swaps: int
    heuristic: str = ""

    @property
    def report(self) -> GateReport:
        return gate_report(self.circuit)

    def coupling_violations(self, graph: CouplingGraph) -> list[Gate]:
        return [g for g in self.circuit.gates if g.arity == 2 and g.kind != "id" and not graph.has_edge(*g.qubits)]


class _Mapping:
    def __init__(self, layout: Layout, graph: CouplingGraph):
        self.l2p = list(layout.physical)
        self.p2l: dict[int, int] = {p: l for l, p in enumerate(self.l2p)}

    def swap(self, a: int, b: int) -> None:
        la, lb = self.p2l.pop(a, None), self.p2l.pop(b, None)
        if la is not None:
            self.l2p[la] = b
            self.p2l[b] = la
        if lb is not None:
            self.l2p[lb] = a
            self.p2l[a] = lb

    def layout(self) -> Layout:
        return Layout(tuple(self.l2p))


def _check(circuit: Circuit, graph: CouplingGraph, layout: Layout) -> None:
    if len(layout) != circuit.qubit_count:
        raise RoutingError(f"layout has {len(layout)} entries for {circuit.qubit_count} qubits")
    layout.validate(graph)
    for g in circuit.gates:
        if g.arity == 2 and g.kind not in ("cx", "rzz", "id", "swap"):
            raise RoutingError(f"decompose before routing: found {g.kind}")
        if g.arity == 2 and graph.distance(layout[g.qubits[0]], layout[g.qubits[1]]) < 0:
            raise RoutingError(f"operands of {g} sit in disconnected graph regions")


def _split_terminal(circuit: Circuit) -> tuple[list[Gate], list[Gate]]:
    """Separate measurements that no later gate touches; they are emitted after routing."""
    touched: set[int] = set()
    body: list[Gate] = []
    tail: list[Gate] = []
    for g in reversed(circuit.gates):
        if g.kind == "measure" and g.qubits[0] not in touched:
            tail.append(g)
        else:
            body.append(g)
        touched.update(g.qubits)
    return body[::-1], tail[::-1]


def _greedy(gates: list[Gate], graph: CouplingGraph, layout: Layout, absorb: bool) -> tuple[list[Gate], Layout, int]:
    m = _Mapping(layout, graph)
    out: list[Gate] = []
    swaps = 0
    for g in gates:
        if g.kind == "swap" and absorb:
            m.swap(m.l2p[g.qubits[0]], m.l2p[g.qubits[1]])
            continue
        if g.arity == 2:
            pa, pb = m.l2p[g.qubits[0]], m.l2p[g.qubits[1]]
            if not graph.has_edge(pa, pb):
                try:
                    path = graph.shortest_path(pa, pb)
                except TopologyError as exc:
                    raise RoutingError(str(exc)) from exc
                for u, v in zip(path[:-2], path[1:-1]):
                    out.append(Gate("swap", (u, v)))
                    m.swap(u, v)
                    swaps += 1
        out.append(g.remap(m.l2p))
    return out, m.layout(), swaps


def _sabre_pass(
    gates: list[Gate], graph: CouplingGraph, layout: Layout, rng: np.random.Generator, emit: bool, absorb: bool
) -> tuple[list[Gate], Layout, int]:
    dist = graph.distances
    # wire-order dependencies
    preds = [0] * len(gates)
    succs: list[list[int]] = [[] for _ in gates]
    last: dict[int, int] = {}
    for i, g in enumerate(gates):
        deps = {last[q] for q in g.qubits if q in last}
        preds[i] = len(deps)
        for d in deps:
            succs[d].append(i)
        for q in g.qubits:
            last[q] = i
    front = [i for i in range(len(gates)) if preds[i] == 0]
    m = _Mapping(layout, graph)
    decay = np.ones(graph.node_count)
    out: list[Gate] = []
    swaps = 0
    since_progress = 0
    since_reset = 0
    valve = 10 + 2 * graph.node_count

    def executable(i: int) -> bool:
        g = gates[i]
        if g.arity == 1 or (absorb and g.kind == "swap"):
            return True
        return graph.has_edge(m.l2p[g.qubits[0]], m.l2p[g.qubits[1]])

    def retire(i: int) -> None:
        for s in succs[i]:
            preds[s] -= 1
            if preds[s] == 0:
                front.append(s)

    def do_swap(a: int, b: int) -> None:
        nonlocal swaps
        if emit:
            out.append(Gate("swap", (a, b)))
        m.swap(a, b)
        swaps += 1

    while front:
        ready = sorted(i for i in front if executable(i))
        if ready:
            for i in ready:
                front.remove(i)
                g = gates[i]
                if absorb and g.kind == "swap":
                    m.swap(m.l2p[g.qubits[0]], m.l2p[g.qubits[1]])
                elif emit:
                    out.append(g.remap(m.l2p))
                retire(i)
            since_progress = 0
            decay[:] = 1
            continue
        pending = sorted(front)
        if since_progress >= valve:
            # release valve: route the oldest blocked gate along a shortest path
            g = gates[pending[0]]
            path = graph.shortest_path(m.l2p[g.qubits[0]], m.l2p[g.qubits[1]])
            for u, v in zip(path[:-2], path[1:-1]):
                do_swap(u, v)
            since_progress = 0
            continue
        touched = sorted({m.l2p[q] for i in pending for q in gates[i].qubits})
        candidates = sorted({(min(p, v), max(p, v)) for p in touched for v in graph.neighbors[p]})
        best, best_score = [], np.inf
        for a, b in candidates:
            m.swap(a, b)
            total = sum(dist[m.l2p[gates[i].qubits[0]]][m.l2p[gates[i].qubits[1]]] for i in pending)
            m.swap(a, b)
            score = max(decay[a], decay[b]) * total / len(pending)
            if score < best_score - 1e-12:
                best, best_score = [(a, b)], score
            elif abs(score - best_score) <= 1e-12:
                best.append((a, b))
        a, b = best[int(rng.integers(len(best)))] if len(best) > 1 else best[0]
        do_swap(a, b)
        decay[a] += DECAY_STEP
        decay[b] += DECAY_STEP
        since_progress += 1
        since_reset += 1
        if since_reset >= DECAY_RESET:
            decay[:] = 1
            since_reset = 0
    return out, m.layout(), swaps


def _sabre(
    gates: list[Gate], graph: CouplingGraph, layout: Layout, seed: int, passes: int, absorb: bool
) -> tuple[list[Gate], Layout, Layout, int]:
    rng = np.random.default_rng(seed)
    two_q = [g for g in gates if g.arity == 2]
    current = layout
    # each refinement round routes forward, then backward from the final mapping
    for _ in range(passes):
        _, current, _ = _sabre_pass(two_q, graph, current, rng, False, absorb)
        _, current, _ = _sabre_pass(two_q[::-1], graph, current, rng, False, absorb)
    out, final, swaps = _sabre_pass(gates, graph, current, rng, True, absorb)
    return out, current, final, swaps


def route(
    circuit: Circuit,
    graph: CouplingGraph,
    layout: Layout,
    heuristic: str = "sabre_lite",
    seed: int = 0,
    passes: int = 3,
    absorb_swaps: bool = False,
) -> RoutedCircuit:
    """Insert SWAPs so that every two-qubit gate acts on a coupling edge.

    The returned circuit keeps SWAP gates explicit; ``transpile`` rewrites
    them into the basis afterwards. With ``absorb_swaps`` the circuit's own
    SWAP gates become relabelings of the mapping and emit no gates. Terminal
    measurements are deferred to the end, read from the final layout. With
    ``sabre_lite`` and ``passes > 0`` the initial layout is refined, so the
    returned ``initial_layout`` may differ from ``layout``.
    """
    if heuristic not in HEURISTICS:
        raise RoutingError(f"unknown heuristic {heuristic!r}; choose from {HEURISTICS}")
    _check(circuit, graph, layout)
    body, tail = _split_terminal(circuit)
    if heuristic == "greedy_path":
        initial = layout
        out, final, swaps = _greedy(body, graph, layout, absorb_swaps)
    else:
        out, initial, final, swaps = _sabre(body, graph, layout, seed, passes, absorb_swaps)
    out += [g.remap(final.physical) for g in tail]
    return RoutedCircuit(Circuit(graph.node_count, out, circuit.classical_slots), initial, final, swaps, heuristic)
