"""Dense equivalence check between a logical circuit and its routed version."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..circuit import Circuit, Gate, active_qubits
from ..statevector import apply_gate, circuit_unitary, exact_distribution
from .routing import RoutedCircuit

log = logging.getLogger(__name__)

MAX_VERIFY_QUBITS = 12


@dataclass(frozen=True)
class EquivalenceResult:
    status: str  # "equivalent", "different" or "skipped"
    max_error: float = 0.0
    detail: str = ""

    def __bool__(self) -> bool:
        return self.status == "equivalent"


def _split_terminal_measurements(circuit: Circuit) -> tuple[list[Gate], list[Gate]] | None:
    """(unitary body, trailing measurements) or None if non-unitary gates occur mid-circuit."""
    gates = list(circuit.gates)
    tail: list[Gate] = []
    while gates and gates[-1].kind == "measure":
        tail.insert(0, gates.pop())
    if any(not g.is_unitary for g in gates):
        return None
    return gates, tail


def _embed_index(k: int, n: int, positions: list[int], width: int) -> int:
    out = 0
    for i in range(n):
        if (k >> (n - 1 - i)) & 1:
            out |= 1 << (width - 1 - positions[i])
    return out


def verify_equivalence(original: Circuit, routed: RoutedCircuit, tol: float = 1e-7) -> EquivalenceResult:
    """Compare ``routed`` against ``original`` through the initial and final layouts.

    Unitary circuits (measurements allowed only at the end) are compared as
    dense matrices up to a single global phase, and the measured slots must
    read the final positions of the measured logical qubits. Circuits with
    mid-circuit RESET/MEASURE are compared by their exact output
    distributions.
    """
    n = original.qubit_count
    init, final = routed.initial_layout, routed.final_layout
    nodes = sorted(set(active_qubits(routed.circuit)) | set(init.physical) | set(final.physical))
    if len(nodes) > MAX_VERIFY_QUBITS:
        msg = f"{len(nodes)} active nodes exceed the dense verification limit of {MAX_VERIFY_QUBITS}"
        log.warning(msg)
        return EquivalenceResult("skipped", detail=msg)
    index = {p: i for i, p in enumerate(nodes)}
    width = len(nodes)
    small = Circuit(width, [g.remap(index) for g in routed.circuit.gates], routed.circuit.classical_slots)

    orig_parts = _split_terminal_measurements(original)
    routed_parts = _split_terminal_measurements(small)
    if orig_parts is None or routed_parts is None:
        d0 = exact_distribution(original)
        d1 = exact_distribution(small)
        keys = set(d0) | set(d1)
        err = max(abs(d0.get(k, 0.0) - d1.get(k, 0.0)) for k in keys)
        status = "equivalent" if err < tol else "different"
        return EquivalenceResult(status, err, "compared exact output distributions")

    body, tail = orig_parts
    r_body, r_tail = routed_parts
    U = circuit_unitary(Circuit(n, body))
    pin = [index[p] for p in init.physical]
    pout = [index[p] for p in final.physical]
    states = np.zeros((2**n, 2**width), dtype=complex)
    for j in range(2**n):
        states[j, _embed_index(j, n, pin, width)] = 1
    for g in r_body:
        states = apply_gate(states, g, width)
    expected = np.zeros_like(states)
    cols = [_embed_index(k, n, pout, width) for k in range(2**n)]
    expected[:, cols] = U.T
    flat_idx = np.unravel_index(np.argmax(np.abs(expected)), expected.shape)
    phase = states[flat_idx] / expected[flat_idx]
    if abs(abs(phase) - 1) > tol:
        return EquivalenceResult("different", float(abs(abs(phase) - 1)), "global phase is not unimodular")
    err = float(np.max(np.abs(states - phase * expected)))
    if err >= tol:
        return EquivalenceResult("different", err, "unitaries differ")
    want = sorted((g.slot, index[final[g.qubits[0]]]) for g in tail)
    have = sorted((g.slot, g.qubits[0]) for g in r_tail)
    if want != have:
        return EquivalenceResult("different", err, f"measurement wiring differs: expected {want}, got {have}")
    return EquivalenceResult("equivalent", err, "dense unitary match up to global phase")
