"""Basis-gate sets, decomposition and adjacent-gate peephole cleanup."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..circuit import Circuit, CircuitError, Gate, cx, rx, ry, rz, rzz, sx, x
from ..statevector import gate_matrix

HALF_PI = math.pi / 2
AUX_KINDS = frozenset({"measure", "reset", "id"})


class DecompositionError(CircuitError):
    pass


@dataclass(frozen=True)
class BasisGateSet:
    name: str
    kinds: frozenset[str]

    def __post_init__(self):
        object.__setattr__(self, "kinds", frozenset(self.kinds))
        if not self.kinds:
            raise ValueError("basis must not be empty")
        if not self.kinds & {"cx", "rzz"}:
            raise ValueError(f"basis {self.name} has no entangling gate")

    def allows(self, gate: Gate) -> bool:
        return gate.kind in self.kinds or gate.kind in AUX_KINDS

    @property
    def entangler(self) -> str:
        return "cx" if "cx" in self.kinds else "rzz"


SUPERCONDUCTING = BasisGateSet("superconducting", frozenset({"rz", "sx", "x", "cx"}))
TRAPPED_ION = BasisGateSet("trapped-ion", frozenset({"rx", "ry", "rz", "rzz"}))
BASES = {b.name: b for b in (SUPERCONDUCTING, TRAPPED_ION)}


def get_basis(name: str | BasisGateSet) -> BasisGateSet:
    if isinstance(name, BasisGateSet):
        return name
    try:
        return BASES[name]
    except KeyError:
        raise ValueError(f"unknown basis {name!r}; choose from {sorted(BASES)}") from None


def _near(a: float, b: float, tol: float = 1e-10) -> bool:
    return abs(math.remainder(a - b, 2 * math.pi)) < tol


def zyz_angles(u: np.ndarray) -> tuple[float, float, float]:
    """(phi, theta, lam) with u = e^{i a} RZ(phi) RY(theta) RZ(lam)."""
    det = np.linalg.det(u)
    v = u / np.sqrt(det)
    theta = 2 * math.atan2(abs(v[1, 0]), abs(v[0, 0]))
    plus = 2 * np.angle(v[1, 1]) if abs(v[1, 1]) > 1e-12 else 0.0
    minus = 2 * np.angle(v[1, 0]) if abs(v[1, 0]) > 1e-12 else 0.0
    if abs(v[1, 0]) <= 1e-12:
        minus = 0.0
    if abs(v[1, 1]) <= 1e-12:
        plus = 0.0
    phi = (plus + minus) / 2
    lam = (plus - minus) / 2
    return float(phi), float(theta), float(lam)


def _euler_rotations(q: int, u: np.ndarray, basis: BasisGateSet) -> list[Gate]:
    phi, theta, lam = zyz_angles(u)
    if "ry" in basis.kinds:
        seq = [rz(lam, q), ry(theta, q), rz(phi, q)]
        return [g for g in seq if not _near(g.theta, 0)]
    # RZ(phi) RY(theta) RZ(lam) ~ RZ(phi + pi) SX RZ(theta + pi) SX RZ(lam)
    if _near(theta, 0):
        return [g for g in [rz(phi + lam, q)] if not _near(g.theta, 0)]
    seq = [rz(lam, q), sx(q), rz(theta + math.pi, q), sx(q), rz(phi + math.pi, q)]
    return [g for g in seq if g.kind != "rz" or not _near(g.theta, 0)]


def _one_qubit(gate: Gate, basis: BasisGateSet) -> list[Gate]:
    q = gate.qubits[0]
    if basis is SUPERCONDUCTING or "sx" in basis.kinds:
        if gate.kind == "h":
            return [rz(HALF_PI, q), sx(q), rz(HALF_PI, q)]
        if gate.kind == "z":
            return [rz(math.pi, q)]
        if gate.kind == "rx" and _near(gate.theta, HALF_PI):
            return [sx(q)]
        if gate.kind == "rx" and _near(gate.theta, -HALF_PI):
            return [rz(math.pi, q), sx(q), rz(math.pi, q)]
        if gate.kind == "rx" and _near(gate.theta, math.pi):
            return [x(q)]
        if gate.kind == "y":
            return [rz(math.pi, q), x(q)]
    else:
        if gate.kind in ("x", "y", "z"):
            return [Gate({"x": "rx", "y": "ry", "z": "rz"}[gate.kind], (q,), math.pi)]
        if gate.kind == "sx":
            return [rx(HALF_PI, q)]
        if gate.kind == "h":
            return [rz(math.pi, q), ry(HALF_PI, q)]
    return _euler_rotations(q, gate_matrix(gate), basis)


def _two_qubit(gate: Gate, basis: BasisGateSet) -> list[Gate]:
    a, b = gate.qubits
    if gate.kind == "swap":
        return [cx(a, b), cx(b, a), cx(a, b)]
    if gate.kind == "rzz" and "cx" in basis.kinds:
        return [cx(a, b), rz(gate.theta, b), cx(a, b)]
    if gate.kind == "cx" and "rzz" in basis.kinds:
        # CX = (I H) CZ (I H), CZ ~ RZ(pi/2) RZ(pi/2) RZZ(-pi/2)
        h_b = [rz(math.pi, b), ry(HALF_PI, b)]
        return h_b + [rzz(-HALF_PI, a, b), rz(HALF_PI, a), rz(HALF_PI, b)] + [ry(-HALF_PI, b), rz(math.pi, b)]
    raise DecompositionError(f"cannot express {gate.kind} in basis {basis.name}")


def decompose(
    circuit: Circuit, basis: str | BasisGateSet, optimize_result: bool = True, keep: frozenset[str] = frozenset()
) -> Circuit:
    """Rewrite ``circuit`` using only the kinds of ``basis`` (plus measure/reset/id).

    Kinds listed in ``keep`` pass through untouched (routing absorbs logical SWAPs).
    """
    basis = get_basis(basis)
    out: list[Gate] = []
    pending = list(circuit.gates)
    guard = 0
    while pending:
        guard += 1
        if guard > 100 * (len(circuit.gates) + 10):
            raise DecompositionError("decomposition did not terminate")
        g = pending.pop(0)
        if basis.allows(g) or g.kind in keep:
            out.append(g)
        elif g.arity == 1:
            pending[:0] = _one_qubit(g, basis)
        else:
            pending[:0] = _two_qubit(g, basis)
    result = Circuit(circuit.qubit_count, out, circuit.classical_slots)
    return optimize(result) if optimize_result else result


def _mergeable(a: Gate, b: Gate) -> bool:
    return a.kind == b.kind and a.kind in ("rx", "ry", "rz", "rzz") and a.qubits == b.qubits


def _self_inverse_pair(a: Gate, b: Gate) -> bool:
    return a.kind == b.kind and a.qubits == b.qubits and a.kind in ("cx", "x", "swap")


def optimize(circuit: Circuit) -> Circuit:
    """Cancel adjacent self-inverse pairs and merge adjacent same-axis rotations.

    Two gates are adjacent when no other gate touches any of their wires in
    between. Rotations by a multiple of 2 pi are dropped (global phase).
    """
    out: list[Gate | None] = []
    stacks: list[list[int]] = [[] for _ in range(circuit.qubit_count)]

    def top(q: int) -> int | None:
        return stacks[q][-1] if stacks[q] else None

    def pop(idx: int) -> None:
        for q in out[idx].qubits:
            stacks[q].pop()
        out[idx] = None

    for g in circuit.gates:
        tops = {top(q) for q in g.qubits}
        prev = out[tops.pop()] if len(tops) == 1 and None not in tops and out else None
        if prev is not None and set(prev.qubits) == set(g.qubits):
            idx = stacks[g.qubits[0]][-1]
            if _self_inverse_pair(prev, g):
                pop(idx)
                continue
            if _mergeable(prev, g):
                theta = prev.theta + g.theta
                pop(idx)
                if _near(theta, 0, 1e-12):
                    continue
                g = Gate(g.kind, g.qubits, math.remainder(theta, 4 * math.pi))
        if g.kind in ("rx", "ry", "rz", "rzz") and _near(g.theta, 0, 1e-12):
            continue
        out.append(g)
        for q in g.qubits:
            stacks[q].append(len(out) - 1)
    return Circuit(circuit.qubit_count, [g for g in out if g is not None], circuit.classical_slots)
