"""Hardware-agnostic circuit representation.

A :class:`Circuit` is an immutable, ordered list of :class:`Gate` values over
indexed qubits plus a number of classical measurement slots. Builders,
simulators and the transpiler all exchange circuits in this form.

Rotation conventions::

    RX(t) = exp(-i t X / 2)    RY(t) = exp(-i t Y / 2)    RZ(t) = exp(-i t Z / 2)
    RZZ(t) = exp(-i t Z(x)Z / 2)
    SX = sqrt(X) = exp(i pi/4) RX(pi/2)

Global phases are not tracked anywhere; equivalence checks are "up to global
phase".

Text format
-----------
One statement per line, ``#`` starts a comment::

    qubits 7
    clbits 1
    h 0
    cx 0 1
    rz 1.5707963267948966 3
    rzz -0.5 1 2
    measure 2 -> 0
    reset 3

Angles come before operands (``<kind> <theta> <q...>``). ``qubits`` and
``clbits`` headers are optional when reading; missing values are inferred.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

ROTATIONS = frozenset({"rx", "ry", "rz", "rzz"})
ONE_QUBIT = frozenset({"rx", "ry", "rz", "sx", "x", "y", "z", "h"})
TWO_QUBIT = frozenset({"cx", "swap", "rzz"})
NON_UNITARY = frozenset({"reset", "measure"})
# ``id`` is a noisy placeholder; it may span one or two qubits.
KINDS = ONE_QUBIT | TWO_QUBIT | NON_UNITARY | {"id"}


class CircuitError(ValueError):
    """Raised for malformed gates or circuits."""


class UnsupportedGateError(CircuitError):
    """Raised when an operation is not defined for a gate kind."""


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]
    theta: float | None = None
    slot: int | None = None

    def __post_init__(self):
        kind = self.kind.lower()
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if kind not in KINDS:
            raise CircuitError(f"unknown gate kind {self.kind!r}")
        arity = len(self.qubits)
        if kind in TWO_QUBIT and arity != 2:
            raise CircuitError(f"{kind} needs exactly 2 operands, got {arity}")
        if (kind in ONE_QUBIT or kind in NON_UNITARY) and arity != 1:
            raise CircuitError(f"{kind} needs exactly 1 operand, got {arity}")
        if kind == "id" and arity not in (1, 2):
            raise CircuitError("id placeholder spans 1 or 2 qubits")
        if len(set(self.qubits)) != arity:
            raise CircuitError(f"{kind} operands must be distinct: {self.qubits}")
        if any(q < 0 for q in self.qubits):
            raise CircuitError(f"negative qubit index in {self.qubits}")
        if kind in ROTATIONS:
            if self.theta is None or not math.isfinite(self.theta):
                raise CircuitError(f"{kind} needs a finite angle, got {self.theta}")
            object.__setattr__(self, "theta", float(self.theta))
        elif self.theta is not None:
            raise CircuitError(f"{kind} takes no angle")
        if kind == "measure":
            if self.slot is None or self.slot < 0:
                raise CircuitError("measure needs a nonnegative classical slot")
        elif self.slot is not None:
            raise CircuitError(f"{kind} takes no classical slot")

    @property
    def is_unitary(self) -> bool:
        return self.kind not in NON_UNITARY

    @property
    def arity(self) -> int:
        return len(self.qubits)

    def remap(self, mapping: Sequence[int] | dict[int, int]) -> Gate:
        return Gate(self.kind, tuple(mapping[q] for q in self.qubits), self.theta, self.slot)

    def to_text(self) -> str:
        if self.kind == "measure":
            return f"measure {self.qubits[0]} -> {self.slot}"
        parts = [self.kind]
        if self.theta is not None:
            parts.append(repr(self.theta))
        parts.extend(str(q) for q in self.qubits)
        return " ".join(parts)

    def __str__(self) -> str:
        return self.to_text()


# Small constructors, named after the gate.
def rx(theta: float, q: int) -> Gate:
    return Gate("rx", (q,), theta)


def ry(theta: float, q: int) -> Gate:
    return Gate("ry", (q,), theta)


def rz(theta: float, q: int) -> Gate:
    return Gate("rz", (q,), theta)


def rzz(theta: float, a: int, b: int) -> Gate:
    return Gate("rzz", (a, b), theta)


def cx(control: int, target: int) -> Gate:
    return Gate("cx", (control, target))


def swap(a: int, b: int) -> Gate:
    return Gate("swap", (a, b))


def h(q: int) -> Gate:
    return Gate("h", (q,))


def sx(q: int) -> Gate:
    return Gate("sx", (q,))


def x(q: int) -> Gate:
    return Gate("x", (q,))


def y(q: int) -> Gate:
    return Gate("y", (q,))


def z(q: int) -> Gate:
    return Gate("z", (q,))


def reset(q: int) -> Gate:
    return Gate("reset", (q,))


def measure(q: int, slot: int) -> Gate:
    return Gate("measure", (q,), slot=slot)


def idle(*qubits: int) -> Gate:
    return Gate("id", tuple(qubits))


@dataclass(frozen=True)
class Circuit:
    qubit_count: int
    gates: tuple[Gate, ...] = ()
    classical_slots: int = 0

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if self.qubit_count < 0 or self.classical_slots < 0:
            raise CircuitError("qubit and slot counts must be nonnegative")
        for gate in self.gates:
            _check_gate(gate, self.qubit_count, self.classical_slots)

    def __len__(self) -> int:
        return len(self.gates)

    def __iter__(self) -> Iterator[Gate]:
        return iter(self.gates)

    def __add__(self, other: Circuit) -> Circuit:
        return compose(self, other)

    def extend(self, gates: Iterable[Gate]) -> Circuit:
        return Circuit(self.qubit_count, self.gates + tuple(gates), self.classical_slots)

    def with_slots(self, classical_slots: int) -> Circuit:
        return Circuit(self.qubit_count, self.gates, classical_slots)

    @property
    def depth(self) -> int:
        return depth(self)

    @property
    def is_unitary(self) -> bool:
        return all(g.is_unitary for g in self.gates)

    def two_qubit_gates(self) -> list[Gate]:
        return [g for g in self.gates if g.arity == 2 and g.kind != "id"]

    def to_text(self) -> str:
        return dumps(self)


def _check_gate(gate: Gate, qubit_count: int, classical_slots: int) -> None:
    for q in gate.qubits:
        if q >= qubit_count:
            raise IndexError(f"operand {q} out of range for {qubit_count}-qubit circuit ({gate})")
    if gate.kind == "measure" and gate.slot >= classical_slots:
        raise IndexError(f"classical slot {gate.slot} out of range ({classical_slots} slots)")


def append(circuit: Circuit, gate: Gate) -> Circuit:
    """Return ``circuit`` with ``gate`` appended; operands are bounds-checked."""
    _check_gate(gate, circuit.qubit_count, circuit.classical_slots)
    return Circuit(circuit.qubit_count, circuit.gates + (gate,), circuit.classical_slots)


def compose(first: Circuit, second: Circuit) -> Circuit:
    """``first`` followed by ``second`` on the larger register."""
    return Circuit(
        max(first.qubit_count, second.qubit_count),
        first.gates + second.gates,
        max(first.classical_slots, second.classical_slots),
    )


def repeat(circuit: Circuit, times: int) -> Circuit:
    return Circuit(circuit.qubit_count, circuit.gates * times, circuit.classical_slots)


def adjoint_gates(gate: Gate) -> list[Gate]:
    """Gates implementing the adjoint of ``gate`` (up to global phase)."""
    kind = gate.kind
    if kind in ROTATIONS:
        return [Gate(kind, gate.qubits, -gate.theta)]
    if kind in {"x", "y", "z", "h", "cx", "swap", "id"}:
        return [gate]
    if kind == "sx":
        # SX^dag = Z SX Z up to phase
        q = gate.qubits[0]
        return [rz(math.pi, q), sx(q), rz(math.pi, q)]
    raise UnsupportedGateError(f"{kind} has no adjoint (non-unitary)")


def inverse(circuit: Circuit) -> Circuit:
    """Reverse the gate order and replace each gate by its adjoint."""
    gates: list[Gate] = []
    for gate in reversed(circuit.gates):
        gates.extend(adjoint_gates(gate))
    return Circuit(circuit.qubit_count, gates, circuit.classical_slots)


def depth(circuit: Circuit) -> int:
    """Longest chain of gates sharing wires; every gate is one layer unit."""
    level = [0] * circuit.qubit_count
    for gate in circuit.gates:
        top = max(level[q] for q in gate.qubits) + 1
        for q in gate.qubits:
            level[q] = top
    return max(level, default=0)


@dataclass(frozen=True)
class GateReport:
    counts: dict[str, int] = field(default_factory=dict)
    depth: int = 0
    size: int = 0

    def count(self, kind: str) -> int:
        return self.counts.get(kind, 0)

    def as_dict(self) -> dict:
        return {"counts": dict(sorted(self.counts.items())), "depth": self.depth, "size": self.size}


def gate_report(circuit: Circuit) -> GateReport:
    counts = Counter(g.kind for g in circuit.gates)
    return GateReport(dict(counts), depth(circuit), len(circuit.gates))


def active_qubits(circuit: Circuit) -> list[int]:
    return sorted({q for g in circuit.gates for q in g.qubits})


def compact(circuit: Circuit) -> tuple[Circuit, list[int]]:
    """Relabel the touched qubits to ``0..k-1``; returns the circuit and the old labels."""
    used = active_qubits(circuit)
    index = {q: i for i, q in enumerate(used)}
    gates = [g.remap(index) for g in circuit.gates]
    return Circuit(len(used), gates, circuit.classical_slots), used


def dumps(circuit: Circuit) -> str:
    lines = [f"qubits {circuit.qubit_count}", f"clbits {circuit.classical_slots}"]
    lines.extend(g.to_text() for g in circuit.gates)
    return "\n".join(lines) + "\n"


def loads(text: str) -> Circuit:
    qubits: int | None = None
    slots: int | None = None
    gates: list[Gate] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        head = tokens[0].lower()
        try:
            if head == "qubits":
                qubits = int(tokens[1])
            elif head == "clbits":
                slots = int(tokens[1])
            elif head == "measure":
                if len(tokens) != 4 or tokens[2] != "->":
                    raise CircuitError("expected 'measure <q> -> <slot>'")
                gates.append(measure(int(tokens[1]), int(tokens[3])))
            elif head in ROTATIONS:
                gates.append(Gate(head, tuple(int(t) for t in tokens[2:]), float(tokens[1])))
            else:
                gates.append(Gate(head, tuple(int(t) for t in tokens[1:])))
        except (IndexError, ValueError) as exc:
            raise CircuitError(f"line {lineno}: {exc}: {raw!r}") from exc
    if qubits is None:
        qubits = 1 + max((q for g in gates for q in g.qubits), default=-1)
    if slots is None:
        slots = 1 + max((g.slot for g in gates if g.kind == "measure"), default=-1)
    return Circuit(qubits, gates, slots)
