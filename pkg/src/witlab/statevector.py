"""Dense statevector simulation.

Amplitudes are indexed big-endian: qubit 0 is the most significant bit of the
basis index, matching the left-to-right order of :class:`PauliString`
letters. Arrays may carry a leading batch axis, which the trajectory sampler
in :mod:`witlab.noise` uses to advance many pure states at once.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .circuit import Circuit, Gate
from .pauli import PauliString

MAX_QUBITS = 24

_SQ2 = 1 / math.sqrt(2)
_FIXED = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
    "h": np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),
    "sx": 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]], dtype=complex),
    "cx": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
    "swap": np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex),
}


class SimulationError(RuntimeError):
    pass


def gate_matrix(gate: Gate) -> np.ndarray:
    """Unitary of a gate on its own operands (first operand most significant)."""
    kind, t = gate.kind, gate.theta
    if kind in _FIXED:
        return _FIXED[kind]
    if kind == "rx":
        c, s = math.cos(t / 2), math.sin(t / 2)
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    if kind == "ry":
        c, s = math.cos(t / 2), math.sin(t / 2)
        return np.array([[c, -s], [s, c]], dtype=complex)
    if kind == "rz":
        return np.diag([np.exp(-0.5j * t), np.exp(0.5j * t)])
    if kind == "rzz":
        a, b = np.exp(-0.5j * t), np.exp(0.5j * t)
        return np.diag([a, b, b, a])
    if kind == "id":
        return np.eye(2 ** gate.arity, dtype=complex)
    raise SimulationError(f"{kind} is not unitary")


def apply_matrix(psi: np.ndarray, matrix: np.ndarray, qubits: Sequence[int], m: int) -> np.ndarray:
    """Apply a k-qubit matrix to ``psi`` of shape (2**m,) or (batch, 2**m)."""
    batched = psi.ndim == 2
    lead = 1 if batched else 0
    k = len(qubits)
    shape = ((psi.shape[0],) if batched else ()) + (2,) * m
    t = psi.reshape(shape)
    u = matrix.reshape((2,) * (2 * k))
    axes = [q + lead for q in qubits]
    t = np.tensordot(u, t, axes=(list(range(k, 2 * k)), axes))
    # tensordot puts the gate's output axes first
    t = np.moveaxis(t, list(range(k)), axes)
    return t.reshape(psi.shape)


def apply_gate(psi: np.ndarray, gate: Gate, m: int) -> np.ndarray:
    if gate.kind == "id":
        return psi
    return apply_matrix(psi, gate_matrix(gate), gate.qubits, m)


def _qubit_probability_one(psi: np.ndarray, q: int, m: int) -> np.ndarray:
    lead = psi.ndim - 1
    t = psi.reshape(psi.shape[:lead] + (2,) * m)
    t = np.moveaxis(t, q + lead, lead)
    p = np.abs(t) ** 2
    ones = p[(slice(None),) * lead + (1,)]
    return ones.reshape(psi.shape[:lead] + (-1,)).sum(axis=-1)


def project(psi: np.ndarray, q: int, m: int, outcome: int) -> tuple[np.ndarray, float]:
    """Project qubit ``q`` onto ``outcome``; returns the unnormalized state and its weight."""
    t = psi.reshape((2,) * m).copy()
    index = [slice(None)] * m
    index[q] = 1 - outcome
    t[tuple(index)] = 0
    out = t.reshape(-1)
    return out, float(np.vdot(out, out).real)


def _flip(psi: np.ndarray, q: int, m: int) -> np.ndarray:
    return apply_matrix(psi, _FIXED["x"], (q,), m)


@dataclass
class StateVector:
    amplitudes: np.ndarray
    bits: tuple[int, ...] = ()

    @property
    def qubit_count(self) -> int:
        return int(round(math.log2(self.amplitudes.shape[0])))

    @classmethod
    def basis(cls, m: int, index: int = 0) -> StateVector:
        amps = np.zeros(2**m, dtype=complex)
        amps[index] = 1
        return cls(amps)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def reduced_density_matrix(self, qubits: Sequence[int]) -> np.ndarray:
        return reduced_density_matrix(self.amplitudes, qubits)


def _initial(circuit: Circuit, initial) -> np.ndarray:
    m = circuit.qubit_count
    if m > MAX_QUBITS:
        raise SimulationError(f"{m} qubits exceeds the dense limit of {MAX_QUBITS}")
    if initial is None:
        initial = 0
    if isinstance(initial, StateVector):
        amps = initial.amplitudes
    elif isinstance(initial, np.ndarray):
        amps = initial
    else:
        return StateVector.basis(m, int(initial)).amplitudes
    if amps.shape != (2**m,):
        raise SimulationError(f"initial state has dimension {amps.shape}, expected {2**m}")
    return amps.astype(complex, copy=True)


def run(circuit: Circuit, initial=0, rng_seed: int | np.random.Generator | None = 0) -> StateVector:
    """Simulate ``circuit`` as one pure-state trajectory.

    RESET and MEASURE sample their outcome with the supplied generator, project
    and renormalize; RESET then flips the qubit back to |0>.
    """
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    m = circuit.qubit_count
    psi = _initial(circuit, initial)
    bits = [0] * circuit.classical_slots
    for gate in circuit.gates:
        if gate.is_unitary:
            psi = apply_gate(psi, gate, m)
            continue
        q = gate.qubits[0]
        p1 = float(_qubit_probability_one(psi, q, m))
        outcome = int(rng.random() < p1)
        psi, w = project(psi, q, m, outcome)
        psi = psi / math.sqrt(w)
        if gate.kind == "measure":
            bits[gate.slot] = outcome
        elif outcome:
            psi = _flip(psi, q, m)
    if not np.all(np.isfinite(psi)):
        raise SimulationError("non-finite amplitude")
    return StateVector(psi, tuple(bits))


@dataclass
class Branch:
    probability: float
    amplitudes: np.ndarray  # normalized
    bits: tuple[int, ...]


def branches(circuit: Circuit, initial=0, cutoff: float = 1e-14) -> list[Branch]:
    """Exact enumeration of every RESET/MEASURE outcome branch.

    The number of branches is at most 2**(non-unitary gates); the protocol
    circuits have one or two.
    """
    m = circuit.qubit_count
    live = [(1.0, _initial(circuit, initial), [0] * circuit.classical_slots)]
    for gate in circuit.gates:
        if gate.is_unitary:
            live = [(p, apply_gate(psi, gate, m), b) for p, psi, b in live]
            continue
        q = gate.qubits[0]
        nxt = []
        for p, psi, bits in live:
            for outcome in (0, 1):
                proj, w = project(psi, q, m, outcome)
                if p * w <= cutoff:
                    continue
                proj = proj / math.sqrt(w)
                new_bits = list(bits)
                if gate.kind == "measure":
                    new_bits[gate.slot] = outcome
                elif outcome:
                    proj = _flip(proj, q, m)
                nxt.append((p * w, proj, new_bits))
        live = nxt
    return [Branch(p, psi, tuple(b)) for p, psi, b in live]


def exact_distribution(circuit: Circuit, initial=0) -> dict[str, float]:
    """Exact probability of each classical bitstring (slot 0 leftmost)."""
    dist: dict[str, float] = {}
    for br in branches(circuit, initial):
        key = "".join(map(str, br.bits))
        dist[key] = dist.get(key, 0.0) + br.probability
    return dict(sorted(dist.items()))


def slot_expectation(dist: dict[str, float], slot: int = 0) -> float:
    """<Z> of a classical slot from a distribution or normalized histogram."""
    total = sum(dist.values())
    if total <= 0:
        raise SimulationError("empty distribution")
    return sum(v * (1 - 2 * int(k[slot])) for k, v in dist.items()) / total


def reduced_density_matrix(amplitudes: np.ndarray, qubits: Sequence[int]) -> np.ndarray:
    m = int(round(math.log2(amplitudes.shape[0])))
    keep = list(qubits)
    rest = [q for q in range(m) if q not in keep]
    t = amplitudes.reshape((2,) * m).transpose(keep + rest).reshape(2 ** len(keep), -1)
    return t @ t.conj().T


def mixed_reduced_state(circuit: Circuit, qubits: Sequence[int], initial=0) -> np.ndarray:
    """Branch-averaged reduced density matrix of ``qubits`` at the end of ``circuit``."""
    rho = 0
    for br in branches(circuit, initial):
        rho = rho + br.probability * reduced_density_matrix(br.amplitudes, qubits)
    return rho


def expectation(state: StateVector | np.ndarray, pauli: PauliString) -> float:
    """<psi|P|psi> for a Hermitian Pauli string (phase +1 or -1)."""
    amps = state.amplitudes if isinstance(state, StateVector) else state
    m = int(round(math.log2(amps.shape[0])))
    if pauli.n != m:
        raise ValueError(f"Pauli length {pauli.n} does not match {m} qubits")
    if not pauli.is_hermitian:
        raise ValueError(f"{pauli} is not Hermitian")
    if pauli.weight == 0:
        # states are normalized, so skip the rounding of an explicit inner product
        return float(pauli.phase.real)
    out = amps
    for q, letter in enumerate(pauli.letters):
        if letter != "I":
            out = apply_matrix(out, _FIXED[letter.lower()], (q,), m)
    value = np.vdot(amps, out) * pauli.phase
    if abs(value.imag) > 1e-10:
        raise SimulationError(f"expectation has imaginary part {value.imag}")
    return float(value.real)


def sample(
    state: StateVector | np.ndarray,
    measured_qubits: Sequence[int],
    shots: int,
    seed: int | np.random.Generator | None = 0,
) -> dict[str, int]:
    """Histogram of Z-basis outcomes on ``measured_qubits`` (first listed = leftmost bit)."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    amps = state.amplitudes if isinstance(state, StateVector) else state
    m = int(round(math.log2(amps.shape[0])))
    probs = np.abs(amps) ** 2
    k = len(measured_qubits)
    rest = [q for q in range(m) if q not in measured_qubits]
    marg = probs.reshape((2,) * m).transpose(list(measured_qubits) + rest).reshape(2**k, -1).sum(1)
    marg = marg / marg.sum()
    counts = rng.multinomial(shots, marg)
    return {format(i, f"0{k}b"): int(c) for i, c in enumerate(counts) if c}


def circuit_unitary(circuit: Circuit) -> np.ndarray:
    """Dense unitary of a measurement-free circuit (columns = images of basis states)."""
    if not circuit.is_unitary:
        raise SimulationError("circuit contains RESET/MEASURE")
    m = circuit.qubit_count
    if m > 12:
        raise SimulationError("dense unitary limited to 12 qubits")
    u = np.eye(2**m, dtype=complex)
    # rows of the batch are the columns of the unitary
    for gate in circuit.gates:
        u = apply_gate(u, gate, m)
    return u.T


def equal_up_to_phase(a: np.ndarray, b: np.ndarray, tol: float = 1e-10) -> bool:
    if a.shape != b.shape:
        return False
    idx = np.unravel_index(np.argmax(np.abs(b)), b.shape)
    if abs(b[idx]) < tol:
        return bool(np.allclose(a, b, atol=tol))
    phase = a[idx] / b[idx]
    if abs(abs(phase) - 1) > tol * 10 + 1e-12:
        return False
    return bool(np.max(np.abs(a - phase * b)) < tol)


def histogram_total(hist: dict[str, int]) -> int:
    return int(sum(hist.values()))


def merge_histograms(hists) -> dict[str, int]:
    total: Counter = Counter()
    for h in hists:
        total.update(h)
    return dict(sorted(total.items()))
