"""Synthetic device noise and shot sampling.

Error model
    * each qubit starts in |1> with probability ``prep_excite``;
    * after every unitary gate (including ``id`` placeholders) a uniformly
      random non-identity Pauli hits the gate's support with probability
      ``p1`` (one qubit) or ``p2`` (two qubits);
    * optionally a systematic ``RZ(coherent_rz)`` follows every CX on its
      target, the coherent error used to exercise randomized compiling;
    * every measurement result is flipped according to the measured
      qubit's confusion matrix ``M[i][j] = P(read i | true j)``.

Two samplers implement the same model:

``frame``
    Pauli-frame propagation for Clifford circuits (the protocol at its
    Clifford point). A single noiseless reference trajectory is run on the
    statevector engine; every shot carries the Pauli difference from it as
    boolean arrays, so cost is linear in shots and gates.
``trajectory``
    General circuits. Error patterns are drawn per shot up front, shots
    with identical patterns are grouped, and each distinct pattern is
    simulated once (batched) on the statevector engine. Measurements and
    resets split each group binomially over outcomes.

``backend="auto"`` picks the frame sampler whenever it applies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .circuit import Circuit, Gate, compact
from .pauli import PauliString, identify_pauli
from .statevector import MAX_QUBITS, SimulationError, _qubit_probability_one, apply_gate, apply_matrix, gate_matrix

_PAULI_1Q = [
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
]
# Pauli code c on k qubits: base-4 digits, first operand most significant,
# digit 1 = X, 2 = Y, 3 = Z. Bits (x, z) of digit d:
_DIGIT_X = np.array([0, 1, 1, 0], dtype=bool)
_DIGIT_Z = np.array([0, 0, 1, 1], dtype=bool)

IDEAL_READOUT = ((1.0, 0.0), (0.0, 1.0))


class NoiseError(ValueError):
    pass


def symmetric_readout(error: float) -> tuple[tuple[float, float], tuple[float, float]]:
    return ((1 - error, error), (error, 1 - error))


def _check_confusion(m) -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.shape != (2, 2) or np.any(a < 0) or np.any(a > 1):
        raise NoiseError(f"confusion matrix must be 2x2 with entries in [0, 1], got {m}")
    if not np.allclose(a.sum(axis=0), 1, atol=1e-12):
        raise NoiseError(f"confusion matrix columns must sum to 1, got {m}")
    return a


def _prob(name: str, v: float) -> float:
    v = float(v)
    if not 0 <= v <= 1:
        raise NoiseError(f"{name}={v} outside [0, 1]")
    return v


@dataclass(frozen=True)
class NoiseModel:
    p1: float = 0.0
    p2: float = 0.0
    prep_excite: float = 0.0
    readout: tuple = IDEAL_READOUT
    p1_per_qubit: Mapping[int, float] = field(default_factory=dict)
    p2_per_edge: Mapping[tuple[int, int], float] = field(default_factory=dict)
    readout_per_qubit: Mapping[int, tuple] = field(default_factory=dict)
    prep_per_qubit: Mapping[int, float] = field(default_factory=dict)
    coherent_rz: float = 0.0

    def __post_init__(self):
        _prob("p1", self.p1)
        _prob("p2", self.p2)
        _prob("prep_excite", self.prep_excite)
        object.__setattr__(self, "readout", tuple(map(tuple, _check_confusion(self.readout).tolist())))
        for q, v in self.p1_per_qubit.items():
            _prob(f"p1[{q}]", v)
        edges = {}
        for e, v in self.p2_per_edge.items():
            a, b = e
            edges[(min(a, b), max(a, b))] = _prob(f"p2[{e}]", v)
        object.__setattr__(self, "p2_per_edge", edges)
        for q, v in self.prep_per_qubit.items():
            _prob(f"prep[{q}]", v)
        object.__setattr__(
            self,
            "readout_per_qubit",
            {int(q): tuple(map(tuple, _check_confusion(m).tolist())) for q, m in self.readout_per_qubit.items()},
        )
        if not math.isfinite(self.coherent_rz):
            raise NoiseError("coherent_rz must be finite")

    def __hash__(self):
        return hash((self.p1, self.p2, self.prep_excite, self.readout, self.coherent_rz))

    @classmethod
    def noiseless(cls) -> NoiseModel:
        return cls()

    @classmethod
    def representative(cls) -> NoiseModel:
        """p2 = 1%, p1 = 0.1%, 2% symmetric readout error, 1% preparation error."""
        return cls(p1=0.001, p2=0.01, prep_excite=0.01, readout=symmetric_readout(0.02))

    @classmethod
    def from_graph(cls, graph, p1: float = 0.0, p2: float = 0.0, prep_excite: float = 0.0, readout: float = 0.0):
        """Device model whose per-edge 2q rates and per-node readout errors come from a coupling graph."""
        return cls(
            p1=p1,
            p2=p2,
            prep_excite=prep_excite,
            readout=symmetric_readout(readout),
            p2_per_edge=dict(graph.edge_error),
            readout_per_qubit={q: symmetric_readout(r) for q, r in graph.node_error.items()},
        )

    @property
    def is_noiseless(self) -> bool:
        return (
            self.p1 == 0
            and self.p2 == 0
            and self.prep_excite == 0
            and self.coherent_rz == 0
            and not any(self.p1_per_qubit.values())
            and not any(self.p2_per_edge.values())
            and not any(self.prep_per_qubit.values())
            and all(self._readout_is_ideal(m) for m in [self.readout, *self.readout_per_qubit.values()])
        )

    @staticmethod
    def _readout_is_ideal(m) -> bool:
        return m[0][1] == 0 and m[1][0] == 0

    def gate_rate(self, gate: Gate) -> float:
        if not gate.is_unitary:
            return 0.0
        if gate.arity == 1:
            return self.p1_per_qubit.get(gate.qubits[0], self.p1)
        a, b = gate.qubits
        return self.p2_per_edge.get((min(a, b), max(a, b)), self.p2)

    def confusion(self, q: int) -> np.ndarray:
        return np.asarray(self.readout_per_qubit.get(q, self.readout), dtype=float)

    def prep(self, q: int) -> float:
        return self.prep_per_qubit.get(q, self.prep_excite)

    def relabel(self, labels: Sequence[int]) -> NoiseModel:
        """The model seen by a compacted circuit whose qubit i was ``labels[i]``."""
        index = {q: i for i, q in enumerate(labels)}
        return NoiseModel(
            self.p1,
            self.p2,
            self.prep_excite,
            self.readout,
            {index[q]: v for q, v in self.p1_per_qubit.items() if q in index},
            {(index[a], index[b]): v for (a, b), v in self.p2_per_edge.items() if a in index and b in index},
            {index[q]: m for q, m in self.readout_per_qubit.items() if q in index},
            {index[q]: v for q, v in self.prep_per_qubit.items() if q in index},
            self.coherent_rz,
        )

    def with_(self, **changes) -> NoiseModel:
        from dataclasses import replace

        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "p1": self.p1,
            "p2": self.p2,
            "prep_excite": self.prep_excite,
            "readout": [list(r) for r in self.readout],
            "coherent_rz": self.coherent_rz,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> NoiseModel:
        readout = d.get("readout", IDEAL_READOUT)
        if isinstance(readout, (int, float)):
            readout = symmetric_readout(float(readout))
        return cls(
            p1=float(d.get("p1", 0.0)),
            p2=float(d.get("p2", 0.0)),
            prep_excite=float(d.get("prep_excite", 0.0)),
            readout=readout,
            coherent_rz=float(d.get("coherent_rz", 0.0)),
        )


# -- helpers shared by both samplers ----------------------------------------------------


def _with_coherent_errors(circuit: Circuit, eps: float) -> list[tuple[Gate, bool]]:
    """Gate list with the systematic RZ inserted; the flag marks gates that receive stochastic noise."""
    out = []
    for g in circuit.gates:
        out.append((g, True))
        if eps and g.kind == "cx":
            out.append((Gate("rz", (g.qubits[1],), eps), False))
    return out


def _random_codes(rng: np.random.Generator, count: int, arity: int) -> np.ndarray:
    return rng.integers(1, 4**arity, size=count)


def _hit_shots(rng: np.random.Generator, shots: int, p: float) -> np.ndarray:
    if p <= 0:
        return np.empty(0, dtype=np.int64)
    if p >= 1:
        return np.arange(shots)
    count = rng.binomial(shots, p)
    return np.sort(rng.choice(shots, size=count, replace=False, shuffle=False))


def _readout_flip(rng: np.random.Generator, true_bits: np.ndarray, confusion: np.ndarray) -> np.ndarray:
    """Apply P(read i | true j) = confusion[i][j] to a boolean column."""
    p_flip = np.where(true_bits, confusion[0][1], confusion[1][0])
    if not p_flip.any():
        return true_bits
    return true_bits ^ (rng.random(true_bits.shape[0]) < p_flip)


def _histogram(bits: np.ndarray) -> dict[str, int]:
    """Rows of classical bits -> histogram keyed by bitstrings (slot 0 leftmost)."""
    shots, slots = bits.shape
    if slots == 0:
        return {"": shots}
    weights = 1 << np.arange(slots - 1, -1, -1, dtype=np.int64)
    keys = bits.astype(np.int64) @ weights
    values, counts = np.unique(keys, return_counts=True)
    return {format(int(v), f"0{slots}b"): int(c) for v, c in zip(values, counts)}


def is_clifford_gate(gate: Gate) -> bool:
    if gate.kind in ("rx", "ry", "rz", "rzz"):
        k = gate.theta / (math.pi / 2)
        return abs(k - round(k)) < 1e-9
    return True


def is_clifford(circuit: Circuit) -> bool:
    return all(is_clifford_gate(g) for g in circuit.gates)


# -- Pauli-frame sampler ------------------------------------------------------------------


@lru_cache(maxsize=None)
def _symplectic(kind: str, quarter_turns: int | None, arity: int) -> np.ndarray:
    """Rows: images (x bits, then z bits) of the generators X_0..X_{k-1}, Z_0..Z_{k-1} under U P U^dag."""
    theta = None if quarter_turns is None else quarter_turns * math.pi / 2
    U = gate_matrix(Gate(kind, tuple(range(arity)), theta))
    rows = []
    for letter in "XZ":
        for q in range(arity):
            p = PauliString.single(arity, q, letter).to_matrix()
            image = identify_pauli(U @ p @ U.conj().T)
            if image is None:
                raise SimulationError(f"{kind} is not Clifford")
            rows.append([c in "XY" for c in image.letters] + [c in "ZY" for c in image.letters])
    return np.array(rows, dtype=bool)


def _table_for(gate: Gate) -> np.ndarray | None:
    if gate.kind == "id":
        return None
    turns = None if gate.theta is None else int(round(gate.theta / (math.pi / 2))) % 4
    return _symplectic(gate.kind, turns, gate.arity)


def _reference(circuit: Circuit, rng: np.random.Generator) -> list[int]:
    """One noiseless trajectory; returns the outcome of every measurement in order."""
    m = circuit.qubit_count
    psi = np.zeros(2**m, dtype=complex)
    psi[0] = 1
    outcomes = []
    for gate in circuit.gates:
        if gate.is_unitary:
            psi = apply_gate(psi, gate, m)
            continue
        q = gate.qubits[0]
        p1 = float(_qubit_probability_one(psi, q, m))
        if p1 < 1e-12:
            outcome = 0
        elif p1 > 1 - 1e-12:
            outcome = 1
        else:
            outcome = int(rng.random() < p1)
        t = psi.reshape((2,) * m)
        idx = [slice(None)] * m
        idx[q] = 1 - outcome
        t[tuple(idx)] = 0
        psi = t.reshape(-1)
        psi = psi / np.linalg.norm(psi)
        if gate.kind == "measure":
            outcomes.append(outcome)
        elif outcome:
            psi = apply_matrix(psi, _PAULI_1Q[1], (q,), m)
    return outcomes


def _frame_sample(circuit: Circuit, noise: NoiseModel, shots: int, rng: np.random.Generator) -> np.ndarray:
    m = circuit.qubit_count
    ref = _reference(circuit, rng)
    x = np.zeros((m, shots), dtype=bool)
    z = rng.random((m, shots)) < 0.5
    for q in range(m):
        hit = _hit_shots(rng, shots, noise.prep(q))
        x[q, hit] = True
    bits = np.zeros((shots, circuit.classical_slots), dtype=bool)
    k = 0
    for gate in circuit.gates:
        qs = list(gate.qubits)
        if gate.kind == "measure":
            q = qs[0]
            true_bits = x[q] ^ bool(ref[k])
            k += 1
            bits[:, gate.slot] = _readout_flip(rng, true_bits, noise.confusion(q))
            z[q] = rng.random(shots) < 0.5
            continue
        if gate.kind == "reset":
            q = qs[0]
            x[q] = False
            z[q] = rng.random(shots) < 0.5
            continue
        table = _table_for(gate)
        if table is not None:
            ins = [x[q] for q in qs] + [z[q] for q in qs]
            a = len(qs)
            outs = []
            for j in range(2 * a):
                acc = np.zeros(shots, dtype=bool)
                for i, src in enumerate(ins):
                    if table[i, j]:
                        acc = acc ^ src
                outs.append(acc)
            for i, q in enumerate(qs):
                x[q], z[q] = outs[i], outs[a + i]
        hit = _hit_shots(rng, shots, noise.gate_rate(gate))
        if hit.size:
            codes = _random_codes(rng, hit.size, gate.arity)
            for i, q in enumerate(qs):
                digit = (codes // 4 ** (gate.arity - 1 - i)) % 4
                x[q, hit] ^= _DIGIT_X[digit]
                z[q, hit] ^= _DIGIT_Z[digit]
    return bits


# -- trajectory sampler -----------------------------------------------------------------------


def _pauli_op(code: int, arity: int) -> np.ndarray:
    op = np.array([[1]], dtype=complex)
    for i in range(arity):
        op = np.kron(op, _PAULI_1Q[(code // 4 ** (arity - 1 - i)) % 4])
    return op


def _trajectory_sample(
    circuit: Circuit, noise: NoiseModel, shots: int, rng: np.random.Generator, chunk: int = 1024
) -> np.ndarray:
    m = circuit.qubit_count
    ops = _with_coherent_errors(circuit, noise.coherent_rz)
    # Noise locations: one per qubit for preparation, then one per noisy gate.
    loc_shot, loc_id, loc_code = [], [], []
    for q in range(m):
        hit = _hit_shots(rng, shots, noise.prep(q))
        loc_shot.append(hit)
        loc_id.append(np.full(hit.size, q))
        loc_code.append(np.ones(hit.size, dtype=np.int64))
    for i, (gate, noisy) in enumerate(ops):
        rate = noise.gate_rate(gate) if noisy else 0.0
        hit = _hit_shots(rng, shots, rate)
        loc_shot.append(hit)
        loc_id.append(np.full(hit.size, m + i))
        loc_code.append(_random_codes(rng, hit.size, gate.arity))
    shot_idx = np.concatenate(loc_shot)
    where = np.concatenate(loc_id)
    codes = np.concatenate(loc_code)
    order = np.lexsort((where, shot_idx))
    shot_idx, where, codes = shot_idx[order], where[order], codes[order]

    # Group shots by their error pattern; pattern 0 is "no error".
    patterns: dict[tuple, int] = {(): 0}
    counts = [0]
    events: list[tuple] = [()]
    bounds = np.flatnonzero(np.diff(shot_idx)) + 1
    starts = np.concatenate([[0], bounds]) if shot_idx.size else np.empty(0, dtype=int)
    ends = np.concatenate([bounds, [shot_idx.size]]) if shot_idx.size else np.empty(0, dtype=int)
    for s, e in zip(starts, ends):
        key = tuple(zip(where[s:e].tolist(), codes[s:e].tolist()))
        pid = patterns.get(key)
        if pid is None:
            pid = patterns[key] = len(counts)
            counts.append(0)
            events.append(key)
        counts[pid] += 1
    counts[0] = shots - len(starts)
    pids = [p for p in range(len(counts)) if counts[p] > 0]

    n_meas = sum(1 for g in circuit.gates if g.kind == "measure")
    true_rows: list[np.ndarray] = []
    count_rows: list[np.ndarray] = []
    for c0 in range(0, len(pids), chunk):
        block = pids[c0 : c0 + chunk]
        t_bits, t_counts = _simulate_patterns(
            ops, m, [events[p] for p in block], np.array([counts[p] for p in block]), n_meas, rng
        )
        true_rows.append(t_bits)
        count_rows.append(t_counts)
    true_bits = np.repeat(np.concatenate(true_rows), np.concatenate(count_rows), axis=0)
    # shuffle rows so shot order carries no pattern structure
    true_bits = true_bits[rng.permutation(true_bits.shape[0])]

    bits = np.zeros((shots, circuit.classical_slots), dtype=bool)
    k = 0
    for gate in circuit.gates:
        if gate.kind == "measure":
            bits[:, gate.slot] = _readout_flip(rng, true_bits[:, k], noise.confusion(gate.qubits[0]))
            k += 1
    return bits


def _simulate_patterns(ops, m, pattern_events, counts, n_meas, rng):
    rows = len(pattern_events)
    psi = np.zeros((rows, 2**m), dtype=complex)
    # per-location lookup: location -> (pattern rows, codes)
    by_loc: dict[int, list[tuple[int, int]]] = {}
    for r, ev in enumerate(pattern_events):
        for loc, code in ev:
            by_loc.setdefault(loc, []).append((r, code))
    pid = np.arange(rows)
    # preparation errors are X flips, so the initial states are basis states
    index = np.zeros(rows, dtype=np.int64)
    for q in range(m):
        for r, _ in by_loc.get(q, []):
            index[r] |= 1 << (m - 1 - q)
    psi[np.arange(rows), index] = 1
    meas = np.zeros((rows, n_meas), dtype=bool)
    k = 0
    for i, (gate, _) in enumerate(ops):
        if gate.is_unitary:
            psi = apply_gate(psi, gate, m)
            hits = by_loc.get(m + i)
            if hits:
                row_of = {}
                for r, code in hits:
                    row_of[r] = code
                sel = np.flatnonzero(np.isin(pid, list(row_of)))
                for code in set(row_of.values()):
                    rows_c = sel[[row_of[int(pid[s])] == code for s in sel]]
                    psi[rows_c] = apply_matrix(psi[rows_c], _pauli_op(code, gate.arity), gate.qubits, m)
            continue
        q = gate.qubits[0]
        p1 = np.clip(_qubit_probability_one(psi, q, m), 0.0, 1.0)
        ones = rng.binomial(counts, p1)
        zeros = counts - ones
        keep0, keep1 = zeros > 0, ones > 0
        src = np.concatenate([np.flatnonzero(keep0), np.flatnonzero(keep1)])
        outcome = np.concatenate([np.zeros(keep0.sum(), dtype=bool), np.ones(keep1.sum(), dtype=bool)])
        counts = np.concatenate([zeros[keep0], ones[keep1]])
        psi, pid, meas = psi[src], pid[src], meas[src]
        t = psi.reshape((psi.shape[0],) + (2,) * m)
        t = np.moveaxis(t, q + 1, 1).copy()
        t[~outcome, 1] = 0
        t[outcome, 0] = 0
        if gate.kind == "reset":
            t[outcome, 0] = t[outcome, 1]
            t[outcome, 1] = 0
        t = np.moveaxis(t, 1, q + 1).reshape(psi.shape[0], -1)
        norms = np.linalg.norm(t, axis=1, keepdims=True)
        psi = t / np.where(norms > 0, norms, 1)
        if gate.kind == "measure":
            meas[:, k] = outcome
            k += 1
    return meas, counts


# -- public entry points --------------------------------------------------------------------


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def noisy_bits(circuit: Circuit, noise: NoiseModel, shots: int, seed=0, backend: str = "auto") -> np.ndarray:
    """Per-shot classical bits, shape (shots, classical_slots)."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    if backend not in ("auto", "frame", "trajectory"):
        raise ValueError(f"unknown backend {backend!r}")
    rng = _rng(seed)
    small, labels = compact(circuit)
    if small.qubit_count > MAX_QUBITS:
        raise SimulationError(f"{small.qubit_count} active qubits exceeds the simulator limit")
    local = noise.relabel(labels)
    frame_ok = is_clifford(small) and noise.coherent_rz == 0
    if backend == "frame" and not frame_ok:
        raise SimulationError("frame sampler needs a Clifford circuit without coherent errors")
    if backend == "frame" or (backend == "auto" and frame_ok):
        return _frame_sample(small, local, shots, rng)
    return _trajectory_sample(small, local, shots, rng)


def noisy_sample(circuit: Circuit, noise: NoiseModel, shots: int, seed=0, backend: str = "auto") -> dict[str, int]:
    """Noisy histogram over the classical slots (slot 0 leftmost); deterministic under a fixed seed."""
    return _histogram(noisy_bits(circuit, noise, shots, seed, backend))


def expectation_from_counts(hist: Mapping[str, float], slot: int = 0) -> float:
    total = sum(hist.values())
    if total <= 0:
        raise ValueError("empty histogram")
    return sum(v * (1 - 2 * int(k[slot])) for k, v in hist.items()) / total


def z_variance(mean: float, shots: int) -> float:
    """Sampling variance of a +-1 estimator with the given mean."""
    return max(0.0, 1.0 - mean * mean) / max(shots, 1)
