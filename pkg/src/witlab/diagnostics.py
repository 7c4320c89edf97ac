"""Exact diagnostics of the teleportation protocol.

Everything here runs on the dense engine without sampling: ``<Z>(g)``
sweeps, single-qubit process tomography (Pauli transfer matrices), the
two-sided correlators whose phases govern teleportation, and the
Haar-random baseline channel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.stats import unitary_group

from .bkp import WitConfig, build_bell_pairs, build_coupling, build_evolution, build_wit, prepare_message
from .circuit import Circuit, Gate, inverse
from .pauli import pauli_matrix
from .statevector import apply_gate, apply_matrix, mixed_reduced_state

PAULIS = ("I", "X", "Y", "Z")
TOMOGRAPHY_INPUTS = ("Z+", "Z-", "X+", "Y+")

_SIGMA = [pauli_matrix(p) for p in PAULIS]


def output_state(config: WitConfig) -> np.ndarray:
    """Reduced density matrix of the output register before measurement."""
    return mixed_reduced_state(build_wit(config, measure_output=False), [config.output_qubit])


def bloch(rho: np.ndarray) -> tuple[float, float, float]:
    return tuple(float(np.trace(rho @ s).real) for s in _SIGMA[1:])


@dataclass(frozen=True)
class SweepPoint:
    g: float
    z: float
    x: float
    y: float

    @property
    def expectation(self) -> float:
        return self.z


def sweep(config: WitConfig, g_values: Sequence[float]) -> list[SweepPoint]:
    """Exact output-register Bloch components at each coupling strength."""
    out = []
    for g in g_values:
        x, y, z = bloch(output_state(config.with_(g=float(g))))
        out.append(SweepPoint(float(g), z, x, y))
    return out


def g_grid(g_min: float = 0.0, g_max: float = math.pi, points: int = 14) -> np.ndarray:
    if points < 1:
        raise ValueError("points must be >= 1")
    if points == 1:
        return np.array([g_min])
    return np.linspace(g_min, g_max, points)


# -- process tomography -----------------------------------------------------------


@dataclass(frozen=True)
class PauliTransferMatrix:
    R: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "R", np.asarray(self.R, dtype=float))

    @property
    def diagonal(self) -> np.ndarray:
        return np.diag(self.R).copy()

    def off_diagonal_max(self) -> float:
        return float(np.max(np.abs(self.R - np.diag(np.diag(self.R)))))

    def is_trace_preserving(self, tol: float = 1e-10) -> bool:
        return bool(np.allclose(self.R[0], [1, 0, 0, 0], atol=tol))

    def apply(self, rho: np.ndarray) -> np.ndarray:
        r = np.array([np.trace(s @ rho).real for s in _SIGMA])
        out = self.R @ r
        return 0.5 * sum(c * s for c, s in zip(out, _SIGMA))

    def to_text(self, digits: int = 6) -> str:
        rows = ["      " + "".join(f"{p:>{digits + 5}}" for p in PAULIS)]
        for p, row in zip(PAULIS, self.R):
            rows.append(f"  {p}   " + "".join(f"{round(float(v), digits) + 0.0:>{digits + 5}.{digits}f}" for v in row))
        return "\n".join(rows) + "\n"

    def to_list(self) -> list[list[float]]:
        return [[float(v) for v in row] for row in self.R]


_INPUT_VECTORS = {
    "Z+": np.array([1, 0], dtype=complex),
    "Z-": np.array([0, 1], dtype=complex),
    "X+": np.array([1, 1], dtype=complex) / math.sqrt(2),
    "X-": np.array([1, -1], dtype=complex) / math.sqrt(2),
    "Y+": np.array([1, 1j], dtype=complex) / math.sqrt(2),
    "Y-": np.array([1, -1j], dtype=complex) / math.sqrt(2),
}


def input_density(label: str) -> np.ndarray:
    v = _INPUT_VECTORS[label]
    return np.outer(v, v.conj())


def identity_executor(label: str) -> np.ndarray:
    return input_density(label)


def tomography(executor: Callable[[str], np.ndarray]) -> PauliTransferMatrix:
    """PTM from the outputs for inputs |0>, |1>, |+>, |+i>.

    ``executor(label)`` returns the 2x2 output density matrix for a cardinal
    input state label.
    """
    e0, e1, ep, ei = (np.asarray(executor(label)) for label in TOMOGRAPHY_INPUTS)
    images = [e0 + e1, 2 * ep - (e0 + e1), 2 * ei - (e0 + e1), e0 - e1]
    R = np.array([[0.5 * np.trace(sa @ img).real for img in images] for sa in _SIGMA])
    return PauliTransferMatrix(R)


def wit_executor(config: WitConfig) -> Callable[[str], np.ndarray]:
    return lambda label: output_state(config.with_(message_state=label))


def wit_tomography(config: WitConfig) -> PauliTransferMatrix:
    return tomography(wit_executor(config))


# -- two-sided correlators ------------------------------------------------------------


@dataclass(frozen=True)
class CorrelatorResult:
    operator: str
    r: float
    theta: float
    value: complex


def _run_gates(psi: np.ndarray, gates, m: int) -> np.ndarray:
    for gate in gates:
        psi = apply_gate(psi, gate, m)
    return psi


def _heisenberg(psi: np.ndarray, op: str, q: int, evolution: Circuit, m: int) -> np.ndarray:
    """Apply S^dag^T O S^T to ``psi``: evolution gates, then O on ``q``, then their inverse."""
    psi = _run_gates(psi, evolution.gates, m)
    if op != "I":
        psi = apply_matrix(psi, pauli_matrix(op), (q,), m)
    return _run_gates(psi, inverse(evolution).gates, m)


def correlator(operator: str, config: WitConfig) -> CorrelatorResult:
    """<phi+| O_L(-t)^dag exp(i g V) O_R(t) |phi+> on the 2n-qubit Bell state."""
    if operator not in PAULIS:
        raise ValueError(f"operator must be one of {PAULIS}")
    n, p = config.n, config.params
    m = 2 * n
    left, right = list(range(n)), list(range(n, m))
    psi = np.zeros(2**m, dtype=complex)
    psi[0] = 1
    phi = _run_gates(psi, build_bell_pairs(n, m), m)
    ev_left = build_evolution(p, left, m, transposed=True)
    ev_right = build_evolution(p, right, m, transposed=True)
    bra = _heisenberg(phi, operator, left[0], ev_left, m)
    ket = _heisenberg(phi, operator, right[0], ev_right, m)
    coupling = build_coupling(n, config.K, config.g, left, right, m, config.coupling_sign)
    ket = _run_gates(ket, coupling.gates, m)
    value = complex(np.vdot(bra, ket))
    theta = math.pi - (math.pi - float(np.angle(value))) % (2 * math.pi)
    return CorrelatorResult(operator, abs(value), theta, value)


def correlators(config: WitConfig) -> dict[str, CorrelatorResult]:
    return {o: correlator(o, config) for o in PAULIS}


# -- Haar baseline ----------------------------------------------------------------------


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary (QR of a complex Gaussian matrix with phase-fixed R)."""
    return unitary_group.rvs(dim, random_state=rng)


def haar_wit_output(U: np.ndarray, n: int, g: float, label: str, K: int | None = None) -> np.ndarray:
    """Output density matrix of the protocol with the dense step ``U`` in place of T steps.

    Left side: U^dag, message swap, U. Right side: U^T, matching the
    transposed right evolution of the kicked-Ising circuit.
    """
    K = n - 1 if K is None else K
    m = 2 * n + 1
    left, right, anc = list(range(n)), list(range(n, 2 * n)), 2 * n
    psi = np.zeros(2**m, dtype=complex)
    psi[0] = 1
    psi = _run_gates(psi, prepare_message(label, anc), m)
    psi = _run_gates(psi, build_bell_pairs(n, m), m)
    psi = apply_matrix(psi, U.conj().T, left, m)
    psi = apply_gate(psi, Gate("swap", (anc, left[0])), m)
    psi = apply_matrix(psi, U, left, m)
    psi = _run_gates(psi, build_coupling(n, K, g, left, right, m).gates, m)
    psi = apply_matrix(psi, U.T, right, m)
    t = psi.reshape((2,) * m)
    t = np.moveaxis(t, right[0], 0).reshape(2, -1)
    return t @ t.conj().T


def haar_channel(n: int, g: float, num_samples: int, seed: int, K: int | None = None) -> PauliTransferMatrix:
    """PTM averaged over ``num_samples`` Haar-random evolutions on n qubits per side."""
    if not 1 <= n <= 5:
        raise ValueError("dense Haar sampling supports 1 <= n <= 5 qubits per side")
    if num_samples < 1:
        raise ValueError("num_samples must be >= 1")
    rng = np.random.default_rng(seed)
    total = np.zeros((4, 4))
    for _ in range(num_samples):
        U = haar_unitary(2**n, rng)
        total += tomography(lambda label: haar_wit_output(U, n, g, label, K)).R
    return PauliTransferMatrix(total / num_samples)


def y_flip_depolarizing(lam: float) -> PauliTransferMatrix:
    """PTM of rho -> Y D_lam(rho) Y, with D_lam the depolarizing channel of shrink factor ``lam``."""
    return PauliTransferMatrix(np.diag([1.0, -lam, lam, -lam]))


def fit_y_flip(ptm: PauliTransferMatrix) -> tuple[float, float]:
    """Best lambda for the Y-flip form and the largest diagonal deviation from it."""
    d = ptm.diagonal
    lam = float((-d[1] + d[2] - d[3]) / 3)
    spread = float(np.max(np.abs(d[1:] - np.array([-lam, lam, -lam]))))
    return lam, spread
