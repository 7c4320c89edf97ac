"""Clifford operator dynamics at the self-dual point.

At ``|b| = |J| = pi/4`` and ``h = 0`` every layer of the kicked-Ising step
is a product of commuting quarter turns ``W = exp(i s pi/4 G)`` with ``G`` a
Pauli string. Conjugation by one quarter turn has the closed form

    W^dag P W = P              if [P, G] = 0
              = (i s) P G      otherwise

which is all this module needs: Pauli strings map to single Pauli strings
and phases stay in {+1, -1, +i, -i}.

Time direction. The growth table columns ``O_L(-t)`` are produced by
repeated conjugation with the transposed step ``S = U_I U_K``::

    O_L(-t) = S^dag^t  O  S^t,    one step = conj_kick(conj_ising(.))

``evolve(p, -t)`` gives this, and positive ``t`` applies the inverse maps.
The same operator appears on the right side at ``+t`` because the right
system runs the transposed evolution.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .bkp import BkpParams, WitConfig
from .circuit import UnsupportedGateError
from .pauli import PauliString, weight

QUARTER = math.pi / 4
SEEDS = ("I", "X", "Y", "Z")


class NonCliffordError(UnsupportedGateError):
    """Raised when a Clifford-only shortcut is asked for non-Clifford parameters."""


def quarter_turn(p: PauliString, generator: PauliString, s: int = 1) -> PauliString:
    """W^dag p W for W = exp(i s pi/4 generator), s = +1 or -1."""
    if p.commutes(generator):
        return p
    return (p * generator).scaled(1 if s > 0 else 3)


def _turns(angle: float) -> int:
    """Number of signed quarter turns in ``angle``; raises if not a multiple of pi/4."""
    k = angle / QUARTER
    r = round(k)
    if abs(k - r) > 1e-9:
        raise NonCliffordError(f"angle {angle} is not a multiple of pi/4")
    return int(r)


def _apply_turns(p: PauliString, generator: PauliString, turns: int) -> PauliString:
    s = 1 if turns > 0 else -1
    for _ in range(abs(turns) % 4):
        p = quarter_turn(p, generator, s)
    return p


def _check_clifford(params: BkpParams) -> None:
    if not params.is_clifford:
        raise NonCliffordError(
            f"Clifford propagation needs |b| = |J| = pi/4 and h = 0 (got b={params.b}, J={params.J}, h={params.h})"
        )


def _chain(p: PauliString, qubits: Sequence[int] | None, n: int | None) -> list[int]:
    if qubits is not None:
        return list(qubits)
    return list(range(p.n if n is None else n))


def conj_kick(p: PauliString, b: float = QUARTER, qubits: Sequence[int] | None = None) -> PauliString:
    """U_K^dag p U_K with U_K = exp(i b sum X) on ``qubits`` (default: every position)."""
    turns = _turns(b)
    for q in _chain(p, qubits, None):
        p = _apply_turns(p, PauliString.single(p.n, q, "X"), turns)
    return p


def conj_ising(p: PauliString, J: float = QUARTER, qubits: Sequence[int] | None = None) -> PauliString:
    """U_I^dag p U_I with U_I = exp(i J sum Z_j Z_{j+1}) on an open chain."""
    turns = _turns(J)
    chain = _chain(p, qubits, None)
    for a, c in zip(chain, chain[1:]):
        g = PauliString.single(p.n, a, "Z") * PauliString.single(p.n, c, "Z")
        p = _apply_turns(p, g, turns)
    return p


def conj_coupling(
    p: PauliString,
    pairs: Iterable[tuple[int, int]],
    g: float = math.pi / 2,
    K: int | None = None,
) -> PauliString:
    """Conjugate a two-sided string by exp(i g V), V = (1/K) sum Z_L Z_R over ``pairs``.

    Each pair contributes ``exp(i (g/K) Z_L Z_R)``; with g = pi/2 and K = 2
    that is the quarter turn Q.
    """
    pairs = list(pairs)
    K = len(pairs) if K is None else K
    turns = _turns(g / K)
    for a, c in pairs:
        zz = PauliString.single(p.n, a, "Z") * PauliString.single(p.n, c, "Z")
        p = _apply_turns(p, zz, turns)
    return p


def _inverse_kick(p: PauliString, b: float, qubits) -> PauliString:
    return conj_kick(p, -b, qubits)


def _inverse_ising(p: PauliString, J: float, qubits) -> PauliString:
    return conj_ising(p, -J, qubits)


def step_back(p: PauliString, params: BkpParams, qubits: Sequence[int] | None = None) -> PauliString:
    """One step toward negative time: S^dag p S with S = U_I U_K."""
    return conj_kick(conj_ising(p, params.J, qubits), params.b, qubits)


def step_forward(p: PauliString, params: BkpParams, qubits: Sequence[int] | None = None) -> PauliString:
    """Inverse of :func:`step_back`: S p S^dag."""
    return _inverse_ising(_inverse_kick(p, params.b, qubits), params.J, qubits)


def evolve(
    seed: PauliString, t: int, params: BkpParams, qubits: Sequence[int] | None = None
) -> PauliString:
    """Evolve ``seed`` by ``t`` steps; ``evolve(O, -t)`` is the table entry O_L(-t)."""
    _check_clifford(params)
    qubits = list(range(params.n)) if qubits is None else list(qubits)
    fn = step_back if t < 0 else step_forward
    for _ in range(abs(t)):
        seed = fn(seed, params, qubits)
    return seed


def z_size(p: PauliString, carriers: Iterable[int]) -> int:
    """Number of X/Y letters at the carrier positions (0-based)."""
    return sum(p.letters[c] in "XY" for c in carriers)


def coupling_eigenvalue(p: PauliString, carriers: Sequence[int], K: int | None = None) -> float:
    """Eigenvalue of V = (1/K) sum_j Z_jL Z_jR on P_R|phi+>, equal to (K - 2 S) / K."""
    carriers = list(carriers)
    K = len(carriers) if K is None else K
    return (K - 2 * z_size(p, carriers)) / K


def wrap_phase(theta: float) -> float:
    """Map an angle into (-pi, pi]."""
    return math.pi - (math.pi - theta) % (2 * math.pi)


# -- size distributions --------------------------------------------------------


@dataclass(frozen=True)
class SizeDistribution:
    q: np.ndarray  # winding size distribution, sum of c_P**2
    Q: np.ndarray  # size distribution, sum of |c_P|**2

    @property
    def sizes(self) -> np.ndarray:
        return np.arange(len(self.Q))

    def mean_size(self) -> float:
        return float(np.dot(self.sizes, self.Q.real) / self.Q.real.sum())


def size_distribution(op: Mapping[PauliString | str, complex]) -> SizeDistribution:
    """Size distributions of ``sum_P c_P P``; a string's own phase folds into c_P."""
    terms = []
    for key, c in op.items():
        p = PauliString.parse(key) if isinstance(key, str) else key
        terms.append((p.unsigned(), complex(c) * p.phase))
    if not terms:
        raise ValueError("empty operator")
    m = terms[0][0].n
    q = np.zeros(m + 1, dtype=complex)
    Q = np.zeros(m + 1)
    for p, c in terms:
        if p.n != m:
            raise ValueError("all strings must have the same length")
        q[weight(p)] += c * c
        Q[weight(p)] += abs(c) ** 2
    if np.allclose(q.imag, 0, atol=1e-14):
        q = q.real
    return SizeDistribution(q, Q)


# -- growth table and phase report ---------------------------------------------


def _left_seed(letter: str, n: int) -> PauliString:
    return PauliString.single(n, 0, letter)


def render_two_sided(left: PauliString, n_right: int | None = None) -> str:
    """Sign prefix, then left letters, then identity letters for the right side."""
    n_right = left.n if n_right is None else n_right
    if not left.is_hermitian:
        raise ValueError(f"{left} has an imaginary phase")
    return ("-" if left.phase_exp == 2 else "") + left.letters + "I" * n_right


@dataclass(frozen=True)
class GrowthTable:
    params: BkpParams
    rows: tuple[dict[str, PauliString], ...] = field(default_factory=tuple)

    @property
    def T(self) -> int:
        return len(self.rows) - 1

    def entry(self, t: int, seed: str) -> str:
        return render_two_sided(self.rows[t][seed])

    def to_text(self) -> str:
        header = ["Time"] + [f"{s}_L(-t)" for s in SEEDS]
        body = [[f"t={t}"] + [self.entry(t, s) for s in SEEDS] for t in range(len(self.rows))]
        widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
        lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in [header] + body]
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t"] + list(SEEDS))
        for t in range(len(self.rows)):
            w.writerow([t] + [self.entry(t, s) for s in SEEDS])
        return buf.getvalue()


def growth_table(params: BkpParams, T: int | None = None) -> GrowthTable:
    """Rows t = 0..T of O_L(-t) for the four single-qubit seeds on the message register."""
    _check_clifford(params)
    T = params.T if T is None else T
    rows = []
    current = {s: _left_seed(s, params.n) for s in SEEDS}
    rows.append(dict(current))
    for _ in range(T):
        current = {s: step_back(p, params) for s, p in current.items()}
        rows.append(dict(current))
    return GrowthTable(params, tuple(rows))


@dataclass(frozen=True)
class PhaseRow:
    operator: str
    evolved: str
    z_size: int
    theta: float
    aligned: bool


@dataclass(frozen=True)
class PhaseReport:
    g: float
    rows: tuple[PhaseRow, ...]
    note: str = ""

    @property
    def z_sizes(self) -> tuple[int, ...]:
        return tuple(r.z_size for r in self.rows)

    def row(self, operator: str) -> PhaseRow:
        return next(r for r in self.rows if r.operator == operator)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["operator", "z_size", "theta", "aligned"])
        for r in self.rows:
            w.writerow([r.operator, r.z_size, f"{r.theta:.12f}", int(r.aligned)])
        return buf.getvalue()


def correlator_phase(p: PauliString, g: float, carriers: Sequence[int], K: int | None = None) -> float:
    """theta_O for an evolved left string P: the phase of sign(P^T) * exp(i g lambda_P)."""
    lam = coupling_eigenvalue(p, carriers, K)
    extra = math.pi if p.transpose_sign() < 0 else 0.0
    return wrap_phase(g * lam + extra)


def phase_report(config: WitConfig, tol: float = 1e-9) -> PhaseReport:
    """Z-size, correlator phase and alignment with theta_I for O in {I, X, Y, Z} at t = T."""
    p = config.params
    _check_clifford(p)
    g = config.g * config.coupling_sign
    rows = []
    theta_i = None
    for s in SEEDS:
        evolved = evolve(_left_seed(s, p.n), -p.T, p)
        theta = correlator_phase(evolved, g, config.carriers, config.K)
        if theta_i is None:
            theta_i = theta
        aligned = abs(wrap_phase(theta - theta_i)) < tol
        rows.append(PhaseRow(s, render_two_sided(evolved), z_size(evolved, config.carriers), theta, aligned))
    note = ""
    if abs(wrap_phase(g)) < tol:
        note = (
            "g = 0: the coupling is the identity, so the phases only carry operator signs "
            "and no message is transmitted; compare the z-sizes instead"
        )
    return PhaseReport(config.g, tuple(rows), note)
