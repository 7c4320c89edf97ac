"""Circuits for the kicked-Ising (BKP) teleportation protocol.

One time step is ``U = U_K U_I`` with

    U_K = exp(i b sum_j X_j)
    U_I = exp(i J sum_j Z_j Z_{j+1} + i sum_j h_j Z_j)      (open chain)

so under the rotation conventions of :mod:`witlab.circuit` the kick is
``RX(-2b)`` on every site and the Ising layer is ``RZZ(-2J)`` on every bond
plus ``RZ(-2 h_j)``.

Register layout of the teleportation circuit
    ``0 .. n-1``     left system (0 is the message register)
    ``n .. 2n-1``    right system (``n`` is the output register)
    ``2n``           message ancilla (swap insertion only)

The right system evolves with the transposed step ``U^T = U_I U_K`` (same
gates, opposite order). Both pieces of ``U`` are symmetric matrices, so this
is the exact transpose, and it is what makes the Haar-random version of the
protocol produce the Y-flipped depolarizing channel.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .circuit import Circuit, Gate, cx, gate_report, h, inverse, measure, reset, rx, rz, rzz, swap, x

MESSAGE_STATES = ("Z+", "Z-", "X+", "X-", "Y+", "Y-")
MEASURE_BASES = ("X", "Y", "Z")
INSERTIONS = ("swap", "reset")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class BkpParams:
    n: int = 3
    b: float = math.pi / 4
    J: float = math.pi / 4
    h: tuple[float, ...] = (0.0, 0.0, 0.0)
    T: int = 3

    def __post_init__(self):
        object.__setattr__(self, "h", tuple(float(v) for v in self.h))
        if self.n < 2:
            raise ConfigError("need n >= 2 qubits per side")
        if self.T < 0:
            raise ConfigError("T must be nonnegative")
        if len(self.h) != self.n:
            raise ConfigError(f"h has {len(self.h)} entries, expected {self.n}")

    @property
    def is_clifford(self) -> bool:
        quarter = math.pi / 4
        return (
            math.isclose(abs(self.b), quarter, abs_tol=1e-12)
            and math.isclose(abs(self.J), quarter, abs_tol=1e-12)
            and all(abs(v) < 1e-12 for v in self.h)
        )


def random_fields(n: int, seed: int) -> tuple[float, ...]:
    """On-site fields drawn uniformly from [-pi, pi)."""
    rng = np.random.default_rng(seed)
    return tuple(float(v) for v in rng.uniform(-math.pi, math.pi, size=n))


@dataclass(frozen=True)
class WitConfig:
    params: BkpParams = field(default_factory=BkpParams)
    g: float = math.pi / 2
    K: int | None = None
    insertion: str = "swap"
    message_state: str = "Z+"
    measure_basis: str = "Z"
    # flips the sign of the two-sided coupling
    coupling_sign: int = 1

    def __post_init__(self):
        if self.K is None:
            object.__setattr__(self, "K", self.params.n - 1)
        if not 1 <= self.K <= self.params.n - 1:
            raise ConfigError(f"K={self.K} outside 1..{self.params.n - 1}")
        if self.insertion not in INSERTIONS:
            raise ConfigError(f"insertion must be one of {INSERTIONS}")
        if self.message_state not in MESSAGE_STATES:
            raise ConfigError(f"message_state must be one of {MESSAGE_STATES}")
        if self.measure_basis not in MEASURE_BASES:
            raise ConfigError(f"measure_basis must be one of {MEASURE_BASES}")
        if self.coupling_sign not in (1, -1):
            raise ConfigError("coupling_sign must be +1 or -1")
        if not math.isfinite(self.g):
            raise ConfigError("g must be finite")

    @property
    def n(self) -> int:
        return self.params.n

    @property
    def qubit_count(self) -> int:
        return 2 * self.n + (1 if self.insertion == "swap" else 0)

    @property
    def output_qubit(self) -> int:
        return self.n

    @property
    def carriers(self) -> tuple[int, ...]:
        """Left-side carrier registers (0-based)."""
        return tuple(range(1, 1 + self.K))

    def with_(self, **changes) -> WitConfig:
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        p = d.pop("params")
        p["h"] = list(p["h"])
        return {**p, **d}

    @classmethod
    def from_dict(cls, d: dict) -> WitConfig:
        d = dict(d)
        n = int(d.pop("n", 3))
        h_val = d.pop("h", None)
        if h_val is None:
            h_val = [0.0] * n
        elif isinstance(h_val, (int, float)):
            h_val = [float(h_val)] * n
        params = BkpParams(
            n=n,
            b=float(d.pop("b", math.pi / 4)),
            J=float(d.pop("J", math.pi / 4)),
            h=tuple(h_val),
            T=int(d.pop("T", 3)),
        )
        known = {"g", "K", "insertion", "message_state", "measure_basis", "coupling_sign"}
        kwargs = {k: d[k] for k in known if k in d}
        if "g" in kwargs:
            kwargs["g"] = float(kwargs["g"])
        return cls(params=params, **kwargs)


def bkp_star(g: float = math.pi / 2, **changes) -> WitConfig:
    """The Clifford point b = J = pi/4, h = 0, n = 3, T = 3 with K = 2 carriers."""
    return WitConfig(
        params=BkpParams(n=3, b=math.pi / 4, J=math.pi / 4, h=(0.0, 0.0, 0.0), T=3), g=g, K=2, **changes
    )


BKP_STAR = bkp_star()


def save_config(config: WitConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")


def load_config(path: str | Path) -> WitConfig:
    return WitConfig.from_dict(json.loads(Path(path).read_text()))


# -- circuit builders --------------------------------------------------------


def _on(qubits: Sequence[int] | None, n: int) -> list[int]:
    qs = list(range(n)) if qubits is None else list(qubits)
    if len(qs) != n:
        raise ConfigError(f"need {n} qubit labels, got {len(qs)}")
    return qs


def build_kick(n: int, b: float, qubits: Sequence[int] | None = None, width: int | None = None) -> Circuit:
    """exp(+i b sum X_j) as RX(-2b) on each site."""
    qs = _on(qubits, n)
    return Circuit(width or max(qs) + 1, [rx(-2 * b, q) for q in qs])


def build_ising(
    n: int, J: float, h: Sequence[float], qubits: Sequence[int] | None = None, width: int | None = None
) -> Circuit:
    """exp(+i J sum Z_j Z_{j+1} + i sum h_j Z_j) on an open chain."""
    if len(h) != n:
        raise ConfigError(f"h has {len(h)} entries, expected {n}")
    if n < 2:
        raise ConfigError("Ising layer needs n >= 2")
    qs = _on(qubits, n)
    gates: list[Gate] = [rzz(-2 * J, qs[j], qs[j + 1]) for j in range(n - 1) if J != 0]
    gates += [rz(-2 * hj, q) for hj, q in zip(h, qs) if hj != 0]
    return Circuit(width or max(qs) + 1, gates)


def build_step(
    params: BkpParams, qubits: Sequence[int] | None = None, width: int | None = None, transposed: bool = False
) -> Circuit:
    """One step U = U_K U_I (Ising layer first in time), or its transpose U_I U_K."""
    kick = build_kick(params.n, params.b, qubits, width)
    ising = build_ising(params.n, params.J, params.h, qubits, width)
    return (kick + ising) if transposed else (ising + kick)


def build_evolution(
    params: BkpParams, qubits: Sequence[int] | None = None, width: int | None = None, transposed: bool = False
) -> Circuit:
    step = build_step(params, qubits, width, transposed)
    wide = width or (max(_on(qubits, params.n)) + 1)
    return Circuit(wide, step.gates * params.T)


def build_coupling(
    n: int,
    K: int,
    g: float,
    left: Sequence[int] | None = None,
    right: Sequence[int] | None = None,
    width: int | None = None,
    sign: int = 1,
) -> Circuit:
    """exp(i g V), V = (1/K) sum_j Z_{j,L} Z_{j,R} over carriers j = 1..K."""
    if not 1 <= K <= n - 1:
        raise ConfigError(f"K={K} outside 1..{n - 1}")
    left = list(range(n)) if left is None else list(left)
    right = list(range(n, 2 * n)) if right is None else list(right)
    gates = [rzz(-2 * sign * g / K, left[j], right[j]) for j in range(1, K + 1)]
    return Circuit(width or max(left + right) + 1, gates)


def prepare_message(state: str, q: int) -> list[Gate]:
    """Gates taking |0> to the cardinal state ``state`` on qubit ``q``."""
    return {
        "Z+": [],
        "Z-": [x(q)],
        "X+": [h(q)],
        "X-": [x(q), h(q)],
        "Y+": [rx(-math.pi / 2, q)],
        "Y-": [rx(math.pi / 2, q)],
    }[state]


def basis_change(basis: str, q: int) -> list[Gate]:
    """Rotation so that a Z measurement afterwards reads out ``basis``."""
    return {"Z": [], "X": [h(q)], "Y": [rx(math.pi / 2, q)]}[basis]


def build_bell_pairs(n: int, width: int) -> list[Gate]:
    gates: list[Gate] = []
    for j in range(n):
        gates += [h(j), cx(j, n + j)]
    return gates


def build_wit(config: WitConfig, measure_output: bool = True) -> Circuit:
    """Full teleportation circuit for ``config``.

    Order: Bell pairs, left backward evolution, message insertion, left
    forward evolution, two-sided coupling, right forward evolution, output
    measurement.
    """
    n, p = config.n, config.params
    width = config.qubit_count
    left, right = list(range(n)), list(range(n, 2 * n))
    gates: list[Gate] = []
    if config.insertion == "swap":
        ancilla = 2 * n
        gates += prepare_message(config.message_state, ancilla)
    gates += build_bell_pairs(n, width)
    forward = build_evolution(p, left, width)
    gates += inverse(forward).gates
    if config.insertion == "swap":
        gates.append(swap(ancilla, left[0]))
    else:
        gates.append(reset(left[0]))
        gates += prepare_message(config.message_state, left[0])
    gates += forward.gates
    gates += build_coupling(n, config.K, config.g, left, right, width, config.coupling_sign).gates
    gates += build_evolution(p, right, width, transposed=True).gates
    out = config.output_qubit
    if measure_output:
        gates += basis_change(config.measure_basis, out)
        gates.append(measure(out, 0))
    return Circuit(width, gates, 1 if measure_output else 0)


def high_level_report(config: WitConfig) -> dict:
    report = gate_report(build_wit(config))
    return {
        "qubits_per_side": config.n,
        "time_steps": config.params.T,
        "insertion": config.insertion,
        "qubits": config.qubit_count,
        "carriers": config.K,
        "gates": report.as_dict(),
    }


def format_report(config: WitConfig) -> str:
    r = high_level_report(config)
    counts = ", ".join(f"{k}: {v}" for k, v in r["gates"]["counts"].items())
    return (
        f"Qubits per side:  {r['qubits_per_side']}\n"
        f"Time steps:  {r['time_steps']}\n"
        f"Message insertion method:  {r['insertion']}\n"
        f"Total qubits:  {r['qubits']}\n"
        f"Gates: {counts} (depth {r['gates']['depth']}, size {r['gates']['size']})\n"
    )
