"""Error mitigation: heralding, readout correction, randomized compiling,
estimation circuits and zero-noise extrapolation, plus the composed pipeline.

Pipeline order for each ZNE factor ``k``: fold every CX ``k`` times, twirl
the folded circuit into randomized-compiling instances (shots split across
them), herald and sample each instance under the noise model, drop heralded
shots, correct the output distribution for readout errors, and divide by
the noise factor measured with the matching estimation circuit. The
per-factor values are then extrapolated to zero noise.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from itertools import product
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit, minimize

from .bkp import WitConfig, build_wit
from .circuit import Circuit, Gate, active_qubits, cx, measure, ry, rz, x
from .noise import NoiseModel, noisy_bits
from .statevector import mixed_reduced_state


TWO_QUBIT_ENTANGLERS = frozenset({"cx", "rzz", "swap"})


class MitigationError(RuntimeError):
    pass


class EmptyResultError(MitigationError):
    pass


class ConditioningError(MitigationError):
    pass


class UnreliableEstimateError(MitigationError):
    pass


class MitigationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class MitigationConfig:
    heralding: bool = True
    readout_correction: bool = True
    rc_randomizations: int = 8
    estimation_circuits: bool = True
    zne_factors: tuple[int, ...] = (1, 3, 5)
    zne_fit: str = "linear"
    estimation_floor: float = 0.02
    calibration_shots: int | None = None

    def __post_init__(self):
        factors = tuple(int(f) for f in self.zne_factors)
        object.__setattr__(self, "zne_factors", factors)
        if not factors or factors[0] != 1:
            raise ValueError("zne_factors must start with 1")
        if any(b <= a for a, b in zip(factors, factors[1:])):
            raise ValueError("zne_factors must be strictly increasing")
        if any(f % 2 == 0 for f in factors):
            raise ValueError("zne_factors must be odd")
        if self.zne_fit not in ("linear", "exponential"):
            raise ValueError("zne_fit must be 'linear' or 'exponential'")
        if self.rc_randomizations < 0:
            raise ValueError("rc_randomizations must be >= 0")

    @classmethod
    def off(cls) -> MitigationConfig:
        return cls(False, False, 0, False, (1,))

    @property
    def enabled(self) -> bool:
        return (
            self.heralding
            or self.readout_correction
            or self.rc_randomizations > 0
            or self.estimation_circuits
            or len(self.zne_factors) > 1
        )

    def to_dict(self) -> dict:
        return {
            "heralding": self.heralding,
            "readout_correction": self.readout_correction,
            "rc_randomizations": self.rc_randomizations,
            "estimation_circuits": self.estimation_circuits,
            "zne_factors": list(self.zne_factors),
            "zne_fit": self.zne_fit,
            "estimation_floor": self.estimation_floor,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> MitigationConfig:
        known = {k: d[k] for k in cls().to_dict() if k in d}
        if "zne_factors" in known:
            known["zne_factors"] = tuple(known["zne_factors"])
        return cls(**known)


# -- heralding --------------------------------------------------------------------------------


def herald(circuit: Circuit) -> Circuit:
    """Prepend a measurement of every active qubit into new trailing slots."""
    qubits = active_qubits(circuit)
    s = circuit.classical_slots
    lead = [measure(q, s + i) for i, q in enumerate(qubits)]
    return Circuit(circuit.qubit_count, lead + list(circuit.gates), s + len(qubits))


@dataclass(frozen=True)
class HeraldResult:
    histogram: dict[str, int]
    kept: int
    total: int

    @property
    def retained_fraction(self) -> float:
        return self.kept / self.total if self.total else 0.0


def herald_filter(hist: Mapping[str, int], herald_slots: int) -> HeraldResult:
    """Drop shots whose trailing ``herald_slots`` bits are not all zero."""
    total = int(sum(hist.values()))
    out: dict[str, int] = {}
    for key, count in hist.items():
        body, tail = (key[:-herald_slots], key[-herald_slots:]) if herald_slots else (key, "")
        if "1" in tail:
            continue
        out[body] = out.get(body, 0) + int(count)
    kept = sum(out.values())
    if kept == 0:
        raise EmptyResultError(f"heralding discarded all {total} shots; preparation error too large")
    return HeraldResult(dict(sorted(out.items())), kept, total)


def _herald_bits(bits: np.ndarray, herald_slots: int) -> np.ndarray:
    if herald_slots == 0:
        return bits
    keep = ~bits[:, bits.shape[1] - herald_slots :].any(axis=1)
    if not keep.any():
        raise EmptyResultError(f"heralding discarded all {bits.shape[0]} shots; preparation error too large")
    return bits[keep, : bits.shape[1] - herald_slots]


# -- readout correction ------------------------------------------------------------------------


def calibration_circuit(qubits: Sequence[int], state: int, width: int) -> Circuit:
    k = len(qubits)
    gates = [x(q) for i, q in enumerate(qubits) if (state >> (k - 1 - i)) & 1]
    gates += [measure(q, i) for i, q in enumerate(qubits)]
    return Circuit(width, gates, k)


def readout_calibrate(
    noise: NoiseModel, qubits: Sequence[int], shots: int, seed=0, heralded: bool = False
) -> np.ndarray:
    """Response matrix R[i][j] = P(read i | prepared j) from 2**k calibration circuits."""
    qubits = list(qubits)
    k = len(qubits)
    if not 1 <= k <= 4:
        raise ValueError("readout calibration supports 1 to 4 qubits")
    width = max(qubits) + 1
    R = np.zeros((2**k, 2**k))
    for j in range(2**k):
        c = calibration_circuit(qubits, j, width)
        hs = 0
        if heralded:
            c, hs = herald(c), k
        bits = _herald_bits(noisy_bits(c, noise, shots, np.random.default_rng([_seed_int(seed), 7, j])), hs)
        idx = bits.astype(np.int64) @ (1 << np.arange(k - 1, -1, -1))
        R[:, j] = np.bincount(idx, minlength=2**k) / bits.shape[0]
    return R


def _seed_int(seed) -> int:
    if isinstance(seed, (int, np.integer)):
        return int(seed)
    raise TypeError("seed must be an integer")


def _as_vector(dist, k: int | None = None) -> np.ndarray:
    if isinstance(dist, Mapping):
        k = len(next(iter(dist))) if k is None else k
        p = np.zeros(2**k)
        for key, v in dist.items():
            p[int(key, 2) if key else 0] += v
        total = p.sum()
        if total <= 0:
            raise ValueError("empty distribution")
        return p / total
    p = np.asarray(dist, dtype=float)
    return p / p.sum()


def readout_correct(dist, R: np.ndarray, max_condition: float = 1e8) -> np.ndarray:
    """Corrected probabilities x with R x = p, x >= 0 and sum(x) = 1 (least squares if infeasible)."""
    R = np.asarray(R, dtype=float)
    dim = R.shape[0]
    p = _as_vector(dist, int(round(math.log2(dim))))
    if p.shape != (dim,):
        raise ValueError(f"distribution has {p.shape[0]} entries, response matrix {dim}")
    cond = np.linalg.cond(R)
    if not np.isfinite(cond) or cond > max_condition:
        raise ConditioningError(f"response matrix condition number {cond:.3g} exceeds {max_condition:.3g}")
    x = np.linalg.solve(R, p)
    if np.all(x >= -1e-12):
        x = np.clip(x, 0, None)
        return x / x.sum()
    res = minimize(
        lambda v: float(np.sum((R @ v - p) ** 2)),
        np.clip(x, 0, None) / max(np.clip(x, 0, None).sum(), 1e-300),
        jac=lambda v: 2 * R.T @ (R @ v - p),
        bounds=[(0.0, 1.0)] * dim,
        constraints=[{"type": "eq", "fun": lambda v: v.sum() - 1.0, "jac": lambda v: np.ones(dim)}],
        method="SLSQP",
        options={"ftol": 1e-15, "maxiter": 500},
    )
    x = np.clip(res.x, 0, None)
    return x / x.sum()


def z_from_probabilities(x: np.ndarray, bit: int = 0) -> float:
    k = int(round(math.log2(len(x))))
    signs = np.array([1 - 2 * ((i >> (k - 1 - bit)) & 1) for i in range(len(x))])
    return float(signs @ x)


def corrected_z_variance(p: np.ndarray, R: np.ndarray | None, shots: int, bit: int = 0) -> float:
    """Delta-method variance of <Z> after linear readout inversion."""
    k = int(round(math.log2(len(p))))
    signs = np.array([1 - 2 * ((i >> (k - 1 - bit)) & 1) for i in range(len(p))], dtype=float)
    a = signs if R is None else np.linalg.solve(np.asarray(R).T, signs)
    mean = float(a @ p)
    return max(0.0, float((a * a) @ p) - mean * mean) / max(shots, 1)


# -- randomized compiling -------------------------------------------------------------------------

_PAULI_GATES = {"I": None, "X": "x", "Y": "y", "Z": "z"}


def _cx_conjugate(a: str, b: str) -> tuple[str, str]:
    """CX (a (x) b) CX = a' (x) b' up to sign."""
    # symplectic action of CX: X_c -> X_c X_t, Z_t -> Z_c Z_t
    xc, zc = a in "XY", a in "ZY"
    xt, zt = b in "XY", b in "ZY"
    xt ^= xc
    zc ^= zt

    def letter(xb, zb):
        return {(0, 0): "I", (1, 0): "X", (1, 1): "Y", (0, 1): "Z"}[(int(xb), int(zb))]

    return letter(xc, zc), letter(xt, zt)


TWIRL_PAIRS: tuple[tuple[str, str, str, str], ...] = tuple(
    (a, b) + _cx_conjugate(a, b) for a, b in product("IXYZ", repeat=2)
)


def _pauli_gates(letter: str, q: int) -> list[Gate]:
    kind = _PAULI_GATES[letter]
    return [] if kind is None else [Gate(kind, (q,))]


def twirl_cx(control: int, target: int, frame: int) -> list[Gate]:
    """Five-gate twirled CX for frame index 0..15 (identity Paulis omitted)."""
    a, b, a2, b2 = TWIRL_PAIRS[frame]
    return (
        _pauli_gates(a, control)
        + _pauli_gates(b, target)
        + [cx(control, target)]
        + _pauli_gates(a2, control)
        + _pauli_gates(b2, target)
    )


def randomized_compile(circuit: Circuit, count: int, seed: int = 0) -> list[Circuit]:
    """``count`` Pauli-twirled copies of ``circuit``.

    Each CX gets an independent random permutation of the 16 frames, and
    instance i uses entry ``i mod 16``; any 16 consecutive instances
    therefore visit every frame at every CX exactly once.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng([_seed_int(seed), 11])
    cx_positions = [i for i, g in enumerate(circuit.gates) if g.kind == "cx"]
    perms = [rng.permutation(16) for _ in cx_positions]
    out = []
    for inst in range(count):
        gates: list[Gate] = []
        k = 0
        for g in circuit.gates:
            if g.kind == "cx":
                gates += twirl_cx(g.qubits[0], g.qubits[1], int(perms[k][inst % 16]))
                k += 1
            else:
                gates.append(g)
        out.append(Circuit(circuit.qubit_count, gates, circuit.classical_slots))
    return out


def with_coherent_errors(circuit: Circuit, eps: float) -> Circuit:
    """Explicit RZ(eps) on the target after every CX (the coherent error model, as gates)."""
    gates: list[Gate] = []
    for g in circuit.gates:
        gates.append(g)
        if g.kind == "cx":
            gates.append(rz(eps, g.qubits[1]))
    return Circuit(circuit.qubit_count, gates, circuit.classical_slots)


# -- estimation circuits ----------------------------------------------------------------------------


def _bloch_alignment(rho: np.ndarray, q: int) -> list[Gate]:
    """Rotations taking the Bloch vector of ``rho`` onto +Z."""
    bx = 2 * rho[0, 1].real
    by = -2 * rho[0, 1].imag
    bz = (rho[0, 0] - rho[1, 1]).real
    phi = math.atan2(by, bx)
    theta = math.atan2(math.hypot(bx, by), bz)
    gates = []
    if abs(phi) > 1e-12:
        gates.append(rz(-phi, q))
    if abs(theta) > 1e-12:
        gates.append(ry(-theta, q))
    return gates


def estimation_circuit(circuit: Circuit, align: bool = True) -> Circuit:
    """Replace every entangling gate with a noisy ``id`` placeholder of the same support.

    With ``align`` the measured qubits are first rotated so that their ideal
    (product, pure) state is |0>, which makes the ideal value +1 and the
    noise factor well defined even when the stripped circuit would read 0.
    """
    stripped = [Gate("id", g.qubits) if g.kind in TWO_QUBIT_ENTANGLERS else g for g in circuit.gates]
    if not align:
        return Circuit(circuit.qubit_count, stripped, circuit.classical_slots)
    out: list[Gate] = []
    prefix = Circuit(circuit.qubit_count, [], 0)
    for g in stripped:
        if g.kind == "measure":
            q = g.qubits[0]
            rho = mixed_reduced_state(prefix, [q])
            rot = _bloch_alignment(rho, q)
            out += rot
            prefix = prefix.extend(rot)
        out.append(g)
        if g.kind != "measure":
            prefix = prefix.extend([g])
    return Circuit(circuit.qubit_count, out, circuit.classical_slots)


def ideal_slot_expectation(circuit: Circuit, slot: int = 0) -> float:
    from .statevector import exact_distribution, slot_expectation

    return slot_expectation(exact_distribution(circuit), slot)


@dataclass(frozen=True)
class Estimation:
    f: float
    measured: float
    ideal: float
    shots: int


def estimation_estimate(
    circuit: Circuit,
    noise: NoiseModel,
    shots: int,
    seed=0,
    slot: int = 0,
    heralding: bool = False,
    R: np.ndarray | None = None,
    floor: float = 0.0,
) -> Estimation:
    """Noise factor f = measured / ideal on the (aligned) estimation circuit."""
    est = estimation_circuit(circuit)
    ideal = ideal_slot_expectation(est, slot)
    z, _, kept = _measure_z(est, noise, shots, np.random.default_rng([_seed_int(seed), 13]), slot, heralding, R)
    if abs(ideal) < max(floor, 1e-12):
        raise UnreliableEstimateError(f"ideal estimation value {ideal:.3g} is below the floor {floor}")
    f = z / ideal
    if abs(f) < floor:
        raise UnreliableEstimateError(f"noise factor {f:.4f} is below the floor {floor}")
    return Estimation(f, z, ideal, kept)


def estimation_correct(raw_expectation: float, f: float | Estimation, floor: float = 0.0) -> float:
    f = f.f if isinstance(f, Estimation) else float(f)
    if abs(f) < max(floor, 1e-300):
        raise UnreliableEstimateError(f"noise factor {f:.4f} is below the floor {floor}")
    return raw_expectation / f


# -- zero-noise extrapolation ---------------------------------------------------------------------


def zne_fold(circuit: Circuit, factor: int) -> Circuit:
    """Replace each CX by ``factor`` consecutive copies (odd factor keeps the unitary)."""
    if factor < 1 or factor % 2 == 0:
        raise ValueError("fold factor must be an odd integer >= 1")
    gates: list[Gate] = []
    for g in circuit.gates:
        gates += [g] * factor if g.kind == "cx" else [g]
    return Circuit(circuit.qubit_count, gates, circuit.classical_slots)


@dataclass(frozen=True)
class ZneFit:
    value: float
    fit: str
    params: tuple[float, ...]
    residuals: tuple[float, ...]
    weights: tuple[float, ...] = ()


def _linear(xs: np.ndarray, ys: np.ndarray) -> ZneFit:
    if len(xs) == 1:
        return ZneFit(float(ys[0]), "linear", (0.0, float(ys[0])), (0.0,), (1.0,))
    A = np.vstack([xs, np.ones_like(xs)]).T
    slope, intercept = np.linalg.lstsq(A, ys, rcond=None)[0]
    # intercept as a linear combination of the inputs, for error propagation
    weights = np.linalg.pinv(A)[1]
    res = ys - (slope * xs + intercept)
    return ZneFit(float(intercept), "linear", (float(slope), float(intercept)), tuple(map(float, res)), tuple(weights))


def zne_extrapolate(points: Sequence[tuple[float, float]], fit: str = "linear") -> ZneFit:
    """Extrapolate (factor, expectation) pairs to factor 0."""
    xs = np.array([p[0] for p in points], dtype=float)
    ys = np.array([p[1] for p in points], dtype=float)
    if fit == "linear" or len(xs) < 3:
        return _linear(xs, ys)
    if fit != "exponential":
        raise ValueError(f"unknown fit {fit!r}")

    def model(v, a, b, c):
        return a * np.exp(-b * v) + c

    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            # exactly determined fits have no covariance; that is not a failure
            warnings.simplefilter("ignore", OptimizeWarning)
            lin = _linear(xs, ys)
            a0 = ys[0] - ys[-1] if ys[0] != ys[-1] else 1e-3
            params, _ = curve_fit(model, xs, ys, p0=(a0, 0.1, ys[-1]), maxfev=5000)
        value = float(model(0.0, *params))
        if not np.all(np.isfinite(params)) or not math.isfinite(value) or abs(value) > 10:
            raise RuntimeError("diverged")
        res = ys - model(xs, *params)
        return ZneFit(value, "exponential", tuple(map(float, params)), tuple(map(float, res)), lin.weights)
    except (RuntimeError, ValueError, Warning) as exc:
        warnings.warn(f"exponential ZNE fit failed ({exc}); falling back to linear", MitigationWarning)
        return _linear(xs, ys)


# -- pipeline --------------------------------------------------------------------------------------


def _measure_z(circuit, noise, shots, rng, slot, heralding, R):
    """Noisy <Z> of one slot: herald, sample, filter, readout-correct. Returns (z, variance, kept)."""
    c, hs = (herald(circuit), len(active_qubits(circuit))) if heralding else (circuit, 0)
    bits = _herald_bits(noisy_bits(c, noise, shots, rng), hs)
    col = bits[:, slot]
    kept = col.shape[0]
    p = np.array([kept - col.sum(), col.sum()], dtype=float) / kept
    if R is not None:
        x = readout_correct(p, R)
        return z_from_probabilities(x), corrected_z_variance(p, R, kept), kept
    z = float(p[0] - p[1])
    return z, corrected_z_variance(p, None, kept), kept


def _split_shots(shots: int, parts: int) -> list[int]:
    base, extra = divmod(shots, parts)
    return [base + (1 if i < extra else 0) for i in range(parts) if base + (1 if i < extra else 0) > 0]


@dataclass
class FactorDiagnostics:
    factor: int
    expectation: float
    variance: float
    retained_fraction: float
    f: float | None = None
    f_variance: float | None = None
    corrected: float | None = None
    warning: str | None = None


@dataclass
class PipelineResult:
    raw: float
    raw_variance: float
    mitigated: float | None
    mitigated_variance: float | None
    ideal: float | None
    shots: int
    factors: list[FactorDiagnostics] = field(default_factory=list)
    fit: ZneFit | None = None
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "raw": self.raw,
            "raw_variance": self.raw_variance,
            "mitigated": self.mitigated,
            "mitigated_variance": self.mitigated_variance,
            "ideal": self.ideal,
            "shots": self.shots,
            "factors": [vars(f) for f in self.factors],
            "fit": None
            if self.fit is None
            else {"fit": self.fit.fit, "value": self.fit.value, "params": self.fit.params, "residuals": self.fit.residuals},
            "warnings": list(self.warnings),
        }


def run_mitigated(
    circuit: Circuit,
    noise: NoiseModel,
    mitigation: MitigationConfig,
    shots: int,
    seed: int = 0,
    slot: int = 0,
    ideal: float | None = None,
) -> PipelineResult:
    """Raw and mitigated <Z> of ``slot`` for an arbitrary (physical) circuit."""
    seed = _seed_int(seed)
    raw_bits = noisy_bits(circuit, noise, shots, np.random.default_rng([seed, 1]))
    col = raw_bits[:, slot]
    raw = float(1 - 2 * col.mean())
    raw_var = max(0.0, 1 - raw * raw) / shots
    if not mitigation.enabled:
        return PipelineResult(raw, raw_var, None, None, ideal, shots)

    measured_q = next(g.qubits[0] for g in reversed(circuit.gates) if g.kind == "measure" and g.slot == slot)
    R = None
    if mitigation.readout_correction:
        cal_shots = mitigation.calibration_shots or shots
        R = readout_calibrate(noise, [measured_q], cal_shots, seed * 1009 + 3, heralded=mitigation.heralding)

    result = PipelineResult(raw, raw_var, None, None, ideal, shots)
    points = []
    variances = []
    for fi, factor in enumerate(mitigation.zne_factors):
        folded = zne_fold(circuit, factor)
        if mitigation.rc_randomizations > 0:
            instances = randomized_compile(folded, mitigation.rc_randomizations, seed * 31 + fi)
        else:
            instances = [folded]
        kept_total, retained = 0, 0
        probs = np.zeros(2)
        for ii, (inst, n) in enumerate(zip(instances, _split_shots(shots, len(instances)))):
            c, hs = (herald(inst), len(active_qubits(inst))) if mitigation.heralding else (inst, 0)
            bits = noisy_bits(c, noise, n, np.random.default_rng([seed, 2, fi, ii]))
            total = bits.shape[0]
            bits = _herald_bits(bits, hs)
            kept_total += bits.shape[0]
            retained += total
            ones = bits[:, slot].sum()
            probs += [bits.shape[0] - ones, ones]
        p = probs / probs.sum()
        if R is not None:
            z = z_from_probabilities(readout_correct(p, R))
        else:
            z = float(p[0] - p[1])
        var = corrected_z_variance(p, R, kept_total)
        diag = FactorDiagnostics(factor, z, var, kept_total / retained)
        value, value_var = z, var
        if mitigation.estimation_circuits:
            try:
                est = estimation_estimate(
                    folded,
                    noise,
                    shots,
                    seed * 7919 + fi,
                    slot,
                    mitigation.heralding,
                    R,
                    mitigation.estimation_floor,
                )
                f_var = max(0.0, 1 - est.measured**2) / est.shots / est.ideal**2
                value = estimation_correct(z, est, mitigation.estimation_floor)
                value_var = var / est.f**2 + z * z * f_var / est.f**4
                diag.f, diag.f_variance, diag.corrected = est.f, f_var, value
            except UnreliableEstimateError as exc:
                msg = f"factor {factor}: {exc}; using the uncorrected value"
                warnings.warn(msg, MitigationWarning)
                diag.warning = msg
                result.warnings.append(msg)
        points.append((factor, value))
        variances.append(value_var)
        result.factors.append(diag)

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", MitigationWarning)
        fit = zne_extrapolate(points, mitigation.zne_fit)
    result.warnings += [str(w.message) for w in caught]
    result.fit = fit
    result.mitigated = fit.value
    w = np.array(fit.weights) if fit.weights else np.ones(1)
    result.mitigated_variance = float(np.sum(w**2 * np.array(variances[: len(w)])))
    return result


def pipeline(
    config: WitConfig,
    noise: NoiseModel,
    mitigation: MitigationConfig,
    shots: int,
    seed: int = 0,
    circuit: Circuit | None = None,
) -> PipelineResult:
    """Raw and mitigated output <Z> of the protocol.

    ``circuit`` may be a transpiled version of ``build_wit(config)``; by
    default the circuit is decomposed into the superconducting basis (so
    every entangler is a CX that twirling and folding act on) without routing.
    """
    from .diagnostics import bloch, output_state
    from .transpiler.basis import decompose

    ideal_vec = bloch(output_state(config))
    ideal = {"X": ideal_vec[0], "Y": ideal_vec[1], "Z": ideal_vec[2]}[config.measure_basis]
    circuit = decompose(build_wit(config), "superconducting") if circuit is None else circuit
    return run_mitigated(circuit, noise, mitigation, shots, seed, 0, ideal)
