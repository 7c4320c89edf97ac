from __future__ import annotations

import math

import numpy as np
import pytest

from witlab.bkp import BKP_STAR, build_wit
from witlab.circuit import Circuit, cx, h, measure, reset, rx, ry
from witlab.noise import (
    NoiseError,
    NoiseModel,
    expectation_from_counts,
    is_clifford,
    noisy_bits,
    noisy_sample,
    symmetric_readout,
    z_variance,
)
from witlab.statevector import SimulationError, exact_distribution
from witlab.transpiler import decompose


def bell() -> Circuit:
    return Circuit(2, [h(0), cx(0, 1), measure(0, 0), measure(1, 1)], 2)


def zz(hist) -> float:
    total = sum(hist.values())
    return sum(v * (1 if k[0] == k[1] else -1) for k, v in hist.items()) / total


def within(value: float, target: float, shots: int, k: float = 4.0) -> bool:
    sigma = math.sqrt(max(1 - target * target, 1e-12) / shots)
    return abs(value - target) < k * sigma


@pytest.mark.parametrize("name, kwargs", [("p1", {"p1": 1.2}), ("p2", {"p2": -0.1}), ("prep", {"prep_excite": 2})])
def test_probabilities_validated(name, kwargs):
    with pytest.raises(NoiseError):
        NoiseModel(**kwargs)


def test_confusion_columns_must_sum_to_one():
    with pytest.raises(NoiseError):
        NoiseModel(readout=((0.9, 0.1), (0.2, 0.8)))


def test_representative_model():
    m = NoiseModel.representative()
    assert (m.p1, m.p2, m.prep_excite) == (0.001, 0.01, 0.01)
    assert m.readout == symmetric_readout(0.02)
    assert not m.is_noiseless
    assert NoiseModel.noiseless().is_noiseless


@pytest.mark.parametrize("backend", ["frame", "trajectory"])
def test_noiseless_reduction(backend):
    shots = 50_000
    hist = noisy_sample(bell(), NoiseModel(), shots, seed=1, backend=backend)
    assert set(hist) <= {"00", "11"}
    assert within(hist.get("00", 0) / shots * 2 - 1, 0.0, shots)


def test_noiseless_wit_is_deterministic():
    hist = noisy_sample(build_wit(BKP_STAR), NoiseModel(), 1000, seed=0)
    assert hist == {"1": 1000}


@pytest.mark.parametrize("backend", ["frame", "trajectory"])
def test_full_depolarization_on_bell(backend):
    # a uniform non-identity 2q Pauli anticommutes with ZZ in 8 of 15 cases
    shots = 100_000
    value = zz(noisy_sample(bell(), NoiseModel(p2=1.0), shots, seed=2, backend=backend))
    assert within(value, -1 / 15, shots)
    assert abs(value) < 0.02 + 1 / 15


def test_readout_confusion():
    shots = 200_000
    M = ((0.98, 0.05), (0.02, 0.95))
    hist = noisy_sample(Circuit(1, [measure(0, 0)], 1), NoiseModel(readout=M), shots, seed=3)
    p1 = hist.get("1", 0) / shots
    assert abs(p1 - 0.02) < 4 * math.sqrt(0.02 * 0.98 / shots)
    hist = noisy_sample(Circuit(1, [rx(math.pi, 0), measure(0, 0)], 1), NoiseModel(readout=M), shots, seed=3)
    assert abs(hist.get("0", 0) / shots - 0.05) < 4 * math.sqrt(0.05 * 0.95 / shots)


def test_per_qubit_overrides():
    M = symmetric_readout(0.3)
    noise = NoiseModel(readout_per_qubit={1: M}, prep_per_qubit={0: 0.5})
    c = Circuit(2, [measure(0, 0), measure(1, 1)], 2)
    bits = noisy_bits(c, noise, 40_000, seed=4)
    assert abs(bits[:, 0].mean() - 0.5) < 0.02
    assert abs(bits[:, 1].mean() - 0.3) < 0.02


def test_prep_excitation():
    shots = 100_000
    bits = noisy_bits(Circuit(3, [measure(q, q) for q in range(3)], 3), NoiseModel(prep_excite=0.05), shots, seed=5)
    assert np.all(np.abs(bits.mean(0) - 0.05) < 4 * math.sqrt(0.05 * 0.95 / shots))


@pytest.mark.parametrize("noise", [NoiseModel(p1=0.05, p2=0.1), NoiseModel(p2=0.2, prep_excite=0.1, readout=symmetric_readout(0.05))])
def test_frame_and_trajectory_agree(noise):
    c = decompose(build_wit(BKP_STAR), "superconducting")
    assert is_clifford(c)
    shots = 10_000
    a = expectation_from_counts(noisy_sample(c, noise, shots, seed=6, backend="frame"))
    b = expectation_from_counts(noisy_sample(c, noise, shots, seed=7, backend="trajectory"))
    assert abs(a - b) < 5 * math.sqrt(2 / shots)


def test_frame_backend_refuses_non_clifford():
    c = Circuit(1, [ry(0.3, 0), measure(0, 0)], 1)
    with pytest.raises(SimulationError):
        noisy_bits(c, NoiseModel(p1=0.1), 10, backend="frame")
    with pytest.raises(ValueError):
        noisy_bits(c, NoiseModel(), 10, backend="gpu")


def test_non_clifford_trajectory_matches_exact_when_noiseless():
    c = Circuit(2, [ry(0.7, 0), cx(0, 1), reset(0), ry(0.4, 0), measure(0, 0), measure(1, 1)], 2)
    exact = exact_distribution(c)
    shots = 100_000
    hist = noisy_sample(c, NoiseModel(), shots, seed=8)
    for k, p in exact.items():
        assert abs(hist.get(k, 0) / shots - p) < 5 * math.sqrt(p * (1 - p) / shots) + 1e-9


def test_single_qubit_depolarizing_attenuation():
    # |0> then X-or-Y-or-Z with probability p: <Z> = 1 - 4p/3
    p, shots = 0.3, 200_000
    c = Circuit(1, [rx(0.0, 0), measure(0, 0)], 1)
    z = expectation_from_counts(noisy_sample(c, NoiseModel(p1=p), shots, seed=9, backend="trajectory"))
    assert within(z, 1 - 4 * p / 3, shots)


def test_coherent_error_is_applied_after_cx():
    c = Circuit(2, [h(1), cx(0, 1), h(1), measure(1, 0)], 1)
    eps = 0.2
    z = expectation_from_counts(noisy_sample(c, NoiseModel(coherent_rz=eps), 200_000, seed=10))
    assert within(z, math.cos(eps), 200_000)


@pytest.mark.parametrize("backend", ["frame", "trajectory"])
def test_determinism(backend):
    noise = NoiseModel.representative()
    c = decompose(build_wit(BKP_STAR), "superconducting")
    a = noisy_bits(c, noise, 5000, seed=11, backend=backend)
    b = noisy_bits(c, noise, 5000, seed=11, backend=backend)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, noisy_bits(c, noise, 5000, seed=12, backend=backend))


def test_shots_required():
    with pytest.raises(ValueError):
        noisy_bits(bell(), NoiseModel(), 0)


def test_helpers():
    assert expectation_from_counts({"0": 3, "1": 1}) == 0.5
    assert z_variance(0.5, 100) == pytest.approx(0.0075)
    with pytest.raises(ValueError):
        expectation_from_counts({})


def test_dict_round_trip():
    m = NoiseModel(p1=0.01, p2=0.02, prep_excite=0.03, readout=symmetric_readout(0.04), coherent_rz=0.05)
    assert NoiseModel.from_dict(m.to_dict()) == m
    assert NoiseModel.from_dict({"readout": 0.1}).readout == symmetric_readout(0.1)
