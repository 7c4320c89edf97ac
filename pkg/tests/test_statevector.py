from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

import oracles
from witlab.circuit import Circuit, cx, h, inverse, measure, reset, rx, ry, rz, rzz, swap, sx, x
from witlab.pauli import PauliString
from witlab.statevector import (
    StateVector,
    apply_gate,
    circuit_unitary,
    exact_distribution,
    expectation,
    gate_matrix,
    mixed_reduced_state,
    run,
    sample,
    slot_expectation,
)


@pytest.mark.parametrize("theta", [0.0, 0.3, -1.7, math.pi])
@pytest.mark.parametrize(
    "make, generator",
    [(rx, oracles.X), (ry, oracles.Y), (rz, oracles.Z)],
)
def test_rotation_conventions(theta, make, generator):
    assert np.allclose(gate_matrix(make(theta, 0)), expm(-0.5j * theta * generator))


def test_rzz_convention():
    theta = 0.9
    assert np.allclose(gate_matrix(rzz(theta, 0, 1)), expm(-0.5j * theta * np.kron(oracles.Z, oracles.Z)))


def test_sx_is_sqrt_x():
    s = gate_matrix(sx(0))
    assert np.allclose(s @ s, oracles.X)
    assert np.allclose(s, np.exp(1j * math.pi / 4) * gate_matrix(rx(math.pi / 2, 0)))


@pytest.mark.parametrize("gate, qubits", [(cx(0, 2), [0, 2]), (cx(2, 0), [2, 0]), (swap(1, 2), [1, 2]), (rzz(0.4, 2, 0), [2, 0])])
def test_two_qubit_embedding_matches_oracle(gate, qubits):
    U = circuit_unitary(Circuit(3, [gate]))
    assert np.allclose(U, oracles.embed(gate_matrix(gate), qubits, 3))


def test_big_endian_ordering():
    psi = run(Circuit(3, [x(0)])).amplitudes
    assert psi[0b100] == 1


_gates = st.one_of(
    st.builds(rx, st.floats(-4, 4), st.integers(0, 3)),
    st.builds(ry, st.floats(-4, 4), st.integers(0, 3)),
    st.builds(h, st.integers(0, 3)),
    st.sampled_from([cx(0, 1), cx(3, 1), rzz(1.3, 0, 3), swap(2, 0)]),
)


@settings(max_examples=60, deadline=None)
@given(st.lists(_gates, max_size=15))
def test_norm_preserved_and_inverse_restores(gates):
    psi = StateVector.basis(4, 5).amplitudes
    start = psi
    for g in gates:
        psi = apply_gate(psi, g, 4)
        assert abs(np.linalg.norm(psi) - 1) < 1e-12
    back = run(Circuit(4, gates) + inverse(Circuit(4, gates)), initial=5).amplitudes
    assert np.allclose(back, start, atol=1e-10)


def test_identity_expectation_is_one():
    psi = run(Circuit(3, [h(0), cx(0, 1), ry(0.4, 2)]))
    assert expectation(psi, PauliString("III")) == 1.0


def test_bell_expectations():
    psi = run(Circuit(2, [h(0), cx(0, 1)]))
    assert expectation(psi, PauliString("ZZ")) == pytest.approx(1)
    assert expectation(psi, PauliString("XX")) == pytest.approx(1)
    assert expectation(psi, PauliString("YY", 2)) == pytest.approx(1)
    assert expectation(psi, PauliString("ZI")) == pytest.approx(0, abs=1e-12)


def test_non_hermitian_expectation_rejected():
    with pytest.raises(ValueError):
        expectation(run(Circuit(1)), PauliString("X", 1))


def test_exact_distribution_bell():
    d = exact_distribution(Circuit(2, [h(0), cx(0, 1), measure(0, 0), measure(1, 1)], 2))
    assert d == pytest.approx({"00": 0.5, "11": 0.5})


def test_reset_mixes_partner():
    c = Circuit(2, [h(0), cx(0, 1), reset(0)])
    rho = mixed_reduced_state(c, [1])
    assert np.allclose(rho, np.eye(2) / 2)
    assert np.allclose(mixed_reduced_state(c, [0]), np.diag([1, 0]))


def test_slot_expectation():
    assert slot_expectation({"0": 0.75, "1": 0.25}) == pytest.approx(0.5)
    assert slot_expectation({"01": 3, "11": 1}, slot=1) == pytest.approx(-1)


def test_sample_seeded_and_unbiased():
    psi = run(Circuit(1, [ry(2 * math.acos(math.sqrt(0.8)), 0)])).amplitudes
    a = sample(psi, [0], 100_000, seed=3)
    assert a == sample(psi, [0], 100_000, seed=3)
    assert a["0"] / 100_000 == pytest.approx(0.8, abs=4 * math.sqrt(0.16 / 100_000))


def test_sample_requires_shots():
    with pytest.raises(ValueError):
        sample(np.array([1, 0], dtype=complex), [0], 0)
