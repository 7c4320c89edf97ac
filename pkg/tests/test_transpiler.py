from __future__ import annotations

import math
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from witlab.bkp import BKP_STAR, build_wit
from witlab.circuit import Circuit, compact, cx, gate_report, h, measure, reset, rx, ry, rz, rzz, swap, sx, x, y, z
from witlab.noise import NoiseModel
from witlab.statevector import circuit_unitary, equal_up_to_phase, exact_distribution, gate_matrix
from witlab.topology import CouplingGraph, load_topology
from witlab.transpiler import (
    HEURISTICS,
    STRATEGIES,
    BasisGateSet,
    DecompositionError,
    Layout,
    LayoutError,
    RoutingError,
    decompose,
    format_report,
    image_is_connected,
    layout_init,
    optimize,
    random_layouts,
    rank_layouts,
    route,
    transpile,
    verify_equivalence,
)
from witlab.transpiler.basis import zyz_angles

BASES = ("superconducting", "trapped-ion")
ALLOWED = {"superconducting": {"rz", "sx", "x", "cx"}, "trapped-ion": {"rx", "ry", "rz", "rzz"}}
LOGICAL = [h(0), sx(0), x(0), y(0), z(0), rx(0.3, 0), ry(-1.1, 0), rz(2.2, 0), rx(math.pi / 2, 0), rx(-math.pi / 2, 0),
           cx(0, 1), cx(1, 0), swap(0, 1), rzz(0.7, 0, 1), rzz(-math.pi / 2, 1, 0)]  # fmt: skip


def kinds(c: Circuit) -> set[str]:
    return {g.kind for g in c.gates} - {"measure", "reset", "id"}


@pytest.mark.parametrize("basis", BASES)
@pytest.mark.parametrize("gate", LOGICAL, ids=lambda g: f"{g.kind}{g.qubits}")
def test_templates_preserve_unitary(basis, gate):
    c = Circuit(2, [gate])
    out = decompose(c, basis, optimize_result=False)
    assert kinds(out) <= ALLOWED[basis]
    assert equal_up_to_phase(circuit_unitary(out), circuit_unitary(c), 1e-10)


@pytest.mark.parametrize("basis", BASES)
def test_wit_decomposition_end_to_end(basis):
    c = build_wit(BKP_STAR, measure_output=False)
    out = decompose(c, basis)
    assert kinds(out) <= ALLOWED[basis]
    assert equal_up_to_phase(circuit_unitary(out), circuit_unitary(c), 1e-9)
    measured = decompose(build_wit(BKP_STAR), basis)
    assert exact_distribution(measured) == pytest.approx(exact_distribution(build_wit(BKP_STAR)))


def test_unknown_basis():
    with pytest.raises(ValueError):
        decompose(Circuit(1, [h(0)]), "photonic")
    with pytest.raises(DecompositionError):
        decompose(Circuit(2, [cx(0, 1)]), BasisGateSet("rz-rzz", frozenset({"rz", "rzz"})))


@settings(max_examples=100, deadline=None)
@given(st.floats(-math.pi, math.pi), st.floats(0, math.pi), st.floats(-math.pi, math.pi))
def test_zyz_round_trip(a, b, c):
    u = gate_matrix(rz(a, 0)) @ gate_matrix(ry(b, 0)) @ gate_matrix(rz(c, 0))
    phi, theta, lam = zyz_angles(u)
    v = gate_matrix(rz(phi, 0)) @ gate_matrix(ry(theta, 0)) @ gate_matrix(rz(lam, 0))
    assert equal_up_to_phase(u, v, 1e-9)


def test_optimize_cancels_and_merges():
    c = Circuit(2, [cx(0, 1), cx(0, 1), rz(0.2, 0), rz(0.3, 0), x(1), x(1), rz(0.5, 1), rz(-0.5, 1)])
    out = optimize(c)
    assert [(g.kind, g.qubits) for g in out.gates] == [("rz", (0,))]
    assert out.gates[0].theta == pytest.approx(0.5)


# -- layout -----------------------------------------------------------------------------------------


@pytest.mark.parametrize("strategy", STRATEGIES)
def test_layout_strategies_are_valid(strategy):
    graph = load_topology("heavy-hex-27")
    c = decompose(build_wit(BKP_STAR), "superconducting")
    lay = layout_init(c, graph, strategy)
    assert len(lay) == 7 and len(set(lay.physical)) == 7
    if strategy != "trivial":
        assert image_is_connected(lay, c, graph)


def test_noise_aware_avoids_poisoned_edge():
    graph = CouplingGraph.line(4).with_errors({(0, 1): 0.01, (1, 2): 0.5, (2, 3): 0.01})
    c = Circuit(2, [h(0), cx(0, 1), measure(1, 0)], 1)
    greedy = layout_init(c, graph, "degree_greedy")
    aware = layout_init(c, graph, "noise_aware")
    assert {greedy[0], greedy[1]} == {1, 2}
    assert {aware[0], aware[1]} != {1, 2} and graph.has_edge(aware[0], aware[1])
    res = transpile(c, graph, layout_strategy="noise_aware", heuristic="greedy_path")
    assert all({*g.qubits} != {1, 2} for g in res.circuit.gates if g.kind == "cx")


def test_layout_errors():
    with pytest.raises(LayoutError):
        Layout((0, 0))
    with pytest.raises(LayoutError):
        layout_init(build_wit(BKP_STAR), CouplingGraph.line(5))
    with pytest.raises(LayoutError):
        layout_init(Circuit(1), CouplingGraph.line(2), "magic")


def test_random_layouts_connected_and_seeded():
    graph = load_topology("heavy-hex-27")
    c = build_wit(BKP_STAR)
    a = random_layouts(7, graph, 10, seed=3)
    assert a == random_layouts(7, graph, 10, seed=3)
    assert a != random_layouts(7, graph, 10, seed=4)
    assert all(image_is_connected(lay, c, graph) for lay in a)


def test_layout_text():
    assert Layout((4, 2)).to_text() == "{q[0]:n[4], q[1]:n[2]}"


# -- routing -------------------------------------------------------------------------------------------


@pytest.mark.parametrize("heuristic", HEURISTICS)
def test_distance_two_needs_one_swap(heuristic):
    c = Circuit(3, [h(0), cx(0, 2)])
    r = route(c, CouplingGraph.line(3), Layout((0, 1, 2)), heuristic, passes=0)
    assert r.swaps == 1
    assert not r.coupling_violations(CouplingGraph.line(3))
    assert verify_equivalence(c, r)


@pytest.mark.parametrize("heuristic", HEURISTICS)
def test_all_to_all_needs_no_swaps(heuristic):
    graph = CouplingGraph.all_to_all(7)
    c = decompose(build_wit(BKP_STAR), "superconducting")
    r = route(c, graph, Layout(tuple(range(7))), heuristic)
    assert r.swaps == 0
    assert gate_report(r.circuit).count("cx") == gate_report(c).count("cx")


def test_absorbed_logical_swaps_emit_no_gates():
    c = Circuit(2, [h(0), swap(0, 1), measure(0, 0)], 1)
    r = route(c, CouplingGraph.line(2), Layout((0, 1)), "greedy_path", absorb_swaps=True)
    assert not any(g.kind == "swap" for g in r.circuit.gates)
    assert r.final_layout.physical == (1, 0)
    assert verify_equivalence(c, r)


def test_corrupted_swap_is_detected():
    c = Circuit(4, [h(0), cx(0, 3), ry(0.4, 1), cx(1, 3)])
    graph = CouplingGraph.line(4)
    r = route(c, graph, Layout((0, 1, 2, 3)), "greedy_path")
    assert verify_equivalence(c, r)
    gates = list(r.circuit.gates)
    k = next(i for i, g in enumerate(gates) if g.kind == "swap")
    a, b = gates[k].qubits
    other = next(e for e in sorted(graph.edges) if set(e) != {a, b})
    gates[k] = swap(*other)
    bad = replace(r, circuit=Circuit(r.circuit.qubit_count, gates, r.circuit.classical_slots))
    assert verify_equivalence(c, bad).status == "different"


def test_routing_rejects_bad_inputs():
    with pytest.raises(RoutingError):
        route(Circuit(2, [cx(0, 1)]), CouplingGraph.line(2), Layout((0, 1)), "astar")
    with pytest.raises(Exception):
        route(Circuit(3, [cx(0, 1)]), CouplingGraph.line(2), Layout((0, 1)))


@pytest.mark.parametrize("heuristic", HEURISTICS)
@pytest.mark.parametrize("topology", ["heavy-hex-27", "square-15", "line-10"])
def test_routed_statistics_match(heuristic, topology):
    graph = load_topology(topology)
    logical = build_wit(BKP_STAR)
    res = transpile(logical, graph, heuristic=heuristic, trials=2, seed=1)
    assert res.verification
    assert not res.routed.coupling_violations(graph)
    assert all(graph.has_edge(*g.qubits) for g in res.circuit.gates if g.arity == 2)
    want = exact_distribution(logical)
    got = exact_distribution(compact(res.circuit)[0])
    assert sum(p for k, p in got.items() if k not in want) < 1e-9
    for key, p in want.items():
        assert abs(got.get(key, 0) - p) < 1e-9


def test_routing_with_mid_circuit_reset():
    graph = CouplingGraph.line(4)
    c = Circuit(3, [h(0), cx(0, 2), reset(0), ry(0.4, 0), cx(0, 1), measure(1, 0), measure(2, 1)], 2)
    res = transpile(c, graph, layout=Layout((0, 1, 3)), heuristic="greedy_path")
    assert res.verification
    got = exact_distribution(compact(res.circuit)[0])
    for k, p in exact_distribution(c).items():
        assert abs(got.get(k, 0) - p) < 1e-9


# -- transpile --------------------------------------------------------------------------------------------


def test_transpile_deterministic_and_worker_invariant():
    graph = load_topology("heavy-hex-27")
    c = build_wit(BKP_STAR)
    a = transpile(c, graph, trials=4, seed=5)
    b = transpile(c, graph, trials=4, seed=5)
    w = transpile(c, graph, trials=4, seed=5, workers=2)
    assert a.circuit == b.circuit == w.circuit
    assert a.trial_cx == w.trial_cx and a.trial == w.trial
    assert a.entanglers == min(a.trial_cx)


def test_trapped_ion_on_all_to_all():
    graph = load_topology("all-to-all-10")
    res = transpile(build_wit(BKP_STAR), graph, basis="trapped-ion", trials=2)
    assert res.routed.swaps == 0
    assert kinds(res.circuit) <= ALLOWED["trapped-ion"]
    assert res.verification
    n_rzz = gate_report(res.circuit).count("rzz")
    text = format_report({"wit": res}, graph)
    assert f"{n_rzz} RZZ" in text and "43" in text and "20" in text


def test_transpile_rejects_zero_trials():
    with pytest.raises(ValueError):
        transpile(build_wit(BKP_STAR), CouplingGraph.all_to_all(7), trials=0)


# -- layout ranking ---------------------------------------------------------------------------------------


def small_circuit() -> Circuit:
    return Circuit(2, [ry(0.7, 0), cx(0, 1), measure(1, 0)], 1)


def test_rank_noiseless_ties_broken_by_cx():
    graph = CouplingGraph.line(4)
    cands = [Layout((0, 3)), Layout((0, 1)), Layout((2, 0))]
    ranked = rank_layouts(small_circuit(), graph, NoiseModel(), cands)
    assert all(c.deviation < 1e-12 for c in ranked)
    assert [c.index for c in ranked] == [1, 2, 0]
    assert [c.cx for c in ranked] == sorted(c.cx for c in ranked)


def test_rank_prefers_layout_without_extra_swaps():
    graph = CouplingGraph.line(4)
    cands = [Layout((0, 3)), Layout((1, 2))]  # the first needs two SWAPs
    noise = NoiseModel(p1=0.001, p2=0.02)
    first = [rank_layouts(small_circuit(), graph, noise, cands, shots=8192, seed=s)[0].index for s in range(20)]
    assert first.count(1) >= 19


def test_rank_layouts_reports_measured_node():
    graph = CouplingGraph.line(4)
    ranked = rank_layouts(small_circuit(), graph, NoiseModel(), [Layout((2, 3))])
    assert ranked[0].measured_nodes == (3,)
    with pytest.raises(ValueError):
        rank_layouts(small_circuit(), graph, NoiseModel(), [])
