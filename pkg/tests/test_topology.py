from __future__ import annotations

import json

import pytest

from witlab.topology import BUILTIN, CouplingGraph, TopologyError, load_topology, parse_topology, save_topology


@pytest.mark.parametrize("name, nodes, edges", [("heavy-hex-27", 27, 28), ("square-15", 15, 20), ("line-10", 10, 9), ("all-to-all-10", 10, 45)])
def test_builtins(name, nodes, edges):
    g = load_topology(name)
    assert name in BUILTIN
    assert (g.node_count, len(g.edges)) == (nodes, edges)
    assert g.is_connected()


def test_heavy_hex_degrees():
    g = load_topology("heavy-hex-27")
    assert max(g.degree(q) for q in range(27)) == 3


def test_line_distances_and_paths():
    g = CouplingGraph.line(5)
    assert g.distance(0, 4) == 4
    assert g.shortest_path(0, 3) == [0, 1, 2, 3]
    assert g.has_edge(2, 1) and not g.has_edge(0, 2)
    assert g.neighbors[2] == (1, 3)


def test_all_to_all():
    g = CouplingGraph.all_to_all(4)
    assert all(g.distance(a, b) == 1 for a in range(4) for b in range(4) if a != b)


def test_disconnected_path_error():
    g = CouplingGraph(4, frozenset({(0, 1), (2, 3)}))
    assert not g.is_connected()
    assert g.is_connected([0, 1])
    with pytest.raises(TopologyError):
        g.shortest_path(0, 3)


def test_edge_errors_symmetric():
    g = CouplingGraph.line(3).with_errors({(1, 0): 0.02})
    assert g.error(0, 1) == g.error(1, 0) == 0.02
    assert g.error(1, 2) == 0.0


@pytest.mark.parametrize("name", BUILTIN)
def test_round_trip(name, tmp_path):
    g = load_topology(name)
    path = tmp_path / f"{name}.json"
    save_topology(g, path)
    h = load_topology(path)
    assert (h.node_count, h.edges, h.edge_error, h.node_error) == (g.node_count, g.edges, g.edge_error, g.node_error)


def test_round_trip_with_errors(tmp_path):
    g = CouplingGraph.line(4).with_errors({(0, 1): 0.01, (3, 2): 0.05}, {2: 0.003})
    save_topology(g, tmp_path / "t.json")
    h = load_topology(tmp_path / "t.json")
    assert h.error(2, 3) == 0.05 and h.node_error == {2: 0.003}


def test_edge_error_key_order_is_free():
    g = parse_topology('{"nodes": 2, "edges": [[0, 1]], "edge_error": {"1-0": 0.1}}')
    assert g.error(0, 1) == 0.1


@pytest.mark.parametrize(
    "text, line, fragment",
    [
        ('{\n "nodes": 3,\n "edges": [[0, 1],\n  [1, 7]]\n}', 4, "invalid edge"),
        ('{\n "nodes": 3,\n "edges": [[0, 1],\n  [2, 2]]\n}', 4, "invalid edge"),
        ('{\n "nodes": -2,\n "edges": []\n}', 2, "positive integer"),
        ('{\n "nodes": 3,\n "edges": [[0, 1]],\n "edge_error": {"1-2": 0.1}\n}', 4, "missing edge"),
        ('{\n "nodes": 3,\n "edges": [[0, 1]],\n "edge_error": {"0-1": 1.5}\n}', None, "outside [0, 1]"),
        ('{\n "nodes": 3,\n "edges": [[0, 1]\n', 4, ""),
        ('{\n "nodes": 3,\n "edges": [[0, "a"]]\n}', 3, "pair of integers"),
    ],
)
def test_schema_errors_name_the_line(text, line, fragment):
    with pytest.raises(TopologyError) as err:
        parse_topology(text)
    msg = str(err.value)
    assert fragment in msg
    if line is not None:
        assert msg.startswith(f"line {line}")


def test_missing_keys_and_unknown_name():
    with pytest.raises(TopologyError, match="needs"):
        parse_topology('{"nodes": 2}')
    with pytest.raises(TopologyError, match="unknown topology"):
        load_topology("no-such-device")


def test_corrupted_builtin_copy(tmp_path):
    doc = load_topology("line-10").to_dict()
    doc["edges"].append([3, 42])
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc, indent=1))
    with pytest.raises(TopologyError, match=r"^line \d+: invalid edge \[3, 42\]"):
        load_topology(path)
