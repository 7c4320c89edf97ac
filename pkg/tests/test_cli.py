from __future__ import annotations

import json
import math

import pytest

from witlab.cli import EXIT_CONFIG, EXIT_OK, main
from witlab.experiment import ConfigError, ExperimentConfig, SweepSpec, load_experiment, load_sweep, parse_angle
from witlab.noise import NoiseModel
from witlab.topology import load_topology, save_topology

DATA_SUFFIXES = (".csv", ".txt", ".json")


def run(tmp_path, *args):
    return main([*args, "--quiet", "--out", str(tmp_path)])


@pytest.mark.parametrize(
    "text, value",
    [("pi/2", math.pi / 2), ("3pi/4", 3 * math.pi / 4), ("3*pi/4", 3 * math.pi / 4), ("-π", -math.pi), ("0.25", 0.25), ("pi", math.pi)],
)
def test_parse_angle(text, value):
    assert parse_angle(text) == pytest.approx(value)


@pytest.mark.parametrize("text", ["pie", "pi/", "2x", ""])
def test_parse_angle_rejects(text):
    with pytest.raises(ConfigError):
        parse_angle(text)


def test_config_round_trip_and_hash(tmp_path):
    cfg = ExperimentConfig(noise=NoiseModel.representative(), sweep=SweepSpec(points=5), seed=4, layout=(1, 2, 3, 4, 5, 6, 7))
    assert ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg
    assert cfg.hash() == cfg.with_(out="elsewhere", workers=4).hash()
    assert cfg.hash() != cfg.with_(seed=5).hash()
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert load_experiment(path) == cfg


@pytest.mark.parametrize("doc", ['{"shots": 0}', '{"colour": 1}', '{"noise": "loud"}', "[1, 2]", "{bad json"])
def test_bad_configs_rejected(tmp_path, doc):
    path = tmp_path / "c.json"
    path.write_text(doc)
    with pytest.raises(ConfigError):
        load_experiment(path)
    assert main(["sweep", "--config", str(path), "--quiet", "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_help_and_bad_flag(capsys):
    assert main(["--help"]) == EXIT_OK
    assert "sweep" in capsys.readouterr().out
    assert main(["sweep", "--frobnicate"]) == EXIT_CONFIG
    assert main(["teleport"]) == EXIT_CONFIG


def test_single_point_half_pi(tmp_path):
    assert run(tmp_path, "sweep", "--points", "1", "--g", "pi/2", "--shots", "500") == EXIT_OK
    rows = [r for r in (tmp_path / "sweep_aggregate.csv").read_text().splitlines() if not r.startswith("#")]
    assert len(rows) == 2
    fields = dict(zip(rows[0].split(","), rows[1].split(",")))
    assert float(fields["g"]) == pytest.approx(math.pi / 2)
    assert float(fields["ideal_z"]) == pytest.approx(-1, abs=1e-12)
    assert float(fields["raw_mean"]) == -1.0


def test_points_must_agree_with_values(tmp_path, capsys):
    assert run(tmp_path, "sweep", "--points", "3", "--g", "pi/2") == EXIT_CONFIG
    assert "disagrees" in capsys.readouterr().err


def test_corrupted_topology(tmp_path, capsys):
    doc = load_topology("heavy-hex-27").to_dict()
    doc["edges"][4] = [4, 99]
    path = tmp_path / "broken.json"
    path.write_text(json.dumps(doc, indent=1))
    assert run(tmp_path / "o", "transpile", "--topology", str(path)) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "line " in err and "invalid edge [4, 99]" in err


def test_non_clifford_operators_unsupported(tmp_path, capsys):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"wit": {"J": 0.2}}))
    assert main(["operators", "--config", str(path), "--quiet", "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "unsupported" in capsys.readouterr().err


def test_transpile_writes_report(tmp_path):
    assert run(tmp_path, "transpile", "--topology", "square-15", "--trials", "2") == EXIT_OK
    report = (tmp_path / "transpile_report.txt").read_text()
    assert "verification: equivalent" in report
    assert json.loads((tmp_path / "config.json").read_text())["topology"] == "square-15"


def test_every_data_file_has_header(tmp_path):
    runs = {
        "sweep": ["sweep", "--points", "2", "--shots", "200"],
        "tomo": ["tomography", "--g", "pi/2"],
        "ops": ["operators"],
        "tr": ["transpile", "--topology", "line-10"],
        "rank": ["rank-layouts", "--candidates", "2", "--shots", "200"],
    }
    for name, args in runs.items():
        out = tmp_path / name
        assert run(out, *args) == EXIT_OK
        cfg_hash = ExperimentConfig.from_dict(json.loads((out / "config.json").read_text())).hash()
        meta = json.loads((out / "metadata.json").read_text())
        assert meta["config_hash"] == cfg_hash
        for f in out.iterdir():
            if f.name in ("metadata.json", "config.json") or f.suffix not in DATA_SUFFIXES:
                continue
            if f.suffix == ".json":
                assert json.loads(f.read_text())["config_hash"] == cfg_hash, f.name
            else:
                assert f.read_text().startswith(f"# config_hash={cfg_hash} seed=0\n"), f.name


def test_tomography_half_pi(tmp_path):
    assert run(tmp_path, "tomography", "--g", "pi/2") == EXIT_OK
    R = json.loads((tmp_path / "ptm.json").read_text())["ptms"][0]["R"]
    want = [[1, 0, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0], [0, 0, 0, -1]]
    assert all(abs(a - b) < 1e-9 for ra, rb in zip(R, want) for a, b in zip(ra, rb))


def test_load_sweep_checks_aggregates(tmp_path):
    assert run(tmp_path, "sweep", "--points", "3", "--retrials", "2", "--shots", "300", "--noise", "representative") == EXIT_OK
    res = load_sweep(tmp_path / "sweep.json", tol=1e-12)
    assert len(res.records) == 6 and len(res.aggregates) == 3
    data = json.loads((tmp_path / "sweep.json").read_text())
    data["aggregates"][1]["raw_mean"] += 0.1
    (tmp_path / "tampered.json").write_text(json.dumps(data))
    with pytest.raises(ValueError):
        load_sweep(tmp_path / "tampered.json")


def test_workers_do_not_change_results(tmp_path):
    args = ["sweep", "--points", "3", "--retrials", "2", "--shots", "500", "--noise", "representative", "--seed", "3"]
    assert run(tmp_path / "w1", *args, "--workers", "1") == EXIT_OK
    assert run(tmp_path / "w2", *args, "--workers", "2") == EXIT_OK
    for name in ("sweep_records.csv", "sweep_aggregate.csv", "sweep.json", "config.json"):
        assert (tmp_path / "w1" / name).read_text() == (tmp_path / "w2" / name).read_text()


def test_rank_layouts_select(tmp_path, capsys):
    assert run(tmp_path, "rank-layouts", "--candidates", "3", "--select", "2") == EXIT_OK
    chosen = json.loads((tmp_path / "selected_config.json").read_text())
    assert len(chosen["layout"]) == 7
    assert run(tmp_path / "bad", "rank-layouts", "--candidates", "3", "--select", "7") == EXIT_CONFIG
    assert "no candidate numbered 7" in capsys.readouterr().err


def test_selected_config_reproduces_layout(tmp_path):
    assert run(tmp_path, "rank-layouts", "--candidates", "3", "--select", "0") == EXIT_OK
    chosen = load_experiment(tmp_path / "selected_config.json")
    assert chosen.layout is not None
    assert run(tmp_path / "t", "transpile", "--config", str(tmp_path / "selected_config.json"), "--topology", "heavy-hex-27") == EXIT_OK


def test_rank_layouts_interactive(tmp_path, monkeypatch):
    monkeypatch.setattr("builtins.input", lambda prompt: "1")
    assert run(tmp_path, "rank-layouts", "--candidates", "2", "--interactive") == EXIT_OK
    assert (tmp_path / "selected_config.json").exists()
    monkeypatch.setattr("builtins.input", lambda prompt: "one")
    assert run(tmp_path / "x", "rank-layouts", "--candidates", "2", "--interactive") == EXIT_CONFIG


def test_noise_file_option(tmp_path):
    path = tmp_path / "noise.json"
    path.write_text(json.dumps(NoiseModel(p2=0.02).to_dict()))
    assert run(tmp_path / "o", "sweep", "--points", "1", "--shots", "200", "--noise", str(path)) == EXIT_OK
    assert json.loads((tmp_path / "o" / "config.json").read_text())["noise"]["p2"] == 0.02
    assert run(tmp_path / "p", "sweep", "--noise", str(tmp_path / "missing.json")) == EXIT_CONFIG


def test_saved_topology_is_accepted(tmp_path):
    path = tmp_path / "mine.json"
    save_topology(load_topology("line-10"), path)
    assert run(tmp_path / "o", "transpile", "--topology", str(path)) == EXIT_OK
