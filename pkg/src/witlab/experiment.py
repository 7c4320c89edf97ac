"""Experiment configuration, result records and the command implementations.

Every data file is a pure function of (config, seed): numbers are formatted
with 17 significant digits, keys are sorted, and wall-clock information goes
to a separate ``metadata.json``.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .bkp import ConfigError, WitConfig, bkp_star, build_wit, high_level_report
from .circuit import Circuit, dumps
from .diagnostics import g_grid, sweep, wit_tomography
from .mitigation import MitigationConfig, PipelineResult, run_mitigated
from .noise import NoiseModel
from .operators import growth_table, phase_report
from .topology import CouplingGraph, load_topology
from .transpiler import (
    CX_CEILING,
    Layout,
    decompose,
    format_ranking,
    format_report,
    random_layouts,
    rank_layouts,
    ranking_csv,
    report_csv,
    transpile,
)

NOISE_PRESETS = {"noiseless": NoiseModel.noiseless, "representative": NoiseModel.representative}
_TOP_KEYS = {
    "wit", "noise", "mitigation", "topology", "sweep", "shots", "retrials", "seed", "out",
    "layout", "basis", "trials", "layout_strategy", "heuristic", "candidates", "workers",
}


class VerificationFailure(RuntimeError):
    """Raised when a transpiled circuit fails the equivalence check."""


def parse_angle(text: str) -> float:
    """Float or a simple multiple of pi such as ``pi/2``, ``3pi/4``, ``3*pi/4``, ``-π``."""
    s = str(text).strip().replace("π", "pi").replace(" ", "")
    try:
        return float(s)
    except ValueError:
        pass
    m = re.fullmatch(r"([+-]?)(\d*\.?\d*)\*?pi(?:/(\d+\.?\d*))?", s)
    if not m:
        raise ConfigError(f"cannot parse angle {text!r}")
    sign = -1.0 if m.group(1) == "-" else 1.0
    coeff = float(m.group(2)) if m.group(2) else 1.0
    denom = float(m.group(3)) if m.group(3) else 1.0
    return sign * coeff * math.pi / denom


@dataclass(frozen=True)
class SweepSpec:
    g_min: float = 0.0
    g_max: float = math.pi
    points: int = 14
    values: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.values is not None:
            object.__setattr__(self, "values", tuple(float(v) for v in self.values))
            if not self.values:
                raise ConfigError("sweep values must not be empty")
        elif self.points < 1:
            raise ConfigError("points must be >= 1")

    def grid(self) -> list[float]:
        if self.values is not None:
            return list(self.values)
        return [float(v) for v in g_grid(self.g_min, self.g_max, self.points)]

    def to_dict(self) -> dict:
        d = {"g_min": self.g_min, "g_max": self.g_max, "points": self.points}
        if self.values is not None:
            d["values"] = list(self.values)
        return d


@dataclass(frozen=True)
class ExperimentConfig:
    wit: WitConfig = field(default_factory=bkp_star)
    noise: NoiseModel = field(default_factory=NoiseModel.noiseless)
    mitigation: MitigationConfig = field(default_factory=MitigationConfig.off)
    topology: str | None = None
    sweep: SweepSpec = field(default_factory=SweepSpec)
    shots: int = 8192
    retrials: int = 1
    seed: int = 0
    out: str = "results"
    layout: tuple[int, ...] | None = None
    basis: str = "superconducting"
    trials: int = 8
    layout_strategy: str = "degree_greedy"
    heuristic: str = "sabre_lite"
    candidates: int = 10
    workers: int = 1

    def __post_init__(self):
        if self.shots < 1:
            raise ConfigError("shots must be >= 1")
        if self.retrials < 1:
            raise ConfigError("retrials must be >= 1")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.candidates < 1:
            raise ConfigError("candidates must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.layout is not None:
            object.__setattr__(self, "layout", tuple(int(p) for p in self.layout))

    def with_(self, **changes) -> ExperimentConfig:
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "wit": self.wit.to_dict(),
            "noise": self.noise.to_dict(),
            "mitigation": self.mitigation.to_dict(),
            "topology": self.topology,
            "sweep": self.sweep.to_dict(),
            "shots": self.shots,
            "retrials": self.retrials,
            "seed": self.seed,
            "out": self.out,
            "layout": None if self.layout is None else list(self.layout),
            "basis": self.basis,
            "trials": self.trials,
            "layout_strategy": self.layout_strategy,
            "heuristic": self.heuristic,
            "candidates": self.candidates,
            "workers": self.workers,
        }

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        unknown = set(d) - _TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kw: dict = {}
        try:
            if "wit" in d:
                kw["wit"] = WitConfig.from_dict(d["wit"])
            if "noise" in d:
                n = d["noise"]
                if isinstance(n, str):
                    if n not in NOISE_PRESETS:
                        raise ConfigError(f"unknown noise preset {n!r}; choose from {sorted(NOISE_PRESETS)}")
                    kw["noise"] = NOISE_PRESETS[n]()
                else:
                    kw["noise"] = NoiseModel.from_dict(n)
            if "mitigation" in d:
                m = d["mitigation"]
                if isinstance(m, str):
                    kw["mitigation"] = mitigation_preset(m)
                else:
                    kw["mitigation"] = MitigationConfig.from_dict(m)
            if "sweep" in d:
                kw["sweep"] = SweepSpec(**d["sweep"])
            for k in ("shots", "retrials", "seed", "trials", "candidates", "workers"):
                if k in d:
                    kw[k] = int(d[k])
            for k in ("topology", "out", "basis", "layout_strategy", "heuristic", "layout"):
                if k in d:
                    kw[k] = d[k]
        except (TypeError, KeyError) as exc:
            raise ConfigError(f"malformed config: {exc}") from exc
        return cls(**kw)

    def data_dict(self) -> dict:
        """``to_dict`` without the settings that cannot change results (output directory, workers)."""
        d = self.to_dict()
        d.pop("out")
        d.pop("workers")
        return d

    def hash(self) -> str:
        return hashlib.sha256(canonical_json(self.data_dict()).encode()).hexdigest()[:16]


def mitigation_preset(name: str) -> MitigationConfig:
    if name == "on":
        return MitigationConfig()
    if name == "off":
        return MitigationConfig.off()
    raise ConfigError(f"mitigation must be 'on' or 'off', got {name!r}")


def load_experiment(path: str | Path) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return ExperimentConfig.from_dict(data)


# -- deterministic serialization ------------------------------------------------------


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, float) and obj == 0.0:
        return 0.0
    return obj


def canonical_json(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=2, allow_nan=True) + "\n"


def fmt(v: float | None) -> str:
    if v is None:
        return ""
    return repr(float(v) + 0.0)


def _header(config: ExperimentConfig) -> str:
    return f"# config_hash={config.hash()} seed={config.seed}\n"


@dataclass
class OutputSet:
    """Collects data files in memory and writes them together with metadata."""

    config: ExperimentConfig
    command: str
    files: dict[str, str] = field(default_factory=dict)
    started: float = field(default_factory=time.time)

    def add_csv(self, name: str, text: str) -> None:
        self.files[name] = _header(self.config) + text

    def add_text(self, name: str, text: str) -> None:
        self.files[name] = _header(self.config) + text

    def add_json(self, name: str, payload: dict) -> None:
        body = {"config_hash": self.config.hash(), "seed": self.config.seed, **payload}
        self.files[name] = canonical_json(body)

    def write(self, argv: Sequence[str] | None = None) -> Path:
        out = Path(self.config.out)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in sorted(self.files.items()):
            (out / name).write_text(text)
        # the output directory and worker count do not affect results, so they stay out of the data files
        (out / "config.json").write_text(canonical_json(self.config.data_dict()))
        meta = {
            "command": self.command,
            "argv": list(argv or []),
            "started_utc": datetime.fromtimestamp(self.started, timezone.utc).isoformat(),
            "finished_utc": datetime.now(timezone.utc).isoformat(),
            "wall_seconds": round(time.time() - self.started, 3),
            "version": __version__,
            "config_hash": self.config.hash(),
            "files": sorted(self.files) + ["config.json"],
        }
        (out / "metadata.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        return out


# -- sweep ----------------------------------------------------------------------------


@dataclass(frozen=True)
class ResultRecord:
    g_index: int
    g: float
    trial: int
    raw: float
    mitigated: float | None
    ideal: float
    shots: int
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "g_index": self.g_index, "g": self.g, "trial": self.trial, "raw": self.raw,
            "mitigated": self.mitigated, "ideal": self.ideal, "shots": self.shots, "diagnostics": self.diagnostics,
        }


@dataclass(frozen=True)
class Aggregate:
    g_index: int
    g: float
    ideal_z: float
    ideal_x: float
    ideal_y: float
    raw_mean: float
    raw_std: float
    mitigated_mean: float | None
    mitigated_std: float | None
    trials: int

    def to_dict(self) -> dict:
        return dict(vars(self))


def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return float(arr.mean()), std


def aggregate(records: Sequence[ResultRecord], ideal_xyz: dict[int, tuple[float, float, float]]) -> list[Aggregate]:
    """Per-g mean and sample standard deviation over trials."""
    out = []
    for gi in sorted({r.g_index for r in records}):
        rows = sorted((r for r in records if r.g_index == gi), key=lambda r: r.trial)
        raw_mean, raw_std = _mean_std([r.raw for r in rows])
        mits = [r.mitigated for r in rows if r.mitigated is not None]
        mit_mean, mit_std = _mean_std(mits) if mits else (None, None)
        x, y, z = ideal_xyz[gi]
        out.append(Aggregate(gi, rows[0].g, z, x, y, raw_mean, raw_std, mit_mean, mit_std, len(rows)))
    return out


@dataclass(frozen=True)
class _SweepJob:
    config: ExperimentConfig
    g_index: int
    g: float
    trial: int
    ideal: float
    circuit: Circuit


def _job_seed(seed: int, g_index: int, trial: int) -> int:
    return int(np.random.SeedSequence([seed, g_index, trial]).generate_state(1)[0])


def _run_sweep_job(job: _SweepJob) -> ResultRecord:
    cfg = job.config
    res: PipelineResult = run_mitigated(
        job.circuit, cfg.noise, cfg.mitigation, cfg.shots, _job_seed(cfg.seed, job.g_index, job.trial), 0, job.ideal
    )
    diag = {
        "raw_variance": res.raw_variance,
        "mitigated_variance": res.mitigated_variance,
        "factors": [
            {k: v for k, v in vars(f).items() if v is not None} for f in res.factors
        ],
        "warnings": list(res.warnings),
    }
    return ResultRecord(job.g_index, job.g, job.trial, res.raw, res.mitigated, job.ideal, cfg.shots, diag)


def _sweep_circuit(config: ExperimentConfig, wit: WitConfig, graph: CouplingGraph | None):
    logical = build_wit(wit)
    if graph is None:
        return decompose(logical, config.basis)
    layout = Layout(config.layout) if config.layout is not None else None
    res = transpile(
        logical, graph, config.basis, config.layout_strategy, config.heuristic, config.trials, config.seed,
        layout=layout, verify=False,
    )
    return res.circuit


def _map_jobs(fn: Callable, jobs: list, workers: int) -> list:
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


@dataclass
class SweepResult:
    records: list[ResultRecord]
    aggregates: list[Aggregate]

    def records_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["g_index", "g", "trial", "kind", "value", "shots"])
        seen_ideal = set()
        for r in sorted(self.records, key=lambda r: (r.g_index, r.trial)):
            if r.g_index not in seen_ideal:
                w.writerow([r.g_index, fmt(r.g), "", "ideal", fmt(r.ideal), ""])
                seen_ideal.add(r.g_index)
            w.writerow([r.g_index, fmt(r.g), r.trial, "raw", fmt(r.raw), r.shots])
            if r.mitigated is not None:
                w.writerow([r.g_index, fmt(r.g), r.trial, "mitigated", fmt(r.mitigated), r.shots])
        return buf.getvalue()

    def aggregates_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = ["g_index", "g", "ideal_z", "ideal_x", "ideal_y", "raw_mean", "raw_std", "mitigated_mean", "mitigated_std", "trials"]
        w.writerow(cols)
        for a in self.aggregates:
            w.writerow([a.g_index] + [fmt(getattr(a, c)) for c in cols[1:-1]] + [a.trials])
        return buf.getvalue()

    def to_text(self) -> str:
        lines = [f"{'g':>6} {'<Z> ideal':>10} {'raw mean':>9} {'raw std':>8} {'mit mean':>9} {'mit std':>8}"]
        for a in self.aggregates:
            mit = f"{a.mitigated_mean:>9.4f} {a.mitigated_std:>8.4f}" if a.mitigated_mean is not None else f"{'-':>9} {'-':>8}"
            lines.append(f"{a.g:>6.3f} {a.ideal_z:>10.6f} {a.raw_mean:>9.4f} {a.raw_std:>8.4f} {mit}")
        return "\n".join(lines) + "\n"


def run_sweep(config: ExperimentConfig, log: Callable[[str], None] = lambda s: None) -> tuple[SweepResult, OutputSet]:
    """Ideal, raw and mitigated <Z> at each g, ``retrials`` independent trials per point."""
    wit = config.wit
    grid = config.sweep.grid()
    graph = load_topology(config.topology) if config.topology else None
    log(f"Qubits per side:  {wit.n}")
    log(f"Time steps:  {wit.params.T}")
    log(f"Message insertion method:  {wit.insertion}")
    log("Building the library of transpiled circuits...")
    ideal_points = sweep(wit, grid)
    ideal_xyz = {i: (p.x, p.y, p.z) for i, p in enumerate(ideal_points)}
    circuits = [_sweep_circuit(config, wit.with_(g=g), graph) for g in grid]
    log(f"Sampling Z expectations ({len(grid)} points x {config.retrials} trials, {config.shots} shots)...")
    jobs = [
        _SweepJob(config, gi, g, t, ideal_points[gi].z, circuits[gi])
        for gi, g in enumerate(grid)
        for t in range(config.retrials)
    ]
    records = _map_jobs(_run_sweep_job, jobs, config.workers)
    result = SweepResult(records, aggregate(records, ideal_xyz))
    outputs = OutputSet(config, "sweep")
    outputs.add_csv("sweep_records.csv", result.records_csv())
    outputs.add_csv("sweep_aggregate.csv", result.aggregates_csv())
    outputs.add_json(
        "sweep.json",
        {
            "records": [r.to_dict() for r in records],
            "aggregates": [a.to_dict() for a in result.aggregates],
            "ideal_xyz": {str(k): list(v) for k, v in ideal_xyz.items()},
        },
    )
    return result, outputs


def load_sweep(path: str | Path, tol: float = 0.0) -> SweepResult:
    """Read ``sweep.json`` and check that the stored aggregates match a recomputation."""
    data = json.loads(Path(path).read_text())
    records = [ResultRecord(**r) for r in data["records"]]
    ideal_xyz = {int(k): tuple(v) for k, v in data["ideal_xyz"].items()}
    recomputed = aggregate(records, ideal_xyz)
    stored = [Aggregate(**a) for a in data["aggregates"]]
    for a, b in zip(recomputed, stored):
        for k, v in vars(a).items():
            w = getattr(b, k)
            if (v is None) != (w is None) or (v is not None and abs(v - w) > tol):
                raise ValueError(f"stored aggregate {k} at g_index {a.g_index} does not match its records")
    if len(recomputed) != len(stored):
        raise ValueError("stored aggregates do not cover the records")
    return SweepResult(records, stored)


# -- tomography -----------------------------------------------------------------------


def tomography_g_values(config: ExperimentConfig, explicit: Sequence[float] | None) -> list[float]:
    return list(explicit) if explicit else config.sweep.grid()


def run_tomography(config: ExperimentConfig, g_values: Sequence[float]) -> tuple[list, OutputSet]:
    ptms = [(float(g), wit_tomography(config.wit.with_(g=float(g)))) for g in g_values]
    outputs = OutputSet(config, "tomography")
    text = "".join(f"g = {g:.6f}\n{p.to_text()}\n" for g, p in ptms)
    outputs.add_text("ptm.txt", text)
    outputs.add_json("ptm.json", {"ptms": [{"g": g, "R": p.to_list()} for g, p in ptms]})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["g", "row", "col", "value"])
    for g, p in ptms:
        for i in range(4):
            for j in range(4):
                w.writerow([fmt(g), i, j, fmt(p.R[i, j])])
    outputs.add_csv("ptm.csv", buf.getvalue())
    return ptms, outputs


# -- operators ------------------------------------------------------------------------


OPERATOR_PERIOD = 6


def run_operators(config: ExperimentConfig, T: int | None = None) -> tuple[tuple, OutputSet]:
    """Growth table (default: one full period, t = 0..6) and the phase report at t = params.T."""
    if T is None:
        T = max(OPERATOR_PERIOD, config.wit.params.T)
    table = growth_table(config.wit.params, T)
    report = phase_report(config.wit)
    outputs = OutputSet(config, "operators")
    outputs.add_text("growth_table.txt", table.to_text())
    outputs.add_csv("growth_table.csv", table.to_csv())
    outputs.add_csv("phase_report.csv", report.to_csv())
    if report.note:
        outputs.add_text("phase_report_note.txt", report.note + "\n")
    return (table, report), outputs


# -- transpile ------------------------------------------------------------------------


def run_transpile(config: ExperimentConfig) -> tuple:
    graph = load_topology(config.topology or "heavy-hex-27")
    logical = build_wit(config.wit)
    layout = Layout(config.layout) if config.layout is not None else None
    res = transpile(
        logical, graph, config.basis, config.layout_strategy, config.heuristic, config.trials, config.seed,
        layout=layout, workers=config.workers,
    )
    label = f"{config.basis}/{config.wit.insertion}"
    outputs = OutputSet(config, "transpile")
    outputs.add_text("routed_circuit.txt", dumps(res.circuit))
    outputs.add_text("transpile_report.txt", format_report({label: res}, graph))
    outputs.add_csv("transpile_report.csv", report_csv({label: res}))
    outputs.add_json(
        "transpile.json",
        {
            "topology": graph.name,
            "basis": res.basis,
            "trial": res.trial,
            "trial_entanglers": list(res.trial_cx),
            "entanglers": res.entanglers,
            "cx_ceiling": CX_CEILING,
            "swaps": res.routed.swaps,
            "initial_layout": list(res.routed.initial_layout.physical),
            "final_layout": list(res.routed.final_layout.physical),
            "report": res.report.as_dict(),
            "high_level": high_level_report(config.wit),
            "verification": None
            if res.verification is None
            else {"status": res.verification.status, "max_error": res.verification.max_error, "detail": res.verification.detail},
        },
    )
    return res, graph, outputs


# -- rank layouts ---------------------------------------------------------------------


def run_rank_layouts(config: ExperimentConfig) -> tuple[list, OutputSet]:
    graph = load_topology(config.topology or "heavy-hex-27")
    circuit = build_wit(config.wit)
    candidates = random_layouts(circuit.qubit_count, graph, config.candidates, config.seed)
    ranked = rank_layouts(circuit, graph, config.noise, candidates, config.shots, config.seed, config.basis, config.heuristic)
    outputs = OutputSet(config, "rank-layouts")
    outputs.add_text("ranking.txt", format_ranking(ranked))
    outputs.add_csv("ranking.csv", ranking_csv(ranked))
    return ranked, outputs


def select_layout(config: ExperimentConfig, ranked: Sequence, choice: int) -> ExperimentConfig:
    """Config with the layout of candidate ``choice`` (the L column) filled in."""
    for c in ranked:
        if c.index == choice:
            return config.with_(layout=tuple(c.layout.physical))
    raise ConfigError(f"no candidate numbered {choice}; valid: {sorted(c.index for c in ranked)}")
