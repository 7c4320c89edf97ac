"""``witlab`` command line: sweep, tomography, operators, transpile, rank-layouts.

Exit codes: 0 success, 1 configuration error, 2 runtime error, 3 verification failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Sequence

from .bkp import ConfigError
from .experiment import (
    NOISE_PRESETS,
    ExperimentConfig,
    OutputSet,
    SweepSpec,
    canonical_json,
    load_experiment,
    mitigation_preset,
    parse_angle,
    run_operators,
    run_rank_layouts,
    run_sweep,
    run_tomography,
    run_transpile,
    select_layout,
    tomography_g_values,
)
from .noise import NoiseModel
from .operators import NonCliffordError
from .topology import TopologyError
from .transpiler import CX_CEILING, LayoutError, RoutingError, format_ranking
from .transpiler.basis import DecompositionError

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_VERIFY = 0, 1, 2, 3
COMMANDS = ("sweep", "tomography", "operators", "transpile", "rank-layouts")


def _shared(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="experiment config JSON file")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--shots", type=int, help="shots per circuit execution")
    p.add_argument("--points", type=int, help="number of g points on [g_min, g_max]")
    p.add_argument("--retrials", type=int, help="independent trials per g point")
    p.add_argument("--topology", help="built-in topology name or JSON file")
    p.add_argument("--out", help="output directory")
    p.add_argument("--mitigation", choices=("on", "off"), help="error mitigation pipeline")
    p.add_argument("--insert-message-with", choices=("swap", "reset"), dest="insertion")
    p.add_argument("--noise", help=f"noise preset ({', '.join(sorted(NOISE_PRESETS))}) or noise JSON file")
    p.add_argument("--g", help="comma-separated coupling values, e.g. 'pi/2' or '0,pi/4'")
    p.add_argument("--workers", type=int, help="bounded worker pool size")
    p.add_argument("--basis", choices=("superconducting", "trapped-ion"))
    p.add_argument("--trials", type=int, help="compilation trials (best by CX count)")
    p.add_argument("--quiet", action="store_true", help="suppress console narrative")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="witlab", description="Wormhole-inspired teleportation workbench")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        _shared(p)
        if name == "operators":
            p.add_argument("--T", type=int, dest="steps", help="number of time steps in the growth table")
        if name in ("transpile", "rank-layouts"):
            p.add_argument("--layout-method", dest="layout_strategy", choices=("trivial", "degree_greedy", "noise_aware"))
            p.add_argument("--heuristic", choices=("greedy_path", "sabre_lite"))
        if name == "rank-layouts":
            p.add_argument("--candidates", type=int, help="number of seeded random candidate layouts")
            p.add_argument("--select", type=int, help="candidate number (L column) to write into selected_config.json")
            p.add_argument("--interactive", action="store_true", help="prompt for the layout choice")
    return parser


def _load_noise(spec: str) -> NoiseModel:
    if spec in NOISE_PRESETS:
        return NOISE_PRESETS[spec]()
    import json
    from pathlib import Path

    try:
        return NoiseModel.from_dict(json.loads(Path(spec).read_text()))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load noise model {spec!r}: {exc}") from exc


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """Config file (if any) overridden by command-line flags."""
    cfg = load_experiment(args.config) if args.config else ExperimentConfig()
    changes: dict = {}
    for flag in ("seed", "shots", "retrials", "topology", "out", "basis", "trials", "workers"):
        v = getattr(args, flag, None)
        if v is not None:
            changes[flag] = v
    for flag in ("layout_strategy", "heuristic", "candidates"):
        v = getattr(args, flag, None)
        if v is not None:
            changes[flag] = v
    if args.mitigation is not None:
        changes["mitigation"] = mitigation_preset(args.mitigation)
    if args.noise is not None:
        changes["noise"] = _load_noise(args.noise)
    if args.insertion is not None:
        changes["wit"] = cfg.wit.with_(insertion=args.insertion)
    sweep = cfg.sweep
    if args.g is not None:
        values = tuple(parse_angle(v) for v in args.g.split(",") if v.strip())
        if args.points is not None and args.points != len(values):
            raise ConfigError(f"--points {args.points} disagrees with {len(values)} --g value(s)")
        sweep = SweepSpec(sweep.g_min, sweep.g_max, len(values), values)
    elif args.points is not None:
        sweep = SweepSpec(sweep.g_min, sweep.g_max, args.points)
    changes["sweep"] = sweep
    return cfg.with_(**changes)


def _finish(outputs: OutputSet, argv: Sequence[str], say) -> None:
    out = outputs.write(argv)
    say(f"Results written to {out}/ ({', '.join(sorted(outputs.files))})")


def _cmd_sweep(cfg: ExperimentConfig, args, argv, say) -> int:
    result, outputs = run_sweep(cfg, say)
    say("Post-processing...")
    say(result.to_text().rstrip())
    _finish(outputs, argv, say)
    return EXIT_OK


def _cmd_tomography(cfg: ExperimentConfig, args, argv, say) -> int:
    explicit = cfg.sweep.values if args.g is not None else None
    ptms, outputs = run_tomography(cfg, tomography_g_values(cfg, explicit))
    for g, p in ptms:
        say(f"g = {g:.6f}")
        say(p.to_text().rstrip())
    _finish(outputs, argv, say)
    return EXIT_OK


def _cmd_operators(cfg: ExperimentConfig, args, argv, say) -> int:
    if args.g is not None:
        cfg = cfg.with_(wit=cfg.wit.with_(g=cfg.sweep.grid()[0]))
    (table, report), outputs = run_operators(cfg, args.steps)
    say(table.to_text().rstrip())
    say("")
    say(report.to_csv().rstrip())
    if report.note:
        say(f"note: {report.note}")
    _finish(outputs, argv, say)
    return EXIT_OK


def _cmd_transpile(cfg: ExperimentConfig, args, argv, say) -> int:
    res, graph, outputs = run_transpile(cfg)
    say(outputs.files["transpile_report.txt"].split("\n", 1)[1].rstrip())
    if res.basis == "superconducting":
        verdict = "within" if res.entanglers <= CX_CEILING else "ABOVE"
        say(f"CX count {res.entanglers} is {verdict} the ceiling of {CX_CEILING}")
    _finish(outputs, argv, say)
    status = res.verification.status if res.verification is not None else "skipped"
    say(f"Equivalence verification: {status}")
    if res.verification is not None and res.verification.status == "different":
        say(f"verification failed: {res.verification.detail}")
        return EXIT_VERIFY
    return EXIT_OK


def _cmd_rank_layouts(cfg: ExperimentConfig, args, argv, say) -> int:
    say("Probing registered initial layouts on the configured noise model:")
    ranked, outputs = run_rank_layouts(cfg)
    say(format_ranking(ranked).rstrip())
    choice = args.select
    if choice is None and args.interactive:
        text = input("Choose your layout #: ")
        try:
            choice = int(text.strip())
        except ValueError:
            raise ConfigError(f"not a candidate number: {text!r}") from None
    if choice is not None:
        chosen = select_layout(cfg, ranked, choice)
        outputs.files["selected_config.json"] = canonical_json(chosen.data_dict())
        say(f"Selected layout {choice}: {list(chosen.layout)}")
    _finish(outputs, argv, say)
    return EXIT_OK


_HANDLERS = {
    "sweep": _cmd_sweep,
    "tomography": _cmd_tomography,
    "operators": _cmd_operators,
    "transpile": _cmd_transpile,
    "rank-layouts": _cmd_rank_layouts,
}


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    say = (lambda s: None) if args.quiet else print
    try:
        cfg = resolve_config(args)
    except (ConfigError, TopologyError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return _HANDLERS[args.command](cfg, args, argv, say)
    except NonCliffordError as exc:
        print(f"unsupported: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, TopologyError, LayoutError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RoutingError, DecompositionError, OSError, RuntimeError, ValueError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
