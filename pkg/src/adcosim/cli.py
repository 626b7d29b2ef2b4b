"""Command-line surface: map conversion, scenario extraction and synthesis,
simulation runs, analysis, and the one-shot demo pipeline.

Exit codes: 0 on success/pass verdicts, 2 on fail verdicts, 1 on errors.
The ``ADCOSIM_LOG_DIR`` environment variable overrides the default log
directory of ``run`` and ``demo``.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

CASE_NAMES = {
    "case1": "cut_in",
    "case2": "cut_out",
    "case3": "following",
    "cut_in": "cut_in",
    "cut_out": "cut_out",
    "following": "following",
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adcosim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert-map", help="convert an OpenDRIVE file to map products")
    p.add_argument("input", help="path to the .xodr file or builtin:<name>")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--emit", choices=("base", "routing", "sim", "all"), default="all")
    p.add_argument("--spacing", type=float, default=1.0, help="centerline sample spacing, m")
    p.add_argument("--epsilon", type=float, default=0.5, help="sim-map downsampling tolerance, m")

    p = sub.add_parser("extract", help="extract maneuver scenarios from a trajectory CSV")
    p.add_argument("tracks", help="highD-layout tracks CSV")
    p.add_argument("--ego", type=int, required=True, help="ego vehicle id")
    p.add_argument("--out", required=True, help="output directory for scenario JSON files")
    p.add_argument("--frame-rate", type=float, default=25.0)
    p.add_argument("--map", default="builtin:straight_highway_3km", help="map ref for export")

    p = sub.add_parser("scenario", help="scenario utilities")
    scen_sub = p.add_subparsers(dest="scenario_command", required=True)
    p_make = scen_sub.add_parser("make", help="write one of the shipped scripted cases")
    p_make.add_argument("case", choices=sorted(CASE_NAMES))
    p_make.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("run", help="run a scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--mode", choices=("in_process", "socket"), default="in_process")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="log directory")
    p.add_argument("--duration", type=float, default=None, help="override scenario duration, s")

    p = sub.add_parser("analyze", help="analyze an existing log directory")
    p.add_argument("--log", required=True)
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", default=None, help="report directory (default: the log dir)")

    p = sub.add_parser("demo", help="make + run + analyze + report for a shipped case")
    p.add_argument("case", choices=sorted(CASE_NAMES))
    p.add_argument("--mode", choices=("in_process", "socket"), default="in_process")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="output directory")

    p = sub.add_parser("bridge", help="run the converter bridge between two bus servers")
    p.add_argument("--config", required=True)
    p.add_argument("--a", dest="endpoint_a", required=True, help="Dialect-A bus server host:port")
    p.add_argument("--b", dest="endpoint_b", required=True, help="Dialect-B bus server host:port")

    return parser


def _resolve_log_dir(arg_value: str | None, default: str) -> Path:
    if arg_value:
        return Path(arg_value)
    env = os.environ.get("ADCOSIM_LOG_DIR")
    if env:
        return Path(env)
    return Path(default)


def _cmd_convert_map(args) -> int:
    from .mapping import (
        build_base_map,
        build_routing_graph,
        build_sim_map,
        load_opendrive_source,
        parse_opendrive,
        prune,
        save_map_products,
    )

    doc = parse_opendrive(load_opendrive_source(args.input))
    pruned = prune(doc)
    for entry in pruned.report:
        print(f"pruned: {entry}")
    base = build_base_map(pruned.doc, spacing=args.spacing)
    graph = build_routing_graph(base) if args.emit in ("routing", "all") else None
    sim = build_sim_map(base, epsilon=args.epsilon) if args.emit in ("sim", "all") else None
    written = save_map_products(
        args.out,
        base=base if args.emit in ("base", "all") else None,
        graph=graph,
        sim=sim,
    )
    for path in written:
        print(f"wrote {path}")
    return 0


def _cmd_extract(args) -> int:
    from .mapping import build_map_products
    from .scenario import detect_maneuvers, export_scenario, load_highd_csv, save_scenario

    table = load_highd_csv(args.tracks, frame_rate=args.frame_rate)
    base, _ = build_map_products(args.map)
    events = detect_maneuvers(table, ego_id=args.ego)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if not events:
        print("no maneuvers detected")
        return 0
    for i, event in enumerate(events):
        spec = export_scenario(table, event, args.map, base)
        path = out / f"scenario_{i:02d}_{event.kind}_{event.actor_id}.json"
        save_scenario(spec, path)
        print(f"wrote {path} (crossing frame {event.frame_cross})")
    return 0


def _cmd_scenario_make(args) -> int:
    from .scenario import make_case, save_scenario

    spec = make_case(CASE_NAMES[args.case])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{spec.name}.json"
    save_scenario(spec, path)
    print(f"wrote {path}")
    return 0


def _run_and_report(spec, mode: str, seed: int, out_dir: Path, duration: float | None = None) -> int:
    from .analysis import analyze, emit_report
    from .harness import SimConfig, run
    from .mapping import build_map_products

    config = SimConfig(scenario=spec, mode=mode, seed=seed, log_dir=out_dir, duration_s=duration)
    log = run(config)
    log.write(out_dir)
    base, _ = build_map_products(spec.map_ref)
    report = analyze(log, spec, base, mode=mode, seed=seed)
    written = emit_report(report, log, spec, base, out_dir)
    for path in written:
        print(f"wrote {path}")
    print(f"verdict: {report.verdict}")
    return 0 if report.verdict == "pass" else 2


def _cmd_run(args) -> int:
    from .scenario import load_scenario

    spec = load_scenario(args.scenario)
    out_dir = _resolve_log_dir(args.out, "adcosim_logs")
    return _run_and_report(spec, args.mode, args.seed, out_dir, args.duration)


def _cmd_analyze(args) -> int:
    from .analysis import analyze, emit_report
    from .harness import SimLog
    from .mapping import build_map_products
    from .scenario import load_scenario

    spec = load_scenario(args.scenario)
    log = SimLog.read(args.log)
    base, _ = build_map_products(spec.map_ref)
    report = analyze(log, spec, base)
    out_dir = Path(args.out) if args.out else Path(args.log)
    for path in emit_report(report, log, spec, base, out_dir):
        print(f"wrote {path}")
    print(f"verdict: {report.verdict}")
    return 0 if report.verdict == "pass" else 2


def _cmd_demo(args) -> int:
    from .scenario import make_case, save_scenario

    spec = make_case(CASE_NAMES[args.case])
    out_dir = _resolve_log_dir(args.out, f"demo_{args.case}")
    out_dir.mkdir(parents=True, exist_ok=True)
    save_scenario(spec, out_dir / "scenario.json")
    return _run_and_report(spec, args.mode, args.seed, out_dir)


def _cmd_bridge(args) -> int:
    import time

    from .bridge import SocketBridge, load_bridge_config

    config = load_bridge_config(args.config)
    bridge = SocketBridge(config, args.endpoint_a, args.endpoint_b)
    print(f"bridge running: {len(config.converters)} converters; Ctrl-C to stop")
    try:
        while True:
            time.sleep(0.5)
    except KeyboardInterrupt:
        bridge.close()
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1

    handlers = {
        "convert-map": _cmd_convert_map,
        "extract": _cmd_extract,
        "run": _cmd_run,
        "analyze": _cmd_analyze,
        "demo": _cmd_demo,
        "bridge": _cmd_bridge,
    }
    try:
        if args.command == "scenario":
            return _cmd_scenario_make(args)
        return handlers[args.command](args)
    except (OSError, ValueError, KeyError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
