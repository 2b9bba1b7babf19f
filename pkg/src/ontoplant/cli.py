"""Command-line entry points: build, serve, simulate, report.

Exit codes: 0 success, 1 domain error (one-line diagnostic on stderr),
2 usage error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .csvbuild import load_csv_dir
from .errors import ConfigError, OntoplantError
from .runtime import KnowledgeBase, load_knowledge_base
from .simulation import (
    render_oee_csv, render_trace, run_scenario, scenario_from_toml,
)
from .terms import canonical_decimal


def _load_kb(path: str) -> KnowledgeBase:
    return load_knowledge_base(Path(path).read_text(encoding="utf-8"))


def cmd_build(args) -> int:
    kb = KnowledgeBase()
    plant, inserted = kb.build_bundle(load_csv_dir(args.csv_dir))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(kb.dump(), encoding="utf-8")
    print(f"built {out}: {len(plant.resources)} resources, "
          f"{len(plant.process_plans)} plan pairings, {len(plant.products)} products, "
          f"{inserted} instance triples")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .api import create_app

    kb = _load_kb(args.kb)
    uvicorn.run(create_app(kb), host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_simulate(args) -> int:
    kb = _load_kb(args.kb)
    config = scenario_from_toml(Path(args.scenario).read_text(encoding="utf-8"))
    trace = run_scenario(kb, config)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "trace.tsv").write_text(render_trace(trace), encoding="utf-8")
    (out / "oee.csv").write_text(render_oee_csv(trace.oee_reports), encoding="utf-8")
    (out / "kb-final.ttl").write_text(kb.dump(), encoding="utf-8")
    print(f"simulated {len(trace.events)} events to t={config.horizon}: "
          f"{trace.parts_entered} parts in, {trace.parts_exited} out, "
          f"{len(trace.adjustments)} adjustments; outputs in {out}")
    return 0


def _parse_window(text: str) -> tuple[int, int]:
    try:
        start, _, end = text.partition("..")
        return int(start), int(end)
    except ValueError:
        raise ConfigError(f"bad window {text!r}; want like 0..500 (minutes)")


def cmd_report(args) -> int:
    kb = _load_kb(args.kb)
    window = _parse_window(args.window)
    report = kb.compute_oee(args.resource, window)
    print(f"resource {report.resource} window {window[0]}..{window[1]} min "
          f"({report.window_start} .. {report.window_end})")
    print(f"uptime          {report.uptime:.6f}")
    print(f"perfEfficiency  {report.perf_efficiency:.6f}")
    print(f"qualityRate     {report.quality_rate:.6f}")
    print(f"oee             {report.oee:.6f}")
    print()
    print("executionId\temissions\tenergyKwh\tquality\trealStart\trealEnd")
    for row in kb.get_resource_history(args.resource):
        print(f"{row.execution_id}\t{canonical_decimal(row.emissions)}"
              f"\t{canonical_decimal(row.energy_kwh)}\t{canonical_decimal(row.quality)}"
              f"\t{row.real_start}\t{row.real_end}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ontoplant",
        description="Manufacturing knowledge base: build it from CSVs, serve it "
                    "over HTTP, simulate the plant, and report machine OEE.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="ingest a CSV bundle and write a Turtle snapshot")
    p.add_argument("--csv-dir", required=True, help="directory with the four bundle files")
    p.add_argument("--out", required=True, help="output Turtle file")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("serve", help="serve the HTTP API over a Turtle snapshot")
    p.add_argument("--kb", required=True, help="Turtle snapshot to load")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("simulate", help="run a plant scenario and write outputs")
    p.add_argument("--kb", required=True, help="Turtle snapshot to load")
    p.add_argument("--scenario", required=True, help="scenario TOML file")
    p.add_argument("--out-dir", required=True,
                   help="directory for trace.tsv, oee.csv, kb-final.ttl")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", help="print a resource's OEE and history")
    p.add_argument("--kb", required=True, help="Turtle snapshot to load")
    p.add_argument("--resource", required=True)
    p.add_argument("--window", required=True, help="minutes, like 0..500")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except OntoplantError as exc:
        print(f"ontoplant {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"ontoplant {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
