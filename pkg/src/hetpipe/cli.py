"""Command-line front end: run allocation schemes through the simulator.

For each requested scheme the runner builds the model graphs, lowers and
plans them, calibrates engine costs, simulates the shipped (or a custom)
scenario, and writes per-frame CSV plus summary JSON. With --compare it
also writes comparison.csv: one row per scheme with the realtime latency
and power figures next to the saturated-pacing throughput.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from typing import Optional

from .allocator import PLAN_SCHEMES, default_pipeline_plan
from .engine_model import calibrate, default_orin_catalog, load_measurements
from .errors import CalibrationError, ConfigError, ValidationError
from .pipeline_sim import (
    PACING_REALTIME,
    PACING_SATURATED,
    ScenarioConfig,
    build_scenario,
    load_scenario,
    simulate,
    write_frames_csv,
    write_summary_json,
)

SCHEME_CHOICES = PLAN_SCHEMES + ("all",)
FORMAT_CHOICES = ("csv", "json", "both")

COMPARISON_HEADER = "scheme,avg_latency_ms,throughput_fps,cuda_mw,cpu_mw,dla_mw"

# Relative power difference beyond this is called out by diff_reports.
POWER_FLAG_THRESHOLD = 0.05

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VALIDATION = 3
EXIT_CALIBRATION = 4


@dataclass
class RunConfig:
    scenario_path: Optional[str] = None
    scheme: str = "all"
    calibration_path: Optional[str] = None
    output_dir: str = "out"
    format: str = "both"
    compare: bool = False
    seed: Optional[int] = None
    streams: Optional[int] = None
    kernel_mode: Optional[str] = None


def _requested_schemes(name: str):
    if name == "all":
        # Table-ordered model-level schemes; layer_balanced only on request.
        return PLAN_SCHEMES[:4]
    if name not in PLAN_SCHEMES:
        raise ConfigError(
            "unknown scheme %r (one of %s)" % (name, ", ".join(SCHEME_CHOICES))
        )
    return (name,)


def _comparison_row(scheme, realtime_report, saturated_report) -> str:
    power = realtime_report.avg_power_mw
    return "%s,%.3f,%.3f,%.1f,%.1f,%.1f" % (
        scheme,
        realtime_report.avg_stage_ms["total"],
        saturated_report.throughput_fps,
        power["cuda"],
        power["cpu"],
        power["dla"],
    )


def execute(cfg: RunConfig):
    """Run the configured schemes; returns the list of files written."""
    if cfg.format not in FORMAT_CHOICES:
        raise ConfigError("unknown format %r (one of %s)" % (cfg.format, ", ".join(FORMAT_CHOICES)))
    schemes = _requested_schemes(cfg.scheme)
    params = calibrate(load_measurements(cfg.calibration_path))
    cat = default_orin_catalog(cost_params=params)
    scn = load_scenario(cfg.scenario_path) if cfg.scenario_path else ScenarioConfig()
    try:
        os.makedirs(cfg.output_dir, exist_ok=True)
    except OSError as exc:
        raise ConfigError("cannot create output dir %s: %s" % (cfg.output_dir, exc)) from exc

    written = []
    comparison_rows = []
    for scheme in schemes:
        plan = default_pipeline_plan(scheme, cat)
        sc = build_scenario(scn, plan, cat, streams=cfg.streams, seed=cfg.seed,
                            pacing=PACING_REALTIME)
        report = simulate(sc, kernel_mode=cfg.kernel_mode)
        if cfg.format in ("csv", "both"):
            path = os.path.join(cfg.output_dir, "%s_frames.csv" % scheme)
            write_frames_csv(path, report)
            written.append(path)
        if cfg.format in ("json", "both"):
            path = os.path.join(cfg.output_dir, "%s_summary.json" % scheme)
            write_summary_json(path, report)
            written.append(path)
        if cfg.compare:
            sat = build_scenario(scn, plan, cat, streams=cfg.streams, seed=cfg.seed,
                                 pacing=PACING_SATURATED)
            sat_report = simulate(sat, kernel_mode=cfg.kernel_mode)
            comparison_rows.append(_comparison_row(scheme, report, sat_report))

    if cfg.compare:
        path = os.path.join(cfg.output_dir, "comparison.csv")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(COMPARISON_HEADER + "\n")
            for row in comparison_rows:
                fh.write(row + "\n")
        written.append(path)
    return written


def run(cfg: RunConfig) -> int:
    """execute() with domain errors mapped to distinct exit codes."""
    try:
        written = execute(cfg)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    except ValidationError as exc:
        print("validation error: %s" % exc, file=sys.stderr)
        return EXIT_VALIDATION
    except CalibrationError as exc:
        print("calibration error: %s" % exc, file=sys.stderr)
        return EXIT_CALIBRATION
    for path in written:
        print("wrote %s" % path)
    return EXIT_OK


def _flatten(doc, prefix=""):
    out = {}
    if isinstance(doc, dict):
        for key in doc:
            out.update(_flatten(doc[key], "%s%s." % (prefix, key)))
    elif isinstance(doc, (list, tuple)):
        for i, item in enumerate(doc):
            out.update(_flatten(item, "%s%d." % (prefix, i)))
    elif isinstance(doc, bool) or not isinstance(doc, (int, float)):
        pass  # only numeric leaves are diffable
    else:
        out[prefix[:-1]] = float(doc)
    return out


def diff_reports(a: dict, b: dict, power_threshold: float = POWER_FLAG_THRESHOLD):
    """Per-metric deltas between two summary documents.

    Returns rows of (metric, a, b, abs_delta, rel_delta, flagged) where
    flagged marks power metrics whose relative change exceeds the threshold.
    """
    fa, fb = _flatten(a), _flatten(b)
    if set(fa) != set(fb):
        missing = set(fa) ^ set(fb)
        raise ConfigError("summary schema mismatch: %s" % ", ".join(sorted(missing)))
    rows = []
    for metric in sorted(fa):
        va, vb = fa[metric], fb[metric]
        delta = vb - va
        rel = delta / va if va != 0.0 else (0.0 if delta == 0.0 else float("inf"))
        flagged = metric.startswith("power_mw.") and abs(rel) > power_threshold
        rows.append((metric, va, vb, delta, rel, flagged))
    return rows


def _diff_command(path_a: str, path_b: str) -> int:
    try:
        with open(path_a, "r", encoding="utf-8") as fh:
            a = json.load(fh)
        with open(path_b, "r", encoding="utf-8") as fh:
            b = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print("config error: cannot read summary: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    try:
        rows = diff_reports(a, b)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    print("%-40s %12s %12s %12s %9s" % ("metric", "a", "b", "delta", "rel"))
    for metric, va, vb, delta, rel, flagged in rows:
        mark = "  <- power shift" if flagged else ""
        print("%-40s %12.4f %12.4f %+12.4f %+8.2f%%%s"
              % (metric, va, vb, delta, rel * 100.0, mark))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="hetpipe",
        description="Simulate face detect/recognize pipeline schemes on an "
                    "edge SoC and report latency, throughput, and power.",
    )
    p.add_argument("--scenario", metavar="PATH", help="scenario file (default: shipped scenario)")
    p.add_argument("--scheme", default="all", metavar="NAME",
                   help="allocation scheme or 'all' (default: all; one of %s)"
                        % ", ".join(SCHEME_CHOICES))
    p.add_argument("--calibration", metavar="PATH",
                   help="stage measurement table CSV (default: shipped averages)")
    p.add_argument("--out", default="out", metavar="DIR", help="output directory")
    p.add_argument("--format", default="both", choices=FORMAT_CHOICES,
                   help="artifact formats to write")
    p.add_argument("--compare", action="store_true",
                   help="also write comparison.csv across the requested schemes")
    p.add_argument("--seed", type=int, metavar="N", help="override scenario seed")
    p.add_argument("--streams", type=int, metavar="N", help="override scenario stream count")
    p.add_argument("--diff", nargs=2, metavar=("A", "B"),
                   help="diff two summary JSON files and exit")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.diff:
        return _diff_command(args.diff[0], args.diff[1])
    cfg = RunConfig(
        scenario_path=args.scenario,
        scheme=args.scheme,
        calibration_path=args.calibration,
        output_dir=args.out,
        format=args.format,
        compare=args.compare,
        seed=args.seed,
        streams=args.streams,
    )
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
