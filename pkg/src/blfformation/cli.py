"""Command line entry point and run orchestration.

Exit codes: 0 success, 2 invalid scenario, 3 bound breach under
``--strict-bounds``, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

from .engine import MetricsReport, Scenario, Trace, run, summarize
from .errors import ParseError, ValidationError
from .report import emit_metrics, emit_plots, emit_trace_csv, format_metrics
from .scenario_file import PRESETS, atomic_write, load_preset, parse_scenario, preset_text, write_scenario
from .world import NoiseSpec

log = logging.getLogger("blfformation")

EXIT_OK, EXIT_INVALID, EXIT_BREACH, EXIT_IO = 0, 2, 3, 4


@dataclass
class RunResult:
    scenario: Scenario
    trace: Trace
    metrics: MetricsReport

    @property
    def breached(self) -> bool:
        return self.scenario.law == "blf" and (
            self.metrics.bound_violations > 0 or self.metrics.breach_events > 0
        )


def execute(scenario: Scenario, out_dir=None, plots: bool = True) -> RunResult:
    """Run one scenario, summarize it, and write its artifacts if ``out_dir`` is set."""
    trace = run(scenario)
    metrics = summarize(trace, scenario)
    if out_dir is not None:
        out_dir = Path(out_dir)
        emit_trace_csv(trace, out_dir / "trace.csv")
        emit_metrics(metrics, out_dir)
        write_scenario(scenario, out_dir / "scenario.toml", plots=plots)
        if plots:
            emit_plots(trace, scenario, out_dir)
    return RunResult(scenario, trace, metrics)


def compare_laws(scenario: Scenario, output_dir=None, plots: bool = True) -> dict[str, RunResult]:
    """Run the same scenario (same seed) under BLF and under QLF."""
    out = {}
    for law in ("blf", "qlf"):
        sub = None if output_dir is None else Path(output_dir) / law
        out[law] = execute(replace(scenario, law=law), sub, plots)
    if output_dir is not None:
        atomic_write(Path(output_dir) / "comparison.txt", format_comparison(out))
    return out


def format_comparison(results: dict[str, RunResult]) -> str:
    blf, qlf = results["blf"].metrics, results["qlf"].metrics
    rows = [
        ("bound violations", blf.bound_violations, qlf.bound_violations),
        ("reorder time [s]", blf.reorder_time, qlf.reorder_time),
        ("breach events", blf.breach_events, qlf.breach_events),
        ("settling time [s]", blf.settling_time, qlf.settling_time),
        ("max |u| [m/s]", blf.max_u, qlf.max_u),
    ]
    rows += [(f"edge {e[0]}-{e[1]} min/max",
              f"{blf.min_edge[n]:.4f}/{blf.max_edge[n]:.4f}",
              f"{qlf.min_edge[n]:.4f}/{qlf.max_edge[n]:.4f}") for n, e in enumerate(blf.edges)]

    def cell(v):
        if v is None:
            return "none"
        return f"{v:.6g}" if isinstance(v, float) else str(v)

    lines = [f"{'':24}{'BLF':>20}{'QLF':>20}"]
    lines += [f"{name:24}{cell(a):>20}{cell(b):>20}" for name, a, b in rows]
    return "\n".join(lines) + "\n"


def seed_panel(scenario: Scenario, n: int, laws=("blf",), output_dir=None,
               plots: bool = False) -> list[RunResult]:
    """Run ``n`` consecutive seeds starting at the scenario's seed."""
    results = []
    for s in range(scenario.noise.seed, scenario.noise.seed + n):
        for law in laws:
            sc = replace(scenario, law=law, noise=replace(scenario.noise, seed=s))
            sub = None if output_dir is None else Path(output_dir) / f"seed_{s}" / law
            results.append(execute(sc, sub, plots))
    if output_dir is not None:
        atomic_write(Path(output_dir) / "panel.csv", format_panel(results))
    return results


def format_panel(results: list[RunResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["seed", "law", "bound_violations", "breach_events", "reorder_time",
                "max_u", "final_velocity_error"])
    for r in results:
        m = r.metrics
        w.writerow([r.scenario.noise.seed, m.law, m.bound_violations, m.breach_events,
                    "" if m.reorder_time is None else repr(m.reorder_time),
                    repr(m.max_u), repr(m.final_velocity_error)])
    return buf.getvalue()


# --------------------------------------------------------------------------
# argument handling
# --------------------------------------------------------------------------


def _overrides(scenario: Scenario, args) -> Scenario:
    changes = {}
    if args.law is not None:
        changes["law"] = args.law
    if args.duration is not None:
        changes["duration"] = args.duration
    if args.dt is not None:
        changes["integration"] = replace(scenario.integration, dt=args.dt)
    noise = scenario.noise
    if args.no_noise:
        noise = NoiseSpec(0.0, 0.0, noise.seed)
    if args.seed is not None:
        noise = replace(noise, seed=args.seed)
    changes["noise"] = noise
    return replace(scenario, **changes)


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, help="noise seed")
    p.add_argument("--dt", type=float, help="integration step [s]")
    p.add_argument("--duration", type=float, help="simulated time [s]")
    p.add_argument("--law", choices=("blf", "qlf"), help="override the control law")
    p.add_argument("--no-noise", action="store_true", help="use exact measurements")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--seed-panel", type=int, metavar="N", help="run N consecutive seeds")
    p.add_argument("--strict-bounds", action="store_true",
                   help="exit 3 if a BLF run leaves its distance bounds")
    p.add_argument("--no-plots", action="store_true", help="skip SVG figures")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blfformation",
                                     description="Formation-preserving target tracking simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one scenario file")
    p.add_argument("scenario", type=Path)
    _add_run_flags(p)

    p = sub.add_parser("compare", help="run a scenario under both BLF and QLF")
    p.add_argument("scenario", type=Path)
    _add_run_flags(p)

    p = sub.add_parser("preset", help="bundled scenarios")
    psub = p.add_subparsers(dest="preset_command", required=True)
    psub.add_parser("list", help="list preset names")
    q = psub.add_parser("show", help="print a preset's scenario file")
    q.add_argument("name", choices=PRESETS)
    q = psub.add_parser("run", help="run a preset")
    q.add_argument("name", choices=PRESETS)
    q.add_argument("--compare", action="store_true", help="run under both laws")
    _add_run_flags(q)
    return parser


def _dispatch(args, scenario: Scenario, compare: bool, file_plots: bool = True) -> int:
    scenario = _overrides(scenario, args)
    plots = file_plots and not args.no_plots
    out = args.out
    if args.seed_panel:
        laws = ("blf", "qlf") if compare else (scenario.law,)
        results = seed_panel(scenario, args.seed_panel, laws, out, plots)
        sys.stdout.write(format_panel(results))
    elif compare:
        res = compare_laws(scenario, out, plots)
        results = list(res.values())
        sys.stdout.write(format_comparison(res))
    else:
        r = execute(scenario, out, plots)
        results = [r]
        sys.stdout.write(format_metrics(r.metrics))
    log.info("artifacts written to %s", out)
    if args.strict_bounds and any(r.breached for r in results):
        log.error("BLF run left its distance bounds")
        return EXIT_BREACH
    return EXIT_OK


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "preset":
            if args.preset_command == "list":
                print("\n".join(PRESETS))
                return EXIT_OK
            if args.preset_command == "show":
                sys.stdout.write(preset_text(args.name))
                return EXIT_OK
            return _dispatch(args, load_preset(args.name), args.compare)
        text = args.scenario.read_text(encoding="utf-8")
        scenario, opts = parse_scenario(text, str(args.scenario))
        return _dispatch(args, scenario, args.command == "compare", opts["plots"])
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
