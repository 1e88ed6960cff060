"""Run artifacts: trace CSV, SVG figures and the metrics report."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from matplotlib.figure import Figure
from matplotlib.patches import Circle

from .engine import MetricsReport, Scenario, Trace
from .scenario_file import atomic_write

EVENT_COLUMNS = ("bound_breach", "measurement_clamp", "saturation_active", "reorder_event")


@dataclass
class RunArtifacts:
    trace_csv: Optional[Path] = None
    metrics: Optional[Path] = None
    plots: list[Path] = field(default_factory=list)


def csv_header(trace: Trace) -> list[str]:
    """Column order of the trace CSV.

    ``t``; ``x{k}, y{k}`` per agent; ``ux{k}, uy{k}`` (post-saturation) per
    agent; ``d{k}_T`` per agent; ``d{i}_{j}`` per edge; ``W``, ``U`` and
    ``V`` (BLF) or ``Q`` (QLF); then the 0/1 event flags.
    """
    n = trace.positions.shape[1]
    cols = ["t"]
    cols += [c for k in range(n) for c in (f"x{k}", f"y{k}")]
    cols += [c for k in range(n) for c in (f"ux{k}", f"uy{k}")]
    cols += [f"d{k}_T" for k in range(n)]
    cols += [f"d{i}_{j}" for i, j in trace.edges]
    cols += ["W", "U", "V" if trace.law == "blf" else "Q"]
    cols += list(EVENT_COLUMNS)
    return cols


def trace_to_csv(trace: Trace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(csv_header(trace))
    pot = trace.V if trace.law == "blf" else trace.Q
    flags = np.stack([trace.breach, trace.clamped.any(axis=1),
                      trace.saturated.any(axis=1), trace.reorder], axis=1).astype(int)
    for n in range(len(trace)):
        row = [trace.t[n]]
        row += trace.positions[n].ravel().tolist()
        row += trace.controls[n].ravel().tolist()
        row += trace.d_target[n].tolist()
        row += trace.d_edges[n].tolist()
        row += [trace.W[n], trace.U[n], pot[n]]
        w.writerow([repr(float(v)) for v in row] + flags[n].tolist())
    return buf.getvalue()


def emit_trace_csv(trace: Trace, path) -> RunArtifacts:
    return RunArtifacts(trace_csv=atomic_write(path, trace_to_csv(trace)))


def format_metrics(m: MetricsReport) -> str:
    def opt(v, unit=""):
        return "none" if v is None else f"{v:.6g}{unit}"

    lines = [f"law                    {m.law.upper()}"]
    for e, lo, hi in zip(m.edges, m.min_edge, m.max_edge):
        lines.append(f"edge {e[0]}-{e[1]} distance       min {lo:.6f}  max {hi:.6f}")
    lines += [
        f"bound violations       {m.bound_violations} samples",
        f"breach events          {m.breach_events}",
        f"reorder time           {opt(m.reorder_time, ' s')}",
        f"settling time          {opt(m.settling_time, ' s')}",
        f"final |u - v_T| max    {m.final_velocity_error:.6g} m/s",
        f"max |u|                {m.max_u:.6g} m/s",
        f"gamma                  {opt(m.gamma)}",
        f"saturated samples      {m.saturated_samples}",
        f"measurement clamps     {m.clamp_events}",
    ]
    if m.positive_dW is not None:
        lines.append(f"W increase intervals   {len(m.positive_dW)}")
    return "\n".join(lines) + "\n"


def emit_metrics(m: MetricsReport, out_dir) -> Path:
    out_dir = Path(out_dir)
    atomic_write(out_dir / "metrics.json", json.dumps(m.as_dict(), indent=2) + "\n")
    return atomic_write(out_dir / "metrics.txt", format_metrics(m))


# --------------------------------------------------------------------------
# figures
# --------------------------------------------------------------------------

_SVG_META = {"Date": None, "Creator": "blfformation"}


def _save(fig: Figure, path: Path) -> Path:
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata=_SVG_META)
    return atomic_write(path, buf.getvalue())


def _figure(**kw) -> Figure:
    import matplotlib

    # fixed ids so identical runs give identical files
    matplotlib.rcParams["svg.hashsalt"] = "blfformation"
    return Figure(**kw)


def plot_distances(trace: Trace, scenario: Scenario) -> Figure:
    fig = _figure(figsize=(8, 5))
    ax = fig.add_subplot()
    for e, (i, j, b) in enumerate(scenario.graph.edges):
        line, = ax.plot(trace.t, trace.d_edges[:, e], lw=1.2, label=f"d{i}{j}")
        for bound in (b.r_lo, b.r_hi):
            ax.axhline(bound, color=line.get_color(), ls="--", lw=0.8)
    for k in range(scenario.graph.agent_count):
        ax.plot(trace.t, trace.d_target[:, k], lw=1.0, ls=":", label=f"d{k}T")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("distance [m]")
    ax.set_title(f"{trace.law.upper()}: inter-agent and agent-target distances")
    ax.legend(loc="upper right", fontsize=8, ncol=2)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return fig


def _polygon(ax, pts, **kw):
    closed = np.vstack([pts, pts[:1]])
    ax.plot(closed[:, 0], closed[:, 1], **kw)


def plot_trajectories(trace: Trace, scenario: Scenario) -> Figure:
    fig = _figure(figsize=(7, 7))
    ax = fig.add_subplot()
    ax.plot(trace.target_pos[:, 0], trace.target_pos[:, 1], color="m", lw=1.0, label="T")
    for k in range(scenario.graph.agent_count):
        ax.plot(trace.positions[:, k, 0], trace.positions[:, k, 1], lw=1.0, label=f"A{k}")
    for idx, ls in ((0, "--"), (-1, "-")):
        pts = trace.positions[idx]
        for i, j, _ in scenario.graph.edges:
            ax.plot(pts[[i, j], 0], pts[[i, j], 1], color="k", ls=ls, lw=0.8)
        for r in sorted(set(scenario.standoffs)):
            ax.add_patch(Circle(trace.target_pos[idx], r, fill=False, color="m", ls=ls, lw=0.8))
    ax.set_aspect("equal", adjustable="datalim")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title(f"{trace.law.upper()}: agent and target trajectories")
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return fig


def plot_controls(trace: Trace, scenario: Scenario) -> Figure:
    fig = _figure(figsize=(8, 7))
    ax1, ax2 = fig.subplots(2, 1, sharex=True)
    for k in range(scenario.graph.agent_count):
        ax1.plot(trace.t, trace.controls[:, k, 0], lw=1.0, label=f"ux{k}")
        ax1.plot(trace.t, trace.controls[:, k, 1], lw=1.0, ls="--", label=f"uy{k}")
        ax2.plot(trace.t, np.hypot(trace.controls[:, k, 0], trace.controls[:, k, 1]),
                 lw=1.0, label=f"|u{k}|")
    ax1.plot(trace.t, trace.target_vel[:, 0], color="k", lw=0.8, label="vTx")
    ax1.plot(trace.t, trace.target_vel[:, 1], color="k", lw=0.8, ls="--", label="vTy")
    ax2.axhline(scenario.saturation.u_max, color="r", ls="--", lw=1.0, label="u_max")
    ax1.set_ylabel("control component [m/s]")
    ax2.set_ylabel("control magnitude [m/s]")
    ax2.set_xlabel("time [s]")
    for ax in (ax1, ax2):
        ax.legend(loc="upper right", fontsize=7, ncol=3)
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return fig


def emit_plots(trace: Trace, scenario: Scenario, out_dir) -> RunArtifacts:
    out_dir = Path(out_dir)
    paths = [
        _save(plot_distances(trace, scenario), out_dir / "distances.svg"),
        _save(plot_trajectories(trace, scenario), out_dir / "trajectories.svg"),
        _save(plot_controls(trace, scenario), out_dir / "controls.svg"),
    ]
    return RunArtifacts(plots=paths)
