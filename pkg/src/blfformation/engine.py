"""Scenario execution, trace recording and run diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .control import CLAMP_EPS, SaturationSpec, blf_control, qlf_control
from .errors import OutOfDomain, ScenarioInvalid, ValidationError, ZeroNoise
from .formation import FormationGraph, edge_distances, in_admissible_set, validate_standoffs
from .potentials import Gains, barrier_potential, quadratic_potential, target_potential
from .world import (
    IntegrationSpec,
    NoiseSpec,
    SwarmState,
    TargetProvider,
    TargetTrack,
    guarded_step,
    make_noise_streams,
    observe,
    step,
)

LAWS = ("blf", "qlf")


@dataclass(frozen=True)
class Scenario:
    graph: FormationGraph
    standoffs: tuple[float, ...]
    gains: Gains
    saturation: SaturationSpec
    target: TargetProvider
    initial_positions: tuple[tuple[float, float], ...]
    law: str = "blf"
    duration: float = 100.0
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    integration: IntegrationSpec = field(default_factory=IntegrationSpec)
    settling_tol: float = 1e-2
    name: str = ""

    def __post_init__(self):
        check_scenario(self)

    @property
    def steps(self) -> int:
        return int(round(self.duration / self.integration.dt))


def check_scenario(s: Scenario) -> None:
    """Raise if the run would violate a hypothesis of the stability result."""
    n = s.graph.agent_count
    validate_standoffs(s.standoffs, n)
    if s.law not in LAWS:
        raise ValidationError(f"law must be one of {LAWS}, got {s.law!r}")
    if not (math.isfinite(s.duration) and s.duration >= 0):
        raise ValidationError(f"duration must be >= 0, got {s.duration}")
    x0 = np.asarray(s.initial_positions, dtype=float)
    if x0.shape != (n, 2) or not np.all(np.isfinite(x0)):
        raise ValidationError(f"need {n} finite initial positions, got shape {x0.shape}")
    if not s.settling_tol > 0:
        raise ValidationError("settling_tol must be positive")
    vmax = s.target.max_speed()
    if not vmax < s.saturation.u_max:
        raise ScenarioInvalid(
            f"target speed {vmax:g} must be strictly below u_max={s.saturation.u_max:g}"
        )
    if s.law == "blf" and not in_admissible_set(s.graph, x0):
        d = edge_distances(s.graph, x0)
        raise ScenarioInvalid(f"initial edge distances {d.tolist()} are not all inside their bounds")


@dataclass
class Event:
    t: float
    kind: str  # BoundBreach, MeasurementClamp, SaturationActive, ReorderEvent
    index: int = -1  # agent or edge id, -1 when swarm-wide
    detail: str = ""


@dataclass
class Trace:
    """Samples at ``t = n * dt`` for ``n = 0 .. steps``.

    ``controls`` are post-saturation, ``raw_controls`` pre-saturation; the
    control stored at sample ``n`` is the one applied over ``[t_n, t_n+1)``
    (the last sample's control is evaluated but never applied).
    """

    law: str
    dt: float
    edges: tuple[tuple[int, int], ...]
    t: np.ndarray
    positions: np.ndarray
    target_pos: np.ndarray
    target_vel: np.ndarray
    controls: np.ndarray
    raw_controls: np.ndarray
    d_target: np.ndarray
    d_edges: np.ndarray
    U: np.ndarray
    V: np.ndarray
    Q: np.ndarray
    W: np.ndarray
    saturated: np.ndarray
    clamped: np.ndarray
    breach: np.ndarray
    reorder: np.ndarray
    substeps: np.ndarray
    events: list[Event] = field(default_factory=list)

    def __len__(self):
        return len(self.t)

    def events_of(self, kind: str) -> list[Event]:
        return [e for e in self.events if e.kind == kind]


def _potentials(x, xt, scenario: Scenario):
    U = sum(target_potential(x[k] - xt, scenario.standoffs[k]) for k in range(len(x)))
    V = Q = 0.0
    for i, j, b in scenario.graph.edges:
        rel = x[i] - x[j]
        Q += quadratic_potential(rel, b.r)
        if V != math.inf:
            try:
                V += barrier_potential(rel, b)
            except OutOfDomain:
                V = math.inf
    W = scenario.gains.K_T * U + scenario.gains.K * (V if scenario.law == "blf" else Q)
    return U, V, Q, W


def run(scenario: Scenario) -> Trace:
    """Simulate ``scenario`` and record every sample.

    Each step observes all agents from one frozen snapshot, computes all
    commands, then commits them together. BLF runs use the guarded stepper;
    QLF runs take plain steps since they have no bounds to protect.
    """
    g = scenario.graph
    n_agents = g.agent_count
    n_edges = len(g.edges)
    dt = scenario.integration.dt
    steps = scenario.steps
    m = steps + 1
    blf = scenario.law == "blf"
    noise = scenario.noise
    streams = make_noise_streams(noise, n_agents) if noise.active else [None] * n_agents
    track = TargetTrack(scenario.target)

    tr = Trace(
        law=scenario.law, dt=dt, edges=tuple((i, j) for i, j, _ in g.edges),
        t=np.arange(m) * dt,
        positions=np.empty((m, n_agents, 2)), target_pos=np.empty((m, 2)),
        target_vel=np.empty((m, 2)), controls=np.empty((m, n_agents, 2)),
        raw_controls=np.empty((m, n_agents, 2)), d_target=np.empty((m, n_agents)),
        d_edges=np.empty((m, n_edges)), U=np.empty(m), V=np.empty(m), Q=np.empty(m),
        W=np.empty(m), saturated=np.zeros((m, n_agents), bool),
        clamped=np.zeros((m, n_agents), bool), breach=np.zeros(m, bool),
        reorder=np.zeros(m, bool), substeps=np.ones(m, int),
    )

    def commands(state: SwarmState, t: float, record: Optional[int] = None) -> np.ndarray:
        target = track.state(t)
        out = np.empty((n_agents, 2))
        for k in range(n_agents):
            view = observe(state.positions, target, g, k, scenario.standoffs[k], noise, streams[k])
            if blf:
                cmd = blf_control(view, scenario.gains, scenario.saturation, clamp_eps=CLAMP_EPS)
            else:
                cmd = qlf_control(view, scenario.gains, scenario.saturation)
            out[k] = cmd.u
            if record is not None:
                tr.raw_controls[record, k] = cmd.raw
                tr.saturated[record, k] = cmd.saturated
                tr.clamped[record, k] = cmd.clamped
            elif cmd.clamped:
                tr.events.append(Event(t, "MeasurementClamp", k, "substep"))
        return out

    state = SwarmState(0.0, np.array(scenario.initial_positions, dtype=float))
    for n in range(m):
        t = tr.t[n]
        x = state.positions
        xt, vt = track.state(t)
        tr.positions[n] = x
        tr.target_pos[n] = xt
        tr.target_vel[n] = vt
        tr.d_target[n] = np.hypot(*(x - xt).T)
        tr.d_edges[n] = edge_distances(g, x)
        tr.U[n], tr.V[n], tr.Q[n], tr.W[n] = _potentials(x, xt, scenario)
        u = commands(state, t, record=n)
        tr.controls[n] = u
        for k in np.flatnonzero(tr.clamped[n]):
            tr.events.append(Event(t, "MeasurementClamp", int(k)))
        for k in np.flatnonzero(tr.saturated[n]):
            tr.events.append(Event(t, "SaturationActive", int(k)))
        if n == steps:
            break

        if blf and in_admissible_set(g, x):
            out = guarded_step(state, lambda s: commands(s, s.t), g,
                               scenario.integration, first_commands=u)
            tr.substeps[n] = out.substeps
            if out.breach:
                tr.breach[n + 1] = True
                for e in out.breached_edges:
                    tr.events.append(Event(tr.t[n + 1], "BoundBreach", e,
                                           f"edge {tr.edges[e]} left its bounds"))
            state = SwarmState(tr.t[n + 1], out.state.positions)
        else:
            state = SwarmState(tr.t[n + 1], step(state, u, scenario.integration).positions)
            if blf:
                tr.breach[n + 1] = not in_admissible_set(g, state.positions)
        track.advance(dt)

    _mark_reorder(tr)
    return tr


# --------------------------------------------------------------------------
# diagnostics
# --------------------------------------------------------------------------


def cyclic_order(positions):
    """Orientation of the agents.

    For three agents: the sign of ``(x1 - x0) x (x2 - x0)`` as -1, 0 or +1
    (0 when collinear up to rounding). For more agents: agent ids sorted
    counter-clockwise by angle about the centroid, rotated to start at 0.
    """
    x = np.asarray(positions, dtype=float)
    if len(x) == 3:
        a = x[1] - x[0]
        b = x[2] - x[0]
        cross = a[0] * b[1] - a[1] * b[0]
        scale = (a @ a) + (b @ b)
        if abs(cross) <= 1e-12 * scale:
            return 0
        return 1 if cross > 0 else -1
    c = x.mean(axis=0)
    ang = np.arctan2(x[:, 1] - c[1], x[:, 0] - c[0])
    order = [int(i) for i in np.argsort(ang, kind="stable")]
    z = order.index(0)
    return tuple(order[z:] + order[:z])


def _reorder_index(positions: np.ndarray) -> Optional[int]:
    if positions.shape[1] != 3:
        first = cyclic_order(positions[0])
        for n in range(1, len(positions)):
            if cyclic_order(positions[n]) != first:
                return n
        return None
    ref = 0
    for n in range(len(positions)):
        s = cyclic_order(positions[n])
        if ref == 0:
            ref = s
        elif s == -ref:
            return n
    return None


def _mark_reorder(tr: Trace) -> None:
    idx = _reorder_index(tr.positions)
    if idx is not None:
        tr.reorder[idx] = True
        tr.events.append(Event(float(tr.t[idx]), "ReorderEvent", -1, "orientation sign flipped"))


def detect_reorder(trace: Trace) -> Optional[float]:
    """Time of the first orientation flip, or None if the order never changes.

    Touching collinearity is not enough: the sign has to go from one side
    to the other.
    """
    idx = _reorder_index(trace.positions)
    return None if idx is None else float(trace.t[idx])


def _halved(scenario: Scenario) -> Scenario:
    integ = replace(scenario.integration, dt=scenario.integration.dt / 2)
    return replace(scenario, integration=integ)


def discretization_tolerance(trace: Trace, scenario: Scenario) -> np.ndarray:
    """Per-interval tolerance on W increments from a half-step rerun.

    The scenario is rerun at ``dt`` and at ``dt/2``; ten times the gap
    between their increments ``W[n+1] - W[n]`` (plus a rounding floor)
    bounds what explicit Euler can add on its own. The trace under test
    is not used for the estimate, so an anomaly in it cannot widen its
    own tolerance.
    """
    coarse = run(scenario)
    fine = run(_halved(scenario))
    n = len(trace.W)
    finite = np.isfinite(coarse.W)
    floor = 1e-12 * (np.max(np.abs(coarse.W[finite])) if finite.any() else 1.0)
    # W is inf past a breach; those intervals get only the floor
    with np.errstate(invalid="ignore"):
        err = np.abs(np.diff(coarse.W[:n]) - np.diff(fine.W[::2][:n]))
    return 10.0 * np.where(np.isfinite(err), err, 0.0) + floor


def lyapunov_monitor(trace: Trace, scenario: Scenario, tol_W=None) -> list[tuple[float, float]]:
    """Intervals ``(t_n, t_n+1)`` where W rose by more than the tolerance.

    Intervals whose applied control was saturated or used a clamped
    measurement for any agent are skipped, since the decrease identity
    only covers the unsaturated law with in-bounds measurements.
    ``tol_W`` may be a scalar or per-interval array; by default it comes
    from :func:`discretization_tolerance`.
    """
    if len(trace) < 2:
        return []
    if tol_W is None:
        tol_W = discretization_tolerance(trace, scenario)
    tol = np.broadcast_to(np.asarray(tol_W, dtype=float), (len(trace) - 1,))
    with np.errstate(invalid="ignore"):
        dw = np.diff(trace.W)
    excused = trace.saturated[:-1].any(axis=1) | trace.clamped[:-1].any(axis=1)
    bad = np.flatnonzero((dw > tol) & ~excused)
    return [(float(trace.t[i]), float(trace.t[i + 1])) for i in bad]


def gamma_metric(graph: FormationGraph, noise: NoiseSpec) -> float:
    """Smallest bound margin over the distance-noise standard deviation."""
    if not noise.sd_distance > 0:
        raise ZeroNoise("gamma is undefined without distance noise")
    return min(b.margin for _, _, b in graph.edges) / noise.sd_distance


@dataclass
class MetricsReport:
    law: str
    edges: tuple[tuple[int, int], ...]
    min_edge: tuple[float, ...]
    max_edge: tuple[float, ...]
    bound_violations: int
    breach_events: int
    reorder_time: Optional[float]
    settling_time: Optional[float]
    final_velocity_error: float
    max_u: float
    gamma: Optional[float]
    saturated_samples: int
    clamp_events: int
    positive_dW: Optional[list[tuple[float, float]]]

    def as_dict(self) -> dict:
        d = dict(self.__dict__)
        d["edges"] = [list(e) for e in self.edges]
        d["min_edge"] = list(self.min_edge)
        d["max_edge"] = list(self.max_edge)
        if self.positive_dW is not None:
            d["positive_dW"] = [list(p) for p in self.positive_dW]
        return d


def bound_violation_mask(trace: Trace, graph: FormationGraph) -> np.ndarray:
    lo = np.array([b.r_lo for _, _, b in graph.edges])
    hi = np.array([b.r_hi for _, _, b in graph.edges])
    return ((trace.d_edges <= lo) | (trace.d_edges >= hi)).any(axis=1)


def velocity_error(trace: Trace) -> np.ndarray:
    """``max_k |u_k - v_T|`` at every sample."""
    diff = trace.controls - trace.target_vel[:, None, :]
    return np.hypot(diff[..., 0], diff[..., 1]).max(axis=1)


def summarize(trace: Trace, scenario: Scenario, settling_tol: float | None = None,
              monitor: bool = True) -> MetricsReport:
    tol = scenario.settling_tol if settling_tol is None else settling_tol
    verr = velocity_error(trace)
    above = np.flatnonzero(verr >= tol)
    if len(above) == 0:
        settling = 0.0
    elif above[-1] == len(verr) - 1:
        settling = None
    else:
        settling = float(trace.t[above[-1] + 1])
    gamma = gamma_metric(scenario.graph, scenario.noise) if scenario.noise.sd_distance > 0 else None
    pos_dw = lyapunov_monitor(trace, scenario) if (monitor and scenario.law == "blf") else None
    return MetricsReport(
        law=scenario.law,
        edges=trace.edges,
        min_edge=tuple(float(v) for v in trace.d_edges.min(axis=0)),
        max_edge=tuple(float(v) for v in trace.d_edges.max(axis=0)),
        bound_violations=int(bound_violation_mask(trace, scenario.graph).sum()),
        breach_events=len(trace.events_of("BoundBreach")),
        reorder_time=detect_reorder(trace) if scenario.graph.agent_count >= 3 else None,
        settling_time=settling,
        final_velocity_error=float(verr[-1]),
        max_u=float(np.hypot(trace.controls[..., 0], trace.controls[..., 1]).max()),
        gamma=gamma,
        saturated_samples=int(trace.saturated.any(axis=1).sum()),
        clamp_events=len(trace.events_of("MeasurementClamp")),
        positive_dW=pos_dw,
    )
