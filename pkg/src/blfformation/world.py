"""Target motion, measurement noise, swarm state and the time stepper."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .control import LocalView, SaturationSpec, saturate
from .errors import NonFiniteState, ValidationError
from .formation import FormationGraph, edge_distances, in_admissible_set, neighbors
from .potentials import target_gradient

# --------------------------------------------------------------------------
# targets
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class StationaryTarget:
    position: tuple[float, float] = (0.0, 0.0)

    def max_speed(self) -> float:
        return 0.0


@dataclass(frozen=True)
class LinearTarget:
    start: tuple[float, float]
    velocity: tuple[float, float]

    def max_speed(self) -> float:
        return math.hypot(*self.velocity)


@dataclass(frozen=True)
class CircularTarget:
    center: tuple[float, float]
    radius: float
    omega: float
    phase: float = 0.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValidationError(f"circular target radius must be positive, got {self.radius}")

    def max_speed(self) -> float:
        return abs(self.radius * self.omega)


@dataclass(frozen=True)
class ChainedTarget:
    """A simulated virtual agent that tracks ``leader`` and is itself the target.

    The virtual agent runs the target-tracking part of the control law
    (no formation term) with its own gains, standoff and speed limit, and
    is integrated with the same stepper as the swarm.
    """

    leader: "TargetProvider"
    start: tuple[float, float]
    K_T: float
    u_max: float
    standoff: float = 0.0

    def __post_init__(self):
        if not (self.K_T > 0 and self.u_max > 0 and self.standoff >= 0):
            raise ValidationError("chained target needs K_T > 0, u_max > 0, standoff >= 0")
        if self.leader.max_speed() >= self.u_max:
            raise ValidationError("chained target cannot keep up: leader speed >= its u_max")

    def max_speed(self) -> float:
        return self.u_max


TargetProvider = Union[StationaryTarget, LinearTarget, CircularTarget, ChainedTarget]


def target_state(provider: TargetProvider, t: float, dt: float = 0.01) -> tuple[np.ndarray, np.ndarray]:
    """Position and velocity of the target at time ``t``.

    Analytic variants are evaluated in closed form. A chained target is
    integrated from ``t = 0`` with explicit Euler at step ``dt``; inside a
    simulation the engine keeps a :class:`TargetTrack` instead.
    """
    if isinstance(provider, ChainedTarget):
        track = TargetTrack(provider)
        n = int(round(t / dt))
        for _ in range(n):
            track.advance(dt)
        return track.state(n * dt)
    return _analytic_state(provider, t)


def _analytic_state(provider, t):
    if isinstance(provider, StationaryTarget):
        return np.array(provider.position, dtype=float), np.zeros(2)
    if isinstance(provider, LinearTarget):
        v = np.array(provider.velocity, dtype=float)
        return np.array(provider.start, dtype=float) + t * v, v
    if isinstance(provider, CircularTarget):
        th = provider.omega * t + provider.phase
        c, s = math.cos(th), math.sin(th)
        rw = provider.radius * provider.omega
        pos = np.array([provider.center[0] + provider.radius * c,
                        provider.center[1] + provider.radius * s])
        return pos, np.array([-rw * s, rw * c])
    raise TypeError(f"unknown target provider {provider!r}")


class TargetTrack:
    """Stateful view of a target during one run.

    Between ``advance`` calls a chained target moves with its velocity held
    constant, so ``state`` can be queried at any time inside the current
    step (the guarded stepper needs substep starts).
    """

    def __init__(self, provider: TargetProvider):
        self.provider = provider
        self.t0 = 0.0
        self.leader = TargetTrack(provider.leader) if isinstance(provider, ChainedTarget) else None
        if self.leader is not None:
            self.pos = np.array(provider.start, dtype=float)
            self.vel = self._chained_velocity()

    def _chained_velocity(self) -> np.ndarray:
        p = self.provider
        lpos, lvel = self.leader.state(self.t0)
        raw = lvel - p.K_T * target_gradient(self.pos - lpos, p.standoff)
        return saturate(raw, SaturationSpec(p.u_max)).u

    def state(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        if self.leader is None:
            return _analytic_state(self.provider, t)
        return self.pos + (t - self.t0) * self.vel, self.vel.copy()

    def advance(self, dt: float) -> None:
        if self.leader is not None:
            self.leader.advance(dt)
            self.pos = self.pos + dt * self.vel
            self.t0 += dt
            self.vel = self._chained_velocity()
        else:
            self.t0 += dt


# --------------------------------------------------------------------------
# noise
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseSpec:
    sd_velocity: float = 0.0
    sd_distance: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not (self.sd_velocity >= 0 and self.sd_distance >= 0):
            raise ValidationError("noise standard deviations must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("noise seed must be an unsigned 64-bit integer")

    @property
    def active(self) -> bool:
        return self.sd_velocity > 0 or self.sd_distance > 0


PURPOSES = {"velocity": 0, "target_distance": 1, "neighbor_distance": 2}


class GaussianStream:
    """Standard normals from Box-Muller on a Philox counter-based generator.

    Uniforms ``u1, u2`` come from ``Generator(Philox).random()`` in order;
    each pair yields ``sqrt(-2 ln(1 - u1)) * cos(2 pi u2)`` then the matching
    ``sin`` term. Normals are produced in blocks, which does not change the
    sequence.
    """

    BLOCK = 512

    def __init__(self, seed: int, agent: int, purpose: str):
        ss = np.random.SeedSequence(entropy=seed, spawn_key=(agent, PURPOSES[purpose]))
        self._gen = np.random.Generator(np.random.Philox(ss))
        self._buf = np.empty(0)
        self._pos = 0

    def _refill(self):
        u = self._gen.random(self.BLOCK)
        u1, u2 = u[0::2], u[1::2]
        rad = np.sqrt(-2.0 * np.log1p(-u1))
        out = np.empty(self.BLOCK)
        out[0::2] = rad * np.cos(2.0 * np.pi * u2)
        out[1::2] = rad * np.sin(2.0 * np.pi * u2)
        self._buf = out
        self._pos = 0

    def normal(self) -> float:
        if self._pos >= len(self._buf):
            self._refill()
        z = self._buf[self._pos]
        self._pos += 1
        return float(z)


class AgentNoise:
    """One agent's independent substreams, labelled by purpose."""

    def __init__(self, noise: NoiseSpec, agent: int):
        self.spec = noise
        self.streams = {p: GaussianStream(noise.seed, agent, p) for p in PURPOSES}

    def draw(self, purpose: str, sd: float) -> float:
        if sd == 0.0:
            return 0.0
        return sd * self.streams[purpose].normal()


def make_noise_streams(noise: NoiseSpec, agent_count: int) -> list[AgentNoise]:
    return [AgentNoise(noise, k) for k in range(agent_count)]


def _perturb_distance(rel, stream: AgentNoise | None, purpose: str, sd: float) -> np.ndarray:
    if stream is None or sd == 0.0:
        return rel
    d = math.hypot(rel[0], rel[1])
    dn = d + stream.draw(purpose, sd)
    if d == 0.0:
        return rel
    return rel * (max(dn, 0.0) / d)


def observe(positions, target: tuple[np.ndarray, np.ndarray], graph: FormationGraph, k: int,
            standoff: float, noise: NoiseSpec | None = None,
            rng_stream: AgentNoise | None = None) -> LocalView:
    """Build agent ``k``'s local measurements.

    Velocity components get independent Gaussian noise; distances to the
    target and to each neighbour get radial Gaussian noise with the bearing
    kept exact. Draw order: velocity x, velocity y, target distance, then
    neighbours in ascending id.
    """
    x = np.asarray(positions, dtype=float)
    xt, vt = target
    sd_v = noise.sd_velocity if noise is not None else 0.0
    sd_d = noise.sd_distance if noise is not None else 0.0
    stream = rng_stream if noise is not None and noise.active else None

    v_est = np.array(vt, dtype=float)
    if stream is not None and sd_v > 0:
        v_est[0] += stream.draw("velocity", sd_v)
        v_est[1] += stream.draw("velocity", sd_v)
    rel_t = _perturb_distance(x[k] - xt, stream, "target_distance", sd_d)
    rel_n = tuple(
        (_perturb_distance(x[k] - x[j], stream, "neighbor_distance", sd_d), b)
        for j, b in neighbors(graph, k)
    )
    return LocalView(rel_target=rel_t, target_velocity=v_est, rel_neighbors=rel_n, standoff=standoff)


# --------------------------------------------------------------------------
# integration
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SwarmState:
    t: float
    positions: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.positions, dtype=float)
        if p.ndim != 2 or p.shape[1] != 2:
            raise ValidationError(f"positions must have shape (N, 2), got {p.shape}")
        object.__setattr__(self, "positions", p)


SCHEMES = ("euler", "rk4")


@dataclass(frozen=True)
class IntegrationSpec:
    dt: float = 0.01
    scheme: str = "euler"
    max_substeps: int = 8

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValidationError(f"dt must be positive, got {self.dt}")
        if self.scheme not in SCHEMES:
            raise ValidationError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if int(self.max_substeps) != self.max_substeps or self.max_substeps < 1:
            raise ValidationError("max_substeps must be an integer >= 1")


def step(state: SwarmState, commands, spec: IntegrationSpec, dt: float | None = None) -> SwarmState:
    """Advance every agent by its (already saturated) velocity command.

    Both schemes hold the command constant over the step, and for a single
    integrator RK4 with a held input has all four stages equal, so the
    update is ``x + dt * u`` either way.
    """
    h = spec.dt if dt is None else dt
    u = np.asarray(commands, dtype=float)
    if u.shape != state.positions.shape:
        raise ValidationError(f"expected commands of shape {state.positions.shape}, got {u.shape}")
    if spec.scheme == "rk4":
        k1 = k2 = k3 = k4 = u
        x = state.positions + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    else:
        x = state.positions + h * u
    if not np.all(np.isfinite(x)):
        raise NonFiniteState(f"non-finite agent position at t={state.t + h}")
    return SwarmState(state.t + h, x)


@dataclass
class StepOutcome:
    state: SwarmState
    substeps: int = 1
    breach: bool = False
    breached_edges: tuple[int, ...] = field(default_factory=tuple)


def guarded_step(state: SwarmState, control_fn: Callable[[SwarmState], np.ndarray],
                 graph: FormationGraph, spec: IntegrationSpec,
                 first_commands=None) -> StepOutcome:
    """One step that refuses to leave the admissible set if it can help it.

    Tries 1, 2, 4, ... equal substeps (up to ``max_substeps``), calling
    ``control_fn`` at every substep start except the first when
    ``first_commands`` is given. If the finest attempt still leaves an
    edge outside its open interval, the violating state is returned with
    ``breach=True``.
    """
    u0 = control_fn(state) if first_commands is None else np.asarray(first_commands, dtype=float)
    n = 1
    while True:
        h = spec.dt / n
        s = step(state, u0, spec, h)
        for _ in range(n - 1):
            s = step(s, control_fn(s), spec, h)
        # time must land on the grid regardless of substep rounding
        s = SwarmState(state.t + spec.dt, s.positions)
        if in_admissible_set(graph, s.positions):
            return StepOutcome(s, substeps=n)
        if n * 2 > spec.max_substeps:
            d = edge_distances(graph, s.positions)
            bad = tuple(e for e, (_, _, b) in enumerate(graph.edges) if not b.contains(d[e]))
            return StepOutcome(s, substeps=n, breach=True, breached_edges=bad)
        n *= 2
