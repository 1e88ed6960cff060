"""Decentralized BLF and QLF control laws with input saturation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .formation import EdgeBounds
from .potentials import Gains, barrier_gradient, quadratic_gradient, target_gradient

CLAMP_EPS = 1e-6


@dataclass(frozen=True)
class SaturationSpec:
    u_max: float

    def __post_init__(self):
        if not (math.isfinite(self.u_max) and self.u_max > 0):
            raise ValidationError(f"u_max must be positive, got {self.u_max}")


@dataclass(frozen=True)
class LocalView:
    """Everything agent ``k`` measures: target offset and velocity, neighbour offsets."""

    rel_target: np.ndarray
    target_velocity: np.ndarray
    rel_neighbors: tuple[tuple[np.ndarray, EdgeBounds], ...]
    standoff: float


@dataclass(frozen=True)
class ControlCommand:
    u: np.ndarray
    raw: np.ndarray
    saturated: bool = False
    clamped: bool = False


def saturate(u, spec: SaturationSpec) -> ControlCommand:
    """Radially clip ``u`` to norm ``u_max``, keeping its direction."""
    raw = np.array(u, dtype=float)
    n = math.hypot(raw[0], raw[1])
    if n <= spec.u_max:
        return ControlCommand(u=raw.copy(), raw=raw, saturated=False)
    return ControlCommand(u=raw * (spec.u_max / n), raw=raw, saturated=True)


def clamp_to_bounds(rel, bounds: EdgeBounds, eps: float = CLAMP_EPS) -> tuple[np.ndarray, bool]:
    """Rescale ``rel`` so its norm sits inside ``[r_lo(1+eps), r_hi(1-eps)]``."""
    rel = np.asarray(rel, dtype=float)
    d = math.hypot(rel[0], rel[1])
    lo = bounds.r_lo * (1.0 + eps)
    hi = bounds.r_hi * (1.0 - eps)
    if lo <= d <= hi:
        return rel, False
    if d == 0.0:
        return np.array([lo, 0.0]), True
    return rel * ((lo if d < lo else hi) / d), True


def _law(view: LocalView, gains: Gains, spec: SaturationSpec, neighbor_term,
         clamp_eps: float | None = None) -> ControlCommand:
    raw = np.array(view.target_velocity, dtype=float)
    raw -= gains.K_T * target_gradient(view.rel_target, view.standoff)
    clamped = False
    for rel, b in view.rel_neighbors:
        if clamp_eps is not None:
            rel, hit = clamp_to_bounds(rel, b, clamp_eps)
            clamped |= hit
        raw -= gains.K * neighbor_term(rel, b)
    cmd = saturate(raw, spec)
    if clamped:
        cmd = ControlCommand(u=cmd.u, raw=cmd.raw, saturated=cmd.saturated, clamped=True)
    return cmd


def blf_control(view: LocalView, gains: Gains, spec: SaturationSpec,
                clamp_eps: float | None = None) -> ControlCommand:
    """Barrier-Lyapunov tracking law for one agent.

    ``v_T - K_T * grad U_k - K * sum_j grad V_kj``, saturated once after
    summation. By default a neighbour outside its bounds raises
    :class:`OutOfDomain`; pass ``clamp_eps`` to clamp the measured
    distance instead (the returned command then has ``clamped=True``).
    """
    return _law(view, gains, spec, barrier_gradient, clamp_eps)


def qlf_control(view: LocalView, gains: Gains, spec: SaturationSpec) -> ControlCommand:
    """Quadratic baseline: same structure with the unconstrained inter-agent term."""
    return _law(view, gains, spec, lambda rel, b: quadratic_gradient(rel, b.r))
