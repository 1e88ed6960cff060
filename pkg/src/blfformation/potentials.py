"""Target, barrier and quadratic potentials and their gradients.

Every function takes a relative position vector (agent minus target, or
agent ``i`` minus agent ``j``), never absolute positions. Gradients are
returned in cancel-form, ``coefficient * rel``, which equals the
``d * (...) * unit_vector`` form wherever that is defined and stays
continuous at ``rel = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OutOfDomain, ValidationError
from .formation import EdgeBounds, FormationGraph


@dataclass(frozen=True)
class Gains:
    K_T: float
    K: float

    def __post_init__(self):
        if not (self.K_T > 0 and self.K > 0):
            raise ValidationError(f"gains must be positive, got K_T={self.K_T}, K={self.K}")


@dataclass(frozen=True)
class PotentialReport:
    U: float
    V: float
    Q: float
    W: float


def _sq(rel) -> float:
    return float(rel[0]) * float(rel[0]) + float(rel[1]) * float(rel[1])


def target_potential(rel, R: float) -> float:
    s = _sq(rel) - R * R
    return 0.25 * s * s


def target_gradient(rel, R: float) -> np.ndarray:
    c = _sq(rel) - R * R
    return np.array([c * rel[0], c * rel[1]], dtype=float)


def _barrier_terms(rel, bounds: EdgeBounds) -> tuple[float, float, float]:
    s = _sq(rel)
    hi2 = bounds.r_hi * bounds.r_hi
    lo2 = bounds.r_lo * bounds.r_lo
    b = (hi2 - s) * (s - lo2)
    # b > 0 exactly on the open interval; also catches d rounding onto a bound
    if not b > 0.0:
        raise OutOfDomain(
            f"distance {np.sqrt(s):.17g} outside open interval ({bounds.r_lo}, {bounds.r_hi})"
        )
    a = s - bounds.r * bounds.r
    return a, b, s


def barrier_potential(rel, bounds: EdgeBounds) -> float:
    """Half of ``a**2 / b``, infinite at either bound; raises outside the interval."""
    a, b, _ = _barrier_terms(rel, bounds)
    return 0.5 * a * a / b


def barrier_coefficient(rel, bounds: EdgeBounds) -> float:
    a, b, s = _barrier_terms(rel, bounds)
    hi2 = bounds.r_hi * bounds.r_hi
    lo2 = bounds.r_lo * bounds.r_lo
    return a * (2.0 * b - a * (hi2 - 2.0 * s + lo2)) / (b * b)


def barrier_gradient(rel, bounds: EdgeBounds) -> np.ndarray:
    c = barrier_coefficient(rel, bounds)
    return np.array([c * rel[0], c * rel[1]], dtype=float)


def quadratic_potential(rel, r: float) -> float:
    return target_potential(rel, r)


def quadratic_gradient(rel, r: float) -> np.ndarray:
    return target_gradient(rel, r)


def combined_potential(positions, target_pos, graph: FormationGraph, standoffs, gains: Gains,
                       barrier: bool = True) -> PotentialReport:
    """Evaluate ``U``, ``V``, ``Q`` and ``W`` for a whole swarm.

    ``W`` is ``K_T*U + K*V`` when ``barrier`` is true, else ``K_T*U + K*Q``
    (the quadratic baseline, which is defined everywhere). With
    ``barrier=False`` an out-of-bounds edge yields ``V = inf`` instead of
    raising.
    """
    x = np.asarray(positions, dtype=float)
    xt = np.asarray(target_pos, dtype=float)
    U = sum(target_potential(x[k] - xt, standoffs[k]) for k in range(graph.agent_count))
    Q = 0.0
    V = 0.0
    for i, j, b in graph.edges:
        rel = x[i] - x[j]
        Q += quadratic_potential(rel, b.r)
        if barrier:
            V += barrier_potential(rel, b)
        elif V != np.inf:
            try:
                V += barrier_potential(rel, b)
            except OutOfDomain:
                V = np.inf
    W = gains.K_T * U + gains.K * (V if barrier else Q)
    return PotentialReport(U=U, V=V, Q=Q, W=W)
