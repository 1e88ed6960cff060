"""Formation graph, per-edge distance bounds and the admissible set."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    DisconnectedGraph,
    DuplicateEdge,
    InvalidBounds,
    SelfEdge,
    UnknownAgent,
    ValidationError,
)


@dataclass(frozen=True)
class EdgeBounds:
    """Desired distance ``r`` and the open interval ``(r_lo, r_hi)`` around it."""

    r: float
    r_lo: float
    r_hi: float

    def __post_init__(self):
        vals = (self.r, self.r_lo, self.r_hi)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidBounds(f"non-finite edge bounds {vals}")
        if not 0.0 < self.r_lo < self.r < self.r_hi:
            raise InvalidBounds(
                f"need 0 < r_lo < r < r_hi, got r={self.r}, r_lo={self.r_lo}, r_hi={self.r_hi}"
            )

    @property
    def margin(self) -> float:
        """Smaller of the two gaps between ``r`` and its bounds."""
        return min(self.r - self.r_lo, self.r_hi - self.r)

    def contains(self, d: float) -> bool:
        return self.r_lo < d < self.r_hi


def _as_bounds(raw) -> EdgeBounds:
    if isinstance(raw, EdgeBounds):
        return raw
    if isinstance(raw, Mapping):
        return EdgeBounds(float(raw["r"]), float(raw["r_lo"]), float(raw["r_hi"]))
    r, r_lo, r_hi = raw
    return EdgeBounds(float(r), float(r_lo), float(r_hi))


@dataclass(frozen=True)
class FormationGraph:
    """Undirected, connected agent graph. Build it with :func:`validate_graph`."""

    agent_count: int
    edges: tuple[tuple[int, int, EdgeBounds], ...]
    _adjacency: tuple[tuple[tuple[int, EdgeBounds], ...], ...] = field(
        repr=False, compare=False, default=()
    )

    def edge_index(self) -> dict[tuple[int, int], int]:
        return {(i, j): n for n, (i, j, _) in enumerate(self.edges)}


def validate_graph(agent_count: int, raw_edges: Iterable) -> FormationGraph:
    """Check and canonicalize a formation graph.

    ``raw_edges`` holds ``(i, j, bounds)`` triples; ``bounds`` may be an
    :class:`EdgeBounds`, a mapping with ``r``/``r_lo``/``r_hi`` keys, or a
    ``(r, r_lo, r_hi)`` tuple. Edges are stored once with ``i < j``.
    """
    if int(agent_count) != agent_count or agent_count < 1:
        raise ValidationError(f"agent_count must be a positive integer, got {agent_count!r}")
    agent_count = int(agent_count)

    seen: dict[tuple[int, int], EdgeBounds] = {}
    for raw in raw_edges:
        i, j, b = raw
        i, j = int(i), int(j)
        for k in (i, j):
            if not 0 <= k < agent_count:
                raise UnknownAgent(f"edge ({i}, {j}) references agent {k} outside [0, {agent_count})")
        if i == j:
            raise SelfEdge(f"self-edge on agent {i}")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise DuplicateEdge(f"edge {key} given more than once")
        seen[key] = _as_bounds(b)

    adj: list[list[tuple[int, EdgeBounds]]] = [[] for _ in range(agent_count)]
    for (i, j), b in seen.items():
        adj[i].append((j, b))
        adj[j].append((i, b))

    reached = {0}
    queue = deque([0])
    while queue:
        k = queue.popleft()
        for j, _ in adj[k]:
            if j not in reached:
                reached.add(j)
                queue.append(j)
    if len(reached) != agent_count:
        missing = sorted(set(range(agent_count)) - reached)
        raise DisconnectedGraph(f"agents {missing} are not connected to agent 0")

    edges = tuple((i, j, b) for (i, j), b in sorted(seen.items()))
    adjacency = tuple(tuple(sorted(a, key=lambda e: e[0])) for a in adj)
    return FormationGraph(agent_count, edges, adjacency)


def neighbors(graph: FormationGraph, k: int) -> tuple[tuple[int, EdgeBounds], ...]:
    """Neighbours of agent ``k`` with the bounds of the shared edge, sorted by id."""
    if not 0 <= k < graph.agent_count:
        raise UnknownAgent(f"agent {k} not in graph of {graph.agent_count} agents")
    return graph._adjacency[k]


def edge_distances(graph: FormationGraph, positions) -> np.ndarray:
    """Inter-agent distance for every edge, in ``graph.edges`` order."""
    x = np.asarray(positions, dtype=float)
    out = np.empty(len(graph.edges))
    for n, (i, j, _) in enumerate(graph.edges):
        out[n] = math.hypot(x[i, 0] - x[j, 0], x[i, 1] - x[j, 1])
    return out


def in_admissible_set(graph: FormationGraph, positions) -> bool:
    """True iff every edge distance lies strictly inside its bounds."""
    d = edge_distances(graph, positions)
    return all(b.r_lo < dn < b.r_hi for dn, (_, _, b) in zip(d, graph.edges))


def validate_standoffs(radii: Sequence[float], agent_count: int) -> tuple[float, ...]:
    radii = tuple(float(r) for r in radii)
    if len(radii) != agent_count:
        raise ValidationError(f"expected {agent_count} standoff radii, got {len(radii)}")
    if not all(math.isfinite(r) and r > 0 for r in radii):
        raise ValidationError(f"standoff radii must be positive, got {radii}")
    return radii
