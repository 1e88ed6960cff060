import math

import numpy as np
import pytest

from blfformation.control import SaturationSpec
from blfformation.engine import Scenario
from blfformation.formation import validate_graph
from blfformation.potentials import Gains
from blfformation.world import LinearTarget, StationaryTarget

TRIANGLE_EDGES = [
    (0, 1, (2.0, 1.8, 2.2)),
    (1, 2, (3.46, 3.2, 3.6)),
    (2, 0, (4.0, 3.8, 4.2)),
]


def central_difference(f, x, h):
    """Fourth-order central difference gradient of a scalar f at a 2-vector x."""
    x = np.asarray(x, dtype=float)
    g = np.zeros(2)
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        g[i] = (-f(x + 2 * e) + 8 * f(x + e) - 8 * f(x - e) + f(x - 2 * e)) / (12 * h)
    return g


def reference_triangle(d01=2.0, d12=3.46, d02=4.0):
    """Agent 0 at the origin, agent 2 on +x, agent 1 on the counter-clockwise side."""
    x1 = (d01**2 - d12**2 + d02**2) / (2 * d02)
    return np.array([[0.0, 0.0], [x1, math.sqrt(d01**2 - x1**2)], [d02, 0.0]])


@pytest.fixture
def triangle_graph():
    return validate_graph(3, TRIANGLE_EDGES)


@pytest.fixture
def equilibrium_scenario(triangle_graph):
    """All agents on their standoff circle at the reference distances, target at rest.

    Uses r_12 = 2*sqrt(3) so the triangle is exactly inscribed in a circle of
    radius 2 around its hypotenuse midpoint.
    """
    g = validate_graph(3, [(0, 1, (2.0, 1.8, 2.2)), (1, 2, (2 * math.sqrt(3), 3.2, 3.6)),
                           (0, 2, (4.0, 3.8, 4.2))])
    tri = reference_triangle(d12=2 * math.sqrt(3))
    center = (tri[0] + tri[2]) / 2
    return Scenario(g, (2.0, 2.0, 2.0), Gains(0.03, 0.01), SaturationSpec(3.0),
                    StationaryTarget(tuple(center)), tuple(map(tuple, tri)), "blf", 5.0)


def triangle_scenario(graph, target=None, law="blf", duration=10.0, **kw):
    tri = reference_triangle()
    x0 = tri - tri.mean(axis=0) + np.array([0.0, -3.0])
    target = target or LinearTarget((0.0, 0.0), (0.2, 0.2))
    return Scenario(graph, (2.0, 2.0, 2.0), Gains(0.03, 0.01), SaturationSpec(3.0), target,
                    tuple(map(tuple, x0)), law, duration, **kw)
