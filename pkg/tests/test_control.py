import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from blfformation.control import (
    LocalView,
    SaturationSpec,
    blf_control,
    clamp_to_bounds,
    qlf_control,
    saturate,
)
from blfformation.errors import OutOfDomain
from blfformation.formation import EdgeBounds, edge_distances, in_admissible_set, neighbors
from blfformation.potentials import Gains, barrier_potential, combined_potential
from blfformation.world import observe

from conftest import central_difference, reference_triangle

B = EdgeBounds(2.0, 1.8, 2.2)
GAINS = Gains(0.03, 0.01)
SAT = SaturationSpec(3.0)
VT = np.array([0.2, 0.2])


def _view(rel_t, neigh, R=2.0, vt=VT):
    return LocalView(np.asarray(rel_t, float), np.asarray(vt, float),
                     tuple((np.asarray(r, float), b) for r, b in neigh), R)


def test_saturate_examples():
    np.testing.assert_array_equal(saturate((1, 0), SAT).u, [1, 0])
    np.testing.assert_allclose(saturate((6, 8), SAT).u, [1.8, 2.4], rtol=1e-15)
    assert saturate((6, 8), SAT).saturated
    np.testing.assert_array_equal(saturate((0, 0), SaturationSpec(0.5)).u, [0, 0])


@given(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6), st.floats(0.01, 100))
def test_saturate_properties(x, y, umax):
    spec = SaturationSpec(umax)
    once = saturate((x, y), spec).u
    n = math.hypot(x, y)
    # hypot: np.linalg.norm underflows for subnormal-scale inputs
    assert math.hypot(*once) == pytest.approx(min(n, umax), rel=1e-12, abs=1e-300)
    np.testing.assert_allclose(saturate(once, spec).u, once, rtol=1e-15)
    if n > 0:
        assert np.dot(once, [x, y]) >= 0


def test_blf_equilibrium_returns_target_velocity():
    u = blf_control(_view((2, 0), [((0, 2.0), B)]), GAINS, SAT)
    np.testing.assert_array_equal(u.u, VT)
    assert not u.saturated


def test_blf_geometry_example():
    # oracle: each gradient from a central difference of its potential
    g_t = central_difference(lambda x: 0.25 * (x @ x - 4.0) ** 2, (3.0, 0.0), 1e-5)
    g_b = central_difference(lambda x: barrier_potential(x, B), (2.1, 0.0), 1e-6)
    expected = VT - 0.03 * g_t - 0.01 * g_b
    u = blf_control(_view((3, 0), [((2.1, 0), B)]), GAINS, SAT)
    np.testing.assert_allclose(u.u, expected, rtol=1e-8)
    np.testing.assert_allclose(u.u, [-0.29454851, 0.2], atol=1e-8)


def test_qlf_geometry_example():
    u = qlf_control(_view((3, 0), [((2.1, 0), B)]), GAINS, SAT)
    np.testing.assert_allclose(u.u, [0.2 - 0.45 - 0.01 * (2.1**2 - 4) * 2.1, 0.2], rtol=1e-14)
    np.testing.assert_allclose(u.u, [-0.25861, 0.2], atol=1e-12)


def test_raw_control_saturates_to_exact_bound():
    u = blf_control(_view((30, 0), [((2.0, 0), B)]), GAINS, SAT)
    assert u.saturated
    assert np.linalg.norm(u.u) == pytest.approx(3.0, rel=1e-15)
    assert np.linalg.norm(u.raw) > 3.0


def test_blf_out_of_bounds_raises_unless_clamped():
    view = _view((2, 0), [((2.3, 0), B)])
    with pytest.raises(OutOfDomain):
        blf_control(view, GAINS, SAT)
    u = blf_control(view, GAINS, SAT, clamp_eps=1e-6)
    assert u.clamped and np.all(np.isfinite(u.u))
    assert np.linalg.norm(u.u) <= 3.0


def test_clamp_to_bounds():
    rel, hit = clamp_to_bounds((0, 2.5), B)
    assert hit and np.linalg.norm(rel) == pytest.approx(2.2 * (1 - 1e-6))
    assert rel[0] == 0 and rel[1] > 0
    rel, hit = clamp_to_bounds((1.0, 0), B)
    assert hit and np.linalg.norm(rel) == pytest.approx(1.8 * (1 + 1e-6))
    rel, hit = clamp_to_bounds((2.05, 0), B)
    assert not hit and rel[0] == 2.05


def test_qlf_globally_defined():
    u = qlf_control(_view((2, 0), [((5.0, 1.0), B)]), GAINS, SAT)
    assert np.all(np.isfinite(u.u))


def test_symmetric_reaction():
    rel = np.array([1.3, 1.5])
    base_i = blf_control(_view((2, 0), []), GAINS, SAT).raw
    base_j = blf_control(_view((2, 0), []), GAINS, SAT).raw
    term_i = blf_control(_view((2, 0), [(rel, B)]), GAINS, SAT).raw - base_i
    term_j = blf_control(_view((2, 0), [(-rel, B)]), GAINS, SAT).raw - base_j
    np.testing.assert_allclose(term_i, -term_j, rtol=1e-14, atol=1e-17)


def test_equilibrium_for_every_agent(equilibrium_scenario):
    s = equilibrium_scenario
    x = np.array(s.initial_positions)
    target = (np.array(s.target.position), np.zeros(2))
    for k in range(3):
        v = observe(x, target, s.graph, k, 2.0)
        for law in (blf_control, qlf_control):
            u = law(v, s.gains, s.saturation)
            np.testing.assert_allclose(u.raw, [0, 0], atol=1e-12)


def test_lyapunov_decrease_identity(triangle_graph):
    """dW/dt along the unsaturated closed loop equals -sum |u_k - v_T|^2."""
    rng = np.random.default_rng(3)
    tri = reference_triangle()
    checked = 0
    while checked < 20:
        x = tri + rng.normal(0, 0.03, tri.shape)
        if not in_admissible_set(triangle_graph, x):
            continue
        d = edge_distances(triangle_graph, x)
        margins = [min(dk - b.r_lo, b.r_hi - dk) for dk, (_, _, b) in zip(d, triangle_graph.edges)]
        if min(margins) < 0.05:
            continue  # the barrier is too stiff there for a finite-difference oracle
        xt = tri.mean(axis=0) + rng.normal(0, 0.5, 2)
        target = (xt, VT)
        u = np.array([blf_control(observe(x, target, triangle_graph, k, 2.0), GAINS, SAT).u
                      for k in range(3)])
        if any(np.linalg.norm(uk) >= 3.0 for uk in u):
            continue
        identity = -np.sum((u - VT) ** 2)

        def W(h):
            rep = combined_potential(x + h * u, xt + h * VT, triangle_graph, (2, 2, 2), GAINS)
            return rep.W

        errs = []
        for h in (1e-3, 1e-4):
            fd = (W(h) - W(-h)) / (2 * h)
            errs.append(abs(fd - identity))
            assert fd == pytest.approx(identity, rel=1e-4, abs=1e-10)
        # central difference along the exact flow: error shrinks like h^2
        assert errs[1] <= max(0.05 * errs[0], 1e-8 * abs(identity))
        checked += 1


def test_decentralization_translation(triangle_graph):
    tri = reference_triangle()
    target = (tri.mean(axis=0) + [0.3, -0.2], VT)
    shift = np.array([123.4, -56.7])
    for k in range(3):
        a = blf_control(observe(tri, target, triangle_graph, k, 2.0), GAINS, SAT).u
        moved = (target[0] + shift, VT)
        b = blf_control(observe(tri + shift, moved, triangle_graph, k, 2.0), GAINS, SAT).u
        np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-12)
