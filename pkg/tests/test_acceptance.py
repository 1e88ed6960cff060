"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the verdict lines are
written straight to the terminal, bypassing output capture.
"""

import json
import math
import time
from dataclasses import replace

import numpy as np
import pytest

from blfformation.cli import main
from blfformation.control import LocalView, SaturationSpec, blf_control, qlf_control
from blfformation.engine import gamma_metric, lyapunov_monitor, run, summarize, velocity_error
from blfformation.formation import EdgeBounds, validate_graph
from blfformation.potentials import (
    Gains,
    barrier_gradient,
    barrier_potential,
    quadratic_gradient,
    quadratic_potential,
    target_gradient,
    target_potential,
)
from blfformation.report import trace_to_csv
from blfformation.scenario_file import PRESETS, load_preset
from blfformation.world import NoiseSpec

from conftest import TRIANGLE_EDGES, central_difference

pytestmark = pytest.mark.slow

SEEDS = range(10)
U_MAX_TOL = 1e-12
RUNTIME_LIMIT = 10.0


@pytest.fixture
def verdict(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\n[acceptance {n:2d}] {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail
    return emit


def _noise_free(name):
    s = load_preset(name)
    return replace(s, noise=NoiseSpec(0.0, 0.0, s.noise.seed))


def _noisy(name, seed):
    return replace(load_preset(name), noise=NoiseSpec(0.02, 0.02, seed))


@pytest.fixture(scope="module")
def panel():
    """Every 100 s acceptance run: both presets, both laws, noise-free and 10 noisy seeds."""
    out = []
    for name in PRESETS:
        cases = [("none", _noise_free(name))] + [(s, _noisy(name, s)) for s in SEEDS]
        for seed, sc in cases:
            for law in ("blf", "qlf"):
                scl = replace(sc, law=law)
                t0 = time.perf_counter()
                tr = run(scl)
                m = summarize(tr, scl, monitor=False)
                out.append(dict(preset=name, seed=seed, law=law, trace=tr, metrics=m,
                                seconds=time.perf_counter() - t0, scenario=scl))
    return out


def test_1_bound_invariance(panel, tmp_path, verdict):
    # the noise-free presets also go through the command line entry point
    cli_ok, cli_times = True, []
    for name in PRESETS:
        out = tmp_path / name
        t0 = time.perf_counter()
        code = main(["preset", "run", name, "--no-noise", "--strict-bounds", "--no-plots",
                     "--out", str(out)])
        cli_times.append(time.perf_counter() - t0)
        data = json.loads((out / "metrics.json").read_text())
        cli_ok &= code == 0 and data["bound_violations"] == 0 and data["breach_events"] == 0
    blf = [r for r in panel if r["law"] == "blf"]
    bad = [(r["preset"], r["seed"]) for r in blf
           if r["metrics"].bound_violations or r["metrics"].breach_events]
    slowest = max([r["seconds"] for r in blf] + cli_times)
    ok = cli_ok and not bad and slowest < RUNTIME_LIMIT
    verdict(1, ok, f"{len(blf)} BLF runs (2 presets x noise-free + 10 seeds), violating runs {bad}, "
                   f"CLI preset runs clean={cli_ok}, slowest run {slowest:.2f} s (< {RUNTIME_LIMIT} s)")


def test_2_qlf_contrast(panel, verdict):
    qlf = [r for r in panel if r["law"] == "qlf"]
    blf = [r for r in panel if r["law"] == "blf"]
    qlf_missing = [(r["preset"], r["seed"]) for r in qlf
                   if r["metrics"].bound_violations < 1 or r["metrics"].reorder_time is None]
    blf_bad = [(r["preset"], r["seed"]) for r in blf
               if r["metrics"].bound_violations or r["metrics"].reorder_time is not None]
    first = min(r["metrics"].reorder_time or math.inf for r in qlf)
    fewest = min(r["metrics"].bound_violations for r in qlf)
    ok = not qlf_missing and not blf_bad
    verdict(2, ok, f"QLF runs lacking violation+reorder {qlf_missing}, BLF runs with either "
                   f"{blf_bad}; QLF min violation samples {fewest}, earliest reorder {first:.2f} s")


def test_3_gamma(verdict):
    g = gamma_metric(validate_graph(3, TRIANGLE_EDGES), NoiseSpec(0.02, 0.02, 0))
    verdict(3, abs(g - 7.0) <= 1e-12, f"gamma = {g!r} (want 7 within 1e-12)")


def test_4_saturation(panel, verdict):
    peak = max(float(np.hypot(r["trace"].controls[..., 0], r["trace"].controls[..., 1]).max())
               for r in panel)
    ok = peak <= 3.0 + U_MAX_TOL
    verdict(4, ok, f"max |u| over {len(panel)} runs = {peak:.6f} m/s (bound 3 + 1e-12)")


def test_5_velocity_consensus(panel, verdict):
    r = next(r for r in panel if r["preset"] == "paper_linear" and r["seed"] == "none"
             and r["law"] == "blf")
    tr = r["trace"]
    err = float(velocity_error(tr)[-1])
    ok = tr.t[-1] == pytest.approx(100.0) and err < 1e-2
    verdict(5, ok, f"max_k |u_k - v_T| at t = {tr.t[-1]:.2f} s is {err:.3e} m/s (< 1e-2)")


def test_6_lyapunov_decrease(panel, verdict):
    found = {}
    for r in panel:
        if r["law"] == "blf" and r["seed"] == "none":
            assert not r["trace"].saturated.any()
            found[r["preset"]] = lyapunov_monitor(r["trace"], r["scenario"])
    ok = all(v == [] for v in found.values()) and len(found) == 2
    counts = {k: len(v) for k, v in found.items()}
    verdict(6, ok, f"positive-dW intervals beyond the dt-halving tolerance: {counts}")


def _fd_relative_errors(rng, n=10_000):
    errs = {"target": [], "quadratic": [], "barrier": []}
    for _ in range(n):
        R = rng.uniform(0.1, 8.0)
        rel = rng.uniform(-10, 10, 2)
        h = 1e-4 * max(1.0, np.linalg.norm(rel))
        for name, pot, grad in (("target", target_potential, target_gradient),
                                ("quadratic", quadratic_potential, quadratic_gradient)):
            g = grad(rel, R)
            fd = central_difference(lambda x: pot(x, R), rel, h)
            errs[name].append(np.linalg.norm(fd - g) / np.linalg.norm(g))

        lo = rng.uniform(0.3, 5.0)
        r = lo + rng.uniform(0.05, 2.0)
        b = EdgeBounds(r, lo, r + rng.uniform(0.05, 2.0))
        w = b.r_hi - b.r_lo
        d = rng.uniform(b.r_lo + 0.01 * w, b.r_hi - 0.01 * w)
        th = rng.uniform(0, 2 * np.pi)
        rel = d * np.array([math.cos(th), math.sin(th)])
        # the barrier is stiff near its poles; scale the step to the gap
        h = 1e-4 * min(d - b.r_lo, b.r_hi - d)
        g = barrier_gradient(rel, b)
        fd = central_difference(lambda x: barrier_potential(x, b), rel, h)
        errs["barrier"].append(np.linalg.norm(fd - g) / np.linalg.norm(g))
    return {k: np.asarray(v) for k, v in errs.items()}


def test_7_gradient_oracle(verdict):
    errs = _fd_relative_errors(np.random.default_rng(2024))
    worst = {k: float(v.max()) for k, v in errs.items()}
    n = min(len(v) for v in errs.values())
    ok = n >= 10_000 and all(v < 1e-6 for v in worst.values())
    verdict(7, ok, f"{n} samples per gradient, worst relative error "
                   + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + " (< 1e-6)")


def test_8_equilibrium_identity(verdict):
    # all at reference: |x_k - x_T| = R_k and every edge at r
    b = EdgeBounds(2.0, 1.8, 2.2)
    vt = np.array([0.2, 0.2])
    gains, sat = Gains(0.03, 0.01), SaturationSpec(3.0)
    worst = 0.0
    rng = np.random.default_rng(8)
    for _ in range(200):
        th, ph = rng.uniform(0, 2 * np.pi, 2)
        view = LocalView(2.0 * np.array([math.cos(th), math.sin(th)]), vt,
                         ((2.0 * np.array([math.cos(ph), math.sin(ph)]), b),), 2.0)
        for law in (blf_control, qlf_control):
            worst = max(worst, float(np.abs(law(view, gains, sat).raw - vt).max()))
    verdict(8, worst <= 1e-12, f"max |u_raw - v_T| at reference over 200 views x 2 laws = "
                               f"{worst:.1e} (<= 1e-12)")


def test_9_determinism(verdict):
    same = {}
    for name in PRESETS:
        sc = _noisy(name, 3)
        same[name] = trace_to_csv(run(sc)) == trace_to_csv(run(sc))
    verdict(9, all(same.values()), f"byte-identical trace CSV on rerun (noisy, seed 3): {same}")


def test_10_circular_standoff(verdict):
    sc = replace(_noise_free("paper_circular"), duration=200.0)
    tr = run(sc)
    tail = tr.t >= tr.t[-1] - 20.0 - 1e-9
    dev = float(np.abs(tr.d_target[tail] - np.asarray(sc.standoffs)).max())
    verdict(10, dev < 0.05, f"max |d_k - R_k| over the final 20 s of 200 s = {dev:.4f} m (< 0.05)")
