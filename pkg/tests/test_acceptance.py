"""End-to-end acceptance gate.

Each test prints exactly one PASS/FAIL line (bypassing capture) and then
asserts, so a plain ``pytest -v`` run leaves a human-readable scorecard.
The heavy 20-seed full-scale runs are shared across the criteria that
need them via session fixtures.
"""

import math
import sys
import time

import numpy as np
import pytest

import conftest
from far_ee.baselines import evaluate_afr, evaluate_sris
from far_ee.channel import build_channel
from far_ee.geometry import ScenarioConfig, dbm_to_watt, region_bounds
from far_ee.harness import apply_axis, run_scenario
from far_ee.kernel import (
    ConvexProgram, LinearConstraint, SeparableLogObjective, box_constraints,
    dinkelbach_drive, linear_objective, solve,
)
from far_ee.metrics import all_sinrs, rates_from_sinr
from far_ee.optimizer import (
    initialize, optimize_antenna_position, optimize_ee, repair_feasibility,
)
from far_ee.propagation import (
    MediumParams, VACUUM_PERMEABILITY, VACUUM_PERMITTIVITY, SPEED_OF_LIGHT,
    attenuation_and_phase, propagation_constants,
)
from far_ee.surrogates import mm_majorant, mm_minorant
from far_ee.targets import MovingAntennaTargets

pytestmark = pytest.mark.slow

SEEDS = tuple(range(20))


def _report(num: int, label: str, ok: bool, detail: str = ""):
    line = f"{'PASS' if ok else 'FAIL'} criterion {num}: {label}"
    if detail:
        line += f"  [{detail}]"
    print(line, file=sys.__stdout__, flush=True)
    conftest.ACCEPTANCE_LINES.append(line)
    assert ok, line


# ---------------------------------------------------------------------------
# shared heavy fixtures


@pytest.fixture(scope="session")
def full_runs():
    """20 seeded full-scale optimizations at the default scenario."""
    cfg = ScenarioConfig()
    runs = []
    for seed in SEEDS:
        start = time.perf_counter()
        state = optimize_ee(cfg, seed)
        runs.append((seed, state, time.perf_counter() - start))
    return runs


@pytest.fixture(scope="session")
def baseline_medians():
    cfg = ScenarioConfig()
    sris = [evaluate_sris(cfg, s) for s in SEEDS]
    afr = [evaluate_afr(cfg, s) for s in SEEDS]
    med = lambda reps: float(np.median([r.ee for r in reps if r.feasible]))
    return med(sris), med(afr), all(r.feasible for r in sris + afr)


# ---------------------------------------------------------------------------


def test_criterion_1_physics():
    start = time.perf_counter()
    worst = 0.0
    for sigma in np.logspace(-14, 1, 10):
        for eps_r in np.linspace(1.0, 10.0, 10):
            for d in np.linspace(0.05, 2.0, 10):
                m = MediumParams(sigma, eps_r, 1.0, 0.3)
                consts = propagation_constants(m)
                alpha, theta = attenuation_and_phase(consts, d, d)
                omega = 2.0 * math.pi * SPEED_OF_LIGHT / 0.3
                k = omega * np.sqrt(
                    VACUUM_PERMEABILITY
                    * (eps_r * VACUUM_PERMITTIVITY - 1j * sigma / omega)
                )
                worst = max(
                    worst,
                    abs(alpha - math.exp(k.imag * d)) / math.exp(k.imag * d),
                    abs(theta - k.real * d) / (k.real * d),
                )
    lossless, _ = attenuation_and_phase(
        propagation_constants(MediumParams(0.0, 4.0, 1.0, 0.3)), 1.0, 1.0)
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-10 and lossless == 1.0 and elapsed < 1.0
    _report(1, "plane-wave physics vs complex-wavenumber oracle",
            ok, f"worst rel err {worst:.2e}, {elapsed:.2f}s")


def test_criterion_2_surrogate_soundness():
    from test_surrogates import random_phase_sum

    start = time.perf_counter()
    rng = np.random.default_rng(0)
    worst_gap, worst_anchor, curv_ok = 0.0, 0.0, True
    for i in range(100):
        f = random_phase_sum(rng)
        for _ in range(10):  # 1000 anchors total
            anchor = rng.normal(size=3) * 0.4
            lo = mm_minorant(f, anchor, w_min=1.0)
            hi = mm_majorant(f, anchor, w_min=1.0)
            xs = anchor + rng.normal(size=(1000, 3)) * 0.5
            fx = f.value(xs)
            worst_gap = max(worst_gap,
                            float(np.max(lo.value(xs) - fx)),
                            float(np.max(fx - hi.value(xs))))
            worst_anchor = max(worst_anchor,
                               abs(lo.value(anchor) - float(f.value(anchor))),
                               abs(hi.value(anchor) - float(f.value(anchor))))
        # curvature constants dominate finite-difference Hessian norms
        if i < 20:
            x = rng.normal(size=3) * 0.4
            eps = 1e-5
            H = np.column_stack([
                (f.grad(x + eps * e) - f.grad(x - eps * e)) / (2 * eps)
                for e in np.eye(3)
            ])
            if f.curvature_bound(1.0) < np.max(np.abs(np.linalg.eigvalsh(
                    0.5 * (H + H.T)))) - 1e-6:
                curv_ok = False
    elapsed = time.perf_counter() - start
    ok = worst_gap <= 1e-9 and worst_anchor <= 1e-9 and curv_ok and elapsed < 120
    _report(2, "minorants/majorants one-sided and anchored",
            ok, f"worst overshoot {worst_gap:.2e}, anchor {worst_anchor:.2e}, {elapsed:.0f}s")


def test_criterion_3_gradients():
    st = initialize(ScenarioConfig(), 0)
    targets = MovingAntennaTargets(st.config, st.placement, st.angles, st.draw,
                                   st.channels)
    rng = np.random.default_rng(1)
    omega = st.control.Omega[:, 0]
    worst = 0.0
    checked = 0
    for kind in ("user", "faru", "farb", "bs"):
        fs = [targets.signal(omega, 0, kind, 0).abs_squared(),
              targets.signal(omega, 1, kind, 0).abs_squared(),
              targets.combined_power(omega, kind, 0)]
        for f in fs:
            if not f.terms:
                continue
            for _ in range(16):  # > 100 points across kinds/targets
                x = targets.anchor(kind, 0) + rng.uniform(-0.05, 0.05, 3)
                g = f.grad(x)
                eps = 1e-5
                fd = np.array([
                    (f.value(x + eps * e) - f.value(x - eps * e)) / (2 * eps)
                    for e in np.eye(3)
                ])
                scale = max(1e-12, float(np.linalg.norm(fd)))
                worst = max(worst, float(np.linalg.norm(g - fd)) / scale)
                checked += 1
    ok = worst <= 1e-6 and checked >= 100
    _report(3, "analytic link gradients vs central differences",
            ok, f"worst rel err {worst:.2e} over {checked} points")


def _grid_oracle(objective, feasible, lo, hi, rounds=3, points=101):
    best_x, best_v = None, -math.inf
    lo, hi = np.array(lo, float), np.array(hi, float)
    for _ in range(rounds):
        xs = np.linspace(lo[0], hi[0], points)
        ys = np.linspace(lo[1], hi[1], points)
        for x in xs:
            for y in ys:
                z = np.array([x, y])
                if feasible(z):
                    v = objective(z)
                    if v > best_v:
                        best_x, best_v = z, v
        span = (hi - lo) / (points - 1)
        lo = np.maximum(lo, best_x - 2 * span)
        hi = np.minimum(hi, best_x + 2 * span)
    return best_x, best_v


def test_criterion_4_kernel_vs_sampling_oracle():
    rng = np.random.default_rng(2)
    worst_obj, worst_kkt = 0.0, 0.0
    for _ in range(20):
        n = 2
        A = rng.normal(size=(n, n))
        P = A @ A.T + 0.3 * np.eye(n)
        c = rng.normal(size=n)
        a1, b1 = rng.normal(size=n), rng.uniform(0.5, 2.0)
        obj = SeparableLogObjective(n, linear=c, quad=P)
        cons = [LinearConstraint(a1, b1)]
        cons += [cc for i in range(n) for cc in box_constraints(i, -2.0, 2.0, n)]
        res = solve(ConvexProgram(n, obj, cons, x0=np.zeros(n)))
        assert res.status == "optimal"
        worst_kkt = max(worst_kkt, res.kkt_residual)
        _, ref = _grid_oracle(
            obj.value, lambda z: float(a1 @ z) <= b1, [-2, -2], [2, 2])
        worst_obj = max(worst_obj, abs(res.objective_value - ref) / max(1.0, abs(ref)))
    ok = worst_obj <= 1e-3 and worst_kkt <= 1e-8
    _report(4, "barrier kernel vs refined-grid sampling oracle",
            ok, f"worst obj gap {worst_obj:.2e}, worst KKT {worst_kkt:.2e}")


def test_criterion_5_dinkelbach():
    rng = np.random.default_rng(3)
    ok = True
    worst_gap = 0.0
    for _ in range(20):
        n = 3
        c, d = rng.normal(size=n), rng.uniform(0.1, 1.0, size=n)
        c0, d0 = rng.uniform(0.5, 2.0), rng.uniform(1.0, 3.0)

        def num(x):
            return float(c @ x + c0)

        def den(x):
            return float(d @ x + d0)

        def solver(s):
            cons = [cc for i in range(n) for cc in box_constraints(i, 0.0, 1.0, n)]
            res = solve(ConvexProgram(n, linear_objective(n, c - s * d), cons,
                                      x0=np.full(n, 0.5)))
            return res.x if res.status == "optimal" else None

        x, s, trace = dinkelbach_drive(num, den, solver)
        if any(b < a - 1e-12 for a, b in zip(trace, trace[1:])):
            ok = False
        worst_gap = max(worst_gap, abs(num(x) - s * den(x)))
    ok = ok and worst_gap < 1e-6
    _report(5, "Dinkelbach ratio sequence monotone, terminal gap < 1e-6",
            ok, f"worst gap {worst_gap:.2e}")


def test_criterion_6_monotone_convergence(full_runs):
    bad = []
    worst_time = 0.0
    for seed, state, elapsed in full_runs:
        worst_time = max(worst_time, elapsed)
        trace = state.ee_trace
        mono = all(b >= a - 1e-9 * max(1.0, abs(a)) for a, b in zip(trace, trace[1:]))
        converged = (state.outer_iteration <= 10 and len(trace) >= 2
                     and abs(trace[-1] - trace[-2]) <= 1e-3 * max(1.0, abs(trace[-1])))
        if state.feasible and not (mono and converged):
            bad.append(seed)
    # 60 s/seed is the desktop target; assert the relaxed CI budget
    ok = not bad and worst_time < 300.0
    _report(6, "outer EE trace monotone, converged within 10 rounds on 20 seeds",
            ok, f"bad seeds {bad}, max {worst_time:.0f}s/seed")


def test_criterion_7_feasibility(full_runs):
    worst = 0.0
    for seed, state, _ in full_runs:
        if not state.feasible:
            continue
        rep = state.report()
        worst = max(worst, max(rep.violations.values()))
    ok = worst <= 1e-6
    _report(7, "converged solutions satisfy every constraint within 1e-6",
            ok, f"worst violation {worst:.2e}")


def test_criterion_8_small_instance_positions():
    cfg = ScenarioConfig(num_users=1, num_far_antennas=1, num_bs_antennas=1,
                         min_rate=1e5)
    worst = 0.0
    for seed in range(10):
        state = initialize(cfg, seed)
        assert repair_feasibility(state)
        for kind in ("user", "faru", "farb", "bs"):
            ref = {"user": state.placement.user_refs[:, 0],
                   "faru": state.placement.o_u,
                   "farb": state.placement.o_b,
                   "bs": np.zeros(3)}[kind]
            (xlo, xhi), (zlo, zhi) = region_bounds(ref, cfg)

            def rate_at(x, z):
                moved = state.placement.copy()
                arr = {"user": moved.T, "faru": moved.U,
                       "farb": moved.B, "bs": moved.R}[kind]
                arr[0, 0], arr[2, 0] = x, z
                ch = build_channel(cfg, moved, state.angles, state.draw)
                return float(np.sum(rates_from_sinr(
                    all_sinrs(state.control, ch, cfg), cfg)))

            grid_best = max(
                rate_at(x, z)
                for x in np.linspace(xlo, xhi, 50)
                for z in np.linspace(zlo, zhi, 50)
            )
            optimize_antenna_position(state, kind, 0)
            arr = {"user": state.placement.T, "faru": state.placement.U,
                   "farb": state.placement.B, "bs": state.placement.R}[kind]
            achieved = rate_at(arr[0, 0], arr[2, 0])
            worst = max(worst, (grid_best - achieved) / grid_best)
    ok = worst <= 0.01
    _report(8, "single-antenna position steps within 1% of 50x50 grid search",
            ok, f"worst gap {worst:.3%}")


def test_criterion_9_scheme_ordering(full_runs, baseline_medians):
    far = float(np.median([s.report().ee for _, s, _ in full_runs if s.feasible]))
    sris, afr, all_feasible = baseline_medians
    ok = far >= sris >= 0.0 and far >= afr and all_feasible
    _report(9, "median EE ordering: movable relay above both baselines",
            ok, f"far {far:.3e}, sris {sris:.3e}, afr {afr:.3e}")


def _median_ee(cfg, axis, value, seeds):
    ees = []
    for seed in seeds:
        rec = run_scenario(apply_axis(cfg, axis, value), "far", seed)
        if rec.feasible:
            ees.append(rec.ee)
    return float(np.median(ees)) if ees else 0.0


def test_criterion_10_trends():
    tiny = ScenarioConfig(num_users=1, num_far_antennas=1, num_bs_antennas=1,
                          min_rate=3e5)
    seeds = range(5)
    slack = 1e-9
    results = {}

    rmin = [_median_ee(tiny, "R_min", v, seeds) for v in (3e5, 3e6, 6e6)]
    results["R_min down"] = all(b <= a + slack * a for a, b in zip(rmin, rmin[1:]))

    dist = [_median_ee(tiny, "user_distance", v, seeds) for v in (80.0, 130.0)]
    results["distance down"] = dist[1] <= dist[0] + slack * dist[0]

    quiet = ScenarioConfig(num_users=1, num_far_antennas=1, num_bs_antennas=1,
                           min_rate=0.0)
    noise = [_median_ee(quiet, "noise_bs", dbm_to_watt(v), seeds)
             for v in (-170.0, -150.0, -130.0, -110.0)]
    flat_then_down = (
        all(b <= a + slack * a for a, b in zip(noise, noise[1:]))
        and (noise[0] - noise[1]) <= (noise[2] - noise[3])
    )
    results["noise flat-then-down"] = flat_then_down

    m_up = [_median_ee(tiny, "faru_count", v, seeds) for v in (1, 2)]
    results["antenna count up"] = m_up[1] >= m_up[0] - slack * m_up[0]

    bw = [_median_ee(tiny, "bandwidth", v, seeds) for v in (5e6, 20e6)]
    results["bandwidth up"] = bw[1] > bw[0]

    bad = [k for k, v in results.items() if not v]
    _report(10, "paired-seed medians follow the reported directional trends",
            not bad, f"failed: {bad}" if bad else "all five axes")


def test_criterion_11_determinism(tmp_path):
    from far_ee.harness import SweepSpec, sweep

    cfg = ScenarioConfig(num_users=1, num_far_antennas=1, num_bs_antennas=1,
                         min_rate=1e5)
    rows_ok = (run_scenario(cfg, "far", 0).csv_row()
               == run_scenario(cfg, "far", 0).csv_row())
    blobs = []
    for name in ("r1.csv", "r2.csv"):
        out = tmp_path / name
        sweep(SweepSpec(axis="R_min", values=(1e5,), schemes=("far", "sris", "afr"),
                        seeds=(0,), output=str(out), base_config=cfg))
        blobs.append(out.read_bytes())
    ok = rows_ok and blobs[0] == blobs[1]
    _report(11, "repeated (config, scheme, seed) runs byte-identical",
            ok)
