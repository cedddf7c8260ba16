"""End-to-end acceptance checks, one PASS/FAIL line per criterion.

Tolerances, ladder sizes and seed counts are pinned here. The lines are
printed as they are produced and repeated in the terminal summary.
Run alone with ``pytest tests/test_acceptance.py -v``; the whole file takes
about ten minutes on one core.
"""
import math
import time

import numpy as np
import pytest

from frontlab.baseline import baseline_f0
from frontlab.cli import main
from frontlab.config import parse_config
from frontlab.geometry import (ConvexBody, angular_resolution, direction_grid, hausdorff, random_polygon,
                               random_speed, regularization_checks, regularize, theta_set)
from frontlab.hypotheses import ReactionHypotheses
from frontlab.reaction import homogeneous_field, sample_field
from frontlab.runner import read_csv, read_jsonl, run_homogenize
from frontlab.solver import Grid, Stepper, arrival_time_field, build_front_data
from frontlab.speeds import (FieldSpec, baseline_speed, front_speed_1d, observed_order, richardson,
                             speed_profile, stats_from_arrivals)
from oracles import brute_force_minorant

HYP1 = ReactionHypotheses(M=10, theta1=0.25, m1=2, alpha1=1, ramp_width=0.3, d=1)
HYP2 = HYP1.replace(d=2)
TW_SPEED = 0.6893864530047586  # shooting oracle for the homogeneous reaction

F0_TOL = 1e-12
WORKED_TOL = 1e-6
ORDER_MIN = 1.8
C0_SLACK = 0.02
ORDER_TOL = 1e-10
ISOTROPY_TOL = 0.02
B_HAT_MAX = 0.85
FREQ_MIN_1D = 0.95
FREQ_MIN_2D = 0.90

HEADER = """
[hypotheses]
M = 10
theta1 = 0.25
m1 = 2
alpha1 = 1
ramp_width = 0.3
"""

LADDER_1D = HEADER + """d = 1

[geometry]
body = box
lo = -1
hi = 1

[ladder]
eps = 0.2, 0.1, 0.05, 0.02
seeds = 20
T0 = 1
theta = 0.5
speed_lengths = 10, 20, 40
speed_seeds = 8

[runtime]
root_seed = 20240101
field = random
"""

FLUCT_2D = HEADER + """d = 2

[runtime]
root_seed = 20240101
field = random
"""

SMOKE_2D = HEADER + """d = 2

[geometry]
body = box
lo = -1, -1
hi = 1, 1
directions = 64

[ladder]
eps = 0.2, 0.1
seeds = 10
T0 = 1
theta = 0.5

[runtime]
root_seed = 20240101
field = random
"""


# ---------------------------------------------------------------------------
# 1. baseline against brute force
# ---------------------------------------------------------------------------


def _random_hyp(rng):
    theta1 = rng.uniform(0.05, 0.45)
    m1 = rng.uniform(1.1, 4.0)
    M = rng.uniform(1.0, 20.0)
    alpha1 = rng.uniform(0.1, 1.0) * min(5.0, M * theta1 ** (1 - m1))
    return ReactionHypotheses(M=M, theta1=theta1, m1=m1, alpha1=alpha1, theta_star=theta1 / 5)


def test_criterion_1_baseline_oracle(verdict):
    rng = np.random.default_rng(11)
    worst = 0.0
    t_max = 0.0
    for _ in range(5):
        hyp = _random_hyp(rng)
        t = time.perf_counter()
        F0 = baseline_f0(hyp, 4096)
        t_max = max(t_max, time.perf_counter() - t)
        # the jump point 1 - theta1 joins the sample set with value 0
        jump = 1.0 - hyp.theta1
        u = np.append(F0.u, jump)
        g = np.append(np.where(F0.u > jump, hyp.alpha1 * (1 - F0.u) ** hyp.m1, 0.0), 0.0)
        ref = brute_force_minorant(u, g, hyp.M)[:-1]
        worst = max(worst, float(np.max(np.abs(F0.values - ref))))
    F0 = baseline_f0(ReactionHypotheses(M=1, theta1=0.25, m1=2, alpha1=1))
    w = max(abs(F0(0.77) - 0.02), abs(F0(0.8) - 0.04))
    ok = worst <= F0_TOL and w <= WORKED_TOL and t_max < 1.0
    assert verdict(1, "baseline vs brute force", ok,
                   f"max err {worst:.2e} (<= {F0_TOL:g}), worked values err {w:.2e} (<= {WORKED_TOL:g}), "
                   f"slowest build {t_max:.3f}s (< 1s)")


# ---------------------------------------------------------------------------
# 2. solver fidelity
# ---------------------------------------------------------------------------


def test_criterion_2_solver_fidelity(verdict):
    t0 = time.perf_counter()
    f = homogeneous_field(HYP1)
    hs = (0.25, 0.125, 0.0625)
    speeds = [front_speed_1d(f, HYP1, h) for h in hs]
    order = observed_order(speeds)
    c_ext = richardson(speeds, order=2.0)
    c0 = baseline_speed(HYP1)["c0"]
    c1 = 2.0 * math.sqrt(HYP1.M * HYP1.d)
    in_band = all(c0 * (1 - C0_SLACK) <= c <= c1 for c in speeds)
    wall = time.perf_counter() - t0
    ok = order >= ORDER_MIN and in_band and wall < 120.0
    assert verdict(2, "solver fidelity", ok,
                   f"speeds {[round(c, 6) for c in speeds]} order {order:.3f} (>= {ORDER_MIN}), "
                   f"band [{c0 * (1 - C0_SLACK):.4f}, {c1:.4f}], extrapolated {c_ext:.6f} "
                   f"vs oracle {TW_SPEED:.6f}, {wall:.1f}s (< 120s)")


# ---------------------------------------------------------------------------
# 3. discrete comparison principle
# ---------------------------------------------------------------------------


def _ordered_pair(rng, shape):
    kind = rng.integers(3)
    if kind == 0:
        u = rng.random(shape)
    elif kind == 1:
        u = (rng.random(shape) < 0.5).astype(float)
    else:
        u = np.clip(rng.normal(0.6, 0.3, shape), 0, 1)
    gap = rng.random(shape) * (rng.random(shape) < rng.uniform(0.1, 1.0))
    v = np.minimum(u + rng.uniform(0.0, 0.5) * gap, 1.0)
    return u, v


def test_criterion_3_comparison_principle(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    worst = -math.inf
    pairs = 0
    for d, box in ((1, ([-12.0], [12.0])), (2, ([-4.0, -4.0], [4.0, 4.0]))):
        hyp = HYP1.replace(d=d)
        for k in range(100):
            g = Grid.box(*box, 0.25)
            f = sample_field(hyp, g.physical_bounds(), 1000 * d + k)
            st = Stepper(g, f)
            u, v = _ordered_pair(rng, g.shape)
            bu, bv = np.empty_like(u), np.empty_like(v)
            t = 0.0
            for _ in range(1000):
                st.step(u, bu, t)
                st.step(v, bv, t)
                u, bu = bu, u
                v, bv = bv, v
                t += st.dt
                worst = max(worst, float(np.max(u - v)))
            pairs += 1
    wall = time.perf_counter() - t0
    ok = pairs == 200 and worst <= ORDER_TOL and wall < 300.0
    assert verdict(3, "discrete comparison principle", ok,
                   f"{pairs} pairs x 1000 steps, max(u - v) = {worst:.2e} (<= {ORDER_TOL:g}), {wall:.1f}s (< 300s)")


# ---------------------------------------------------------------------------
# 4. geometry suite
# ---------------------------------------------------------------------------


def test_criterion_4_geometry(verdict):
    t0 = time.perf_counter()
    E = direction_grid(2)
    rng = np.random.default_rng(4)
    res = angular_resolution(E)
    semi = []
    for _ in range(50):
        A = random_polygon(rng, E)
        c = random_speed(rng, E)
        t, s = rng.uniform(0, 2, 2)
        one = theta_set(A, c, t + s)
        two = theta_set(theta_set(A, c, t), c, s)
        semi.append(hausdorff(one, two) / (res * one.diameter))
    sandwich_bad = 0
    for _ in range(50):
        A = random_polygon(rng, E)
        c = random_speed(rng, E, 0.5, 2.0)
        t = rng.uniform(0.01, 2.0)
        th = theta_set(A, c, t)
        P = rng.uniform(-8, 8, (3000, 2))
        dA = A.distance(P)
        inner_ok = np.all(th.contains(P[dA <= 0.5 * t], closed=True, tol=1e-12))
        outer_ok = not np.any(th.contains(P[dA > 2.0 * t + res * th.diameter], closed=True))
        sandwich_bad += not (inner_ok and outer_ok)
    reg_bad = []
    for k in range(20):
        A = random_polygon(rng, E)
        c = random_speed(rng, E)
        r = rng.uniform(0.05, 0.2)
        T = max(1.0, 2 * r / 0.5)
        A1, c1, info = regularize(A, c, r, T, c0=0.5, c1=2.0, check=False)
        ball_tol = min(0.5, 2.0 * A.angular_resolution * A.diameter)
        checks = regularization_checks(A, c, r, T, A1, c1, c0=0.5, c1=2.0, tol=info["tolerance"],
                                       ball_tol=ball_tol)
        strict = regularization_checks(A, c, r, T, A1, c1, c0=0.5, c1=2.0, tol=info["tolerance"])
        for name, chk in list(checks.items()) + [("iii_strict", strict["iii_interior_ball"])]:
            if chk["excess"] > chk["tol"]:
                reg_bad.append((k, name, chk["excess"]))
    wall = time.perf_counter() - t0
    ok = max(semi) <= 1.0 and sandwich_bad == 0 and not reg_bad and wall < 60.0
    assert verdict(4, "geometry suite", ok,
                   f"semigroup worst {max(semi):.3f} x grid tol over 50, sandwich failures {sandwich_bad}/50, "
                   f"regularization failures {len(reg_bad)}/20 {reg_bad[:3]}, {wall:.1f}s (< 60s)")


# ---------------------------------------------------------------------------
# 5 and 8. fluctuation scaling through the CLI, run twice
# ---------------------------------------------------------------------------


def _speed_cli(cfg, out):
    return main(["--out-dir", str(out), "speed", "--config", str(cfg), "--direction", "1,0",
                 "--lengths", "20,40,80", "--seeds", "30", "--out", "fluct.csv"])


@pytest.fixture(scope="module")
def fluct_runs(tmp_path_factory):
    base = tmp_path_factory.mktemp("fluct")
    cfg = base / "fluct.ini"
    cfg.write_text(FLUCT_2D)
    t0 = time.perf_counter()
    codes = [_speed_cli(cfg, base / "a"), _speed_cli(cfg, base / "b")]
    return base, codes, (time.perf_counter() - t0) / 2


def test_criterion_5_fluctuation_scaling(verdict, fluct_runs):
    base, codes, wall = fluct_runs
    assert codes == [0, 0]
    _, rows = read_csv(base / "a" / "fluct.csv")
    per_seed = [r for r in rows if r["seed"] not in ("mean", "slowness")]
    L = sorted({float(r["l"]) for r in per_seed})
    seeds = sorted({r["seed"] for r in per_seed})
    T = np.array([[float(next(r["T"] for r in per_seed if r["seed"] == s and float(r["l"]) == l))
                   for l in L] for s in seeds])
    st = stats_from_arrivals(T, L, HYP2.beta)
    ok = len(seeds) == 30 and L == [20.0, 40.0, 80.0] and st.b_hat <= B_HAT_MAX and bool(np.all(np.diff(st.cv) < 0))
    assert verdict(5, "fluctuation scaling", ok,
                   f"b_hat {st.b_hat:.3f} (<= {B_HAT_MAX}), cv {np.round(st.cv, 6).tolist()} strictly decreasing, "
                   f"std {np.round(st.std, 4).tolist()}, 30 seeds, {wall:.0f}s per run")


# ---------------------------------------------------------------------------
# 6. speed profile
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def profile_2d():
    t0 = time.perf_counter()
    prof = speed_profile(HYP2, direction_grid(2, 32), (10.0, 20.0, 40.0), 8, root_seed=20240101)
    return prof, time.perf_counter() - t0


def _radial_speeds(h=0.25):
    """Radial front speeds of a homogeneous expanding ball along three rays of
    one fixed Cartesian grid (quarter plane; the Neumann walls are mirror lines)."""
    f = homogeneous_field(HYP2)
    g = Grid.box([0.0, 0.0], [100.0, 100.0], h)
    u0 = build_front_data(ConvexBody.ball(2, 2.0), HYP2, g)
    R = u0.meta["R"]
    rays = ((1, 0), (2, 1), (1, 1))
    watch, dist = [], []
    for a, b in rays:
        n = math.hypot(a, b)
        js = [int(round(r / (n * h))) for r in (R + 10.0, R + 40.0)]
        watch += [np.ravel_multi_index((a * j, b * j), g.shape) for j in js]
        dist += [j * n * h for j in js]
    at = arrival_time_field(f, u0, 400.0, 1.0 - HYP2.theta_star, watch=watch)
    T = at.times
    return [(dist[2 * k + 1] - dist[2 * k]) / (T[2 * k + 1] - T[2 * k]) for k in range(len(rays))]


def test_criterion_6_speed_profile(verdict, profile_2d):
    prof, wall = profile_2d
    bad = prof.bound_violations(2.0)
    t0 = time.perf_counter()
    hom = speed_profile(HYP2, direction_grid(2, 32), (10.0, 20.0, 40.0), 2, root_seed=1,
                        spec=FieldSpec(HYP2, "homogeneous"), c0=prof.c0, min_seeds=2)
    frame_spread = float(np.ptp(hom.c_hat) / np.mean(hom.c_hat))
    radial = _radial_speeds()
    lab_spread = float(np.ptp(radial) / np.mean(radial))
    wall += time.perf_counter() - t0
    ok = prof.directions.shape[0] == 32 and not bad and frame_spread <= ISOTROPY_TOL and lab_spread <= ISOTROPY_TOL
    assert verdict(6, "speed profile", ok,
                   f"c_hat in [{prof.c_hat.min():.4f}, {prof.c_hat.max():.4f}], band [c0 {prof.c0:.4f}, c1 {prof.c1:.4f}] "
                   f"+- 2 stderr, violations {len(bad)}/32; homogeneous spread {frame_spread:.2e} (slab frames), "
                   f"{lab_spread:.2e} (fixed grid rays, speeds {np.round(radial, 4).tolist()}) (<= {ISOTROPY_TOL}), "
                   f"{wall:.0f}s")


# ---------------------------------------------------------------------------
# 7 and 8. homogenization ladder through the CLI, run twice; d=2 smoke run
# ---------------------------------------------------------------------------


def _homogenize_cli(cfg, out):
    code = main(["--out-dir", str(out), "homogenize", "--config", str(cfg)])
    if code == 0:
        code = main(["--out-dir", str(out), "report", "--in", str(out / "report.jsonl")])
    return code


@pytest.fixture(scope="module")
def ladder_runs(tmp_path_factory):
    base = tmp_path_factory.mktemp("ladder")
    cfg = base / "ladder.ini"
    cfg.write_text(LADDER_1D)
    t0 = time.perf_counter()
    codes = [_homogenize_cli(cfg, base / "a"), _homogenize_cli(cfg, base / "b")]
    return base, codes, (time.perf_counter() - t0) / 2


def test_criterion_7_homogenization(verdict, ladder_runs, profile_2d, tmp_path):
    base, codes, wall = ladder_runs
    assert codes == [0, 0]
    _, summary = read_csv(base / "a" / "summary.csv")
    med = {}
    for r in summary:
        if r["kind"] == "median_d_H":
            med.setdefault(float(r["t"]), {})[float(r["eps"])] = float(r["value"])
    monotone = all(
        all(by[e_big] > by[e_small] for e_big, e_small in zip(sorted(by, reverse=True), sorted(by, reverse=True)[1:]))
        and len(by) == 4
        for by in med.values()
    )
    sig = next(r for r in summary if r["kind"] == "sigma_hat")
    s_hat, lo, hi = float(sig["value"]), float(sig["lo"]), float(sig["hi"])
    freq = {float(r["eps"]): float(r["value"]) for r in summary if r["kind"] == "success_frequency"}
    ok_1d = monotone and s_hat > 0 and lo > 0 and freq.get(0.02, 0.0) >= FREQ_MIN_1D

    # d=2 smoke run with the measured 32-direction profile as the limit speed
    prof, _ = profile_2d
    cfg2 = tmp_path / "smoke.ini"
    cfg2.write_text(SMOKE_2D)
    rc = parse_config(cfg2)
    t0 = time.perf_counter()
    out = run_homogenize(rc, tmp_path / "smoke.jsonl", tmp_path / "smoke", speed=prof.speed_function())
    wall2 = time.perf_counter() - t0
    _, rows = read_jsonl(out)
    freq2 = {}
    for e in rc.experiment.eps:
        seeds = {}
        for r in rows:
            if r["eps"] == e:
                seeds[r["seed_index"]] = seeds.get(r["seed_index"], True) and r["lower_ok"] and r["upper_ok"]
        freq2[e] = sum(seeds.values()) / len(seeds) if len(seeds) == 10 else 0.0
    ok_2d = all(v >= FREQ_MIN_2D for v in freq2.values())

    ok = ok_1d and ok_2d
    slim = {t: [round(by[e], 4) for e in sorted(by, reverse=True)] for t, by in sorted(med.items())}
    assert verdict(7, "homogenization convergence", ok,
                   f"d=1 medians strictly decreasing at all {len(med)} checkpoints: {monotone} {slim}; "
                   f"sigma_hat {s_hat:.3f} CI ({lo:.3f}, {hi:.3f}); frequency at 0.02 {freq.get(0.02)} "
                   f"(>= {FREQ_MIN_1D}), {wall:.0f}s per run; d=2 smoke frequencies {freq2} (>= {FREQ_MIN_2D}), "
                   f"{wall2:.0f}s")


def test_criterion_8_determinism(verdict, fluct_runs, ladder_runs):
    fb, fcodes, _ = fluct_runs
    lb, lcodes, _ = ladder_runs
    same = {
        "fluctuation csv": (fb / "a" / "fluct.csv").read_bytes() == (fb / "b" / "fluct.csv").read_bytes(),
        "ladder report": (lb / "a" / "report.jsonl").read_bytes() == (lb / "b" / "report.jsonl").read_bytes(),
        "ladder summary": (lb / "a" / "summary.csv").read_bytes() == (lb / "b" / "summary.csv").read_bytes(),
    }
    ok = fcodes == [0, 0] and lcodes == [0, 0] and all(same.values())
    assert verdict(8, "determinism", ok, ", ".join(f"{k} identical: {v}" for k, v in same.items()))
