import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from frontlab.baseline import baseline_f0
from frontlab.errors import ConfigurationError, DomainError, NumericalError
from frontlab.geometry import ConvexBody
from frontlab.hypotheses import ReactionHypotheses
from frontlab.reaction import homogeneous_field, sample_field
from frontlab.solver import (Grid, GridState, HalfSpace, Stepper, advance, arrival_time_field,
                             build_front_data, laplacian, level_crossings, max_stable_dt, snapshots,
                             superlevel_set, transition_width)
from frontlab.speeds import baseline_speed, front_speed_1d, observed_order, richardson
from oracles import homogeneous_rate, wave_speed

# continuum speeds from the phase-plane shooting oracle (tests/oracles.py)
TW_SPEED = 0.6893864530047586  # (1-u)^2 smoothstep((u-0.25)/0.3)
C0_M10 = 0.11878356487072049  # F0 for M=10, theta1=0.25, m1=2, alpha1=1

HYP1 = ReactionHypotheses(M=10, theta1=0.25, m1=2, alpha1=1, ramp_width=0.3, d=1)
HYP2 = HYP1.replace(d=2)


def test_grid_box_is_node_aligned():
    g = Grid.box([-1.1, 0.3], [2.05, 1.0], 0.25)
    (a0, b0), (a1, b1) = g.extents
    assert a0 <= -1.1 and b0 >= 2.05 and a1 <= 0.3 and b1 >= 1.0
    assert all(abs(o / 0.25 - round(o / 0.25)) < 1e-12 for o in g.origin)


def test_laplacian_of_quadratic_is_exact_inside():
    g = Grid.box([-3, -3], [3, 3], 0.5)
    P = g.points()
    u = (P[:, 0] ** 2 + 3 * P[:, 1] ** 2).reshape(g.shape)
    lap = laplacian(u, g)
    assert np.allclose(lap[1:-1, 1:-1], 8.0, atol=1e-10)


def test_periodic_laplacian_of_sine():
    n = 64
    h = 2 * np.pi / n
    g = Grid((n,), h, (0.0,), ("periodic",))
    x = g.axes()[0]
    lap = laplacian(np.sin(x), g)
    assert np.allclose(lap, -np.sin(x) * (2 - 2 * np.cos(h)) / h ** 2, atol=1e-12)


def test_dt_bound_enforced():
    g = Grid.box([-5], [5], 0.25)
    f = homogeneous_field(HYP1)
    dt = max_stable_dt(g, f.lipschitz_u, HYP1.M)
    assert dt == pytest.approx(min(1 / (2 / 0.0625 + f.lipschitz_u), 0.05))
    with pytest.raises(ConfigurationError):
        Stepper(g, f, dt=1.01 * dt)


def test_nan_raises_with_dump():
    g = Grid.box([-5], [5], 0.25)
    st_ = Stepper(g, homogeneous_field(HYP1))
    u = np.zeros(g.shape)
    u[3] = np.nan
    with pytest.raises(NumericalError) as ei:
        st_.step(u, np.empty_like(u), 0.0)
    assert ei.value.dump["nan_count"] >= 1


def test_constant_states_are_fixed():
    g = Grid.box([-5, -5], [5, 5], 0.5)
    f = sample_field(HYP2, g.physical_bounds(), 0)
    for c in (0.0, 1.0, 0.1):
        s = advance(GridState(g, np.full(g.shape, c), 0.0), f, 3.0)
        assert np.all(s.u == c)


def test_snapshots_hit_requested_times():
    g = Grid.box([-5], [5], 0.25)
    f = homogeneous_field(HYP1)
    u0 = build_front_data(HalfSpace(np.array([1.0]), np.array([-2.0])), HYP1, g)
    out = snapshots(u0, f, [0.3, 1.0, 2.77])
    assert [s.t for s in out] == [0.3, 1.0, 2.77]
    # the same run in one go gives the same array
    assert np.array_equal(advance(u0, f, 2.77).u, out[-1].u) or np.allclose(advance(u0, f, 2.77).u, out[-1].u,
                                                                           atol=1e-14)


@given(seed=st.integers(0, 2 ** 31), d=st.sampled_from([1, 2]), gap=st.floats(0.0, 0.5))
def test_comparison_principle(seed, d, gap):
    rng = np.random.default_rng(seed)
    hyp = HYP1.replace(d=d)
    g = Grid.box([-4] * d, [4] * d, 0.5)
    f = sample_field(hyp, g.physical_bounds(), seed)
    u = rng.random(g.shape)
    v = np.minimum(u + gap * rng.random(g.shape), 1.0)
    st_ = Stepper(g, f)
    a, b = GridState(g, u, 0.0), GridState(g, v, 0.0)
    for _ in range(5):
        a = advance(a, f, a.t + 20 * st_.dt, stepper=st_)
        b = advance(b, f, b.t + 20 * st_.dt, stepper=st_)
        assert np.all(a.u <= b.u + 1e-10)
        assert a.u.min() >= 0 and b.u.max() <= 1


def test_front_data_residual_and_monotonicity():
    g = Grid.box([-15, -15], [15, 15], 0.5)
    f = sample_field(HYP2, g.physical_bounds(), 1)
    u0 = build_front_data(ConvexBody.ball(2, 3.0), HYP2, g)
    F0 = baseline_f0(HYP2)
    res = laplacian(u0.u, g) + F0(u0.u)
    assert res.min() >= -1e-12
    assert u0.meta["monotone"]
    prev = u0
    for t in (2.0, 4.0, 6.0):
        cur = advance(prev, f, t)
        assert np.all(cur.u >= prev.u - 1e-12)
        prev = cur


def test_empty_front_data_is_zero():
    g = Grid.box([-3], [3], 0.5)
    assert np.all(build_front_data(None, HYP1, g).u == 0)


def test_front_speed_matches_traveling_wave_oracle():
    f = homogeneous_field(HYP1)
    speeds = [front_speed_1d(f, HYP1, h) for h in (0.25, 0.125)]
    assert speeds[0] == pytest.approx(TW_SPEED, rel=6e-3)
    assert speeds[1] == pytest.approx(TW_SPEED, rel=2e-3)
    assert abs(speeds[1] - TW_SPEED) < abs(speeds[0] - TW_SPEED)


def test_oracle_is_reproducible():
    assert wave_speed(homogeneous_rate, 0.25, tol=1e-8) == pytest.approx(TW_SPEED, rel=1e-7)


def test_c0_against_shooting_oracle():
    # the tracked F0 front relaxes slowly from above, so finite tracks read high
    c0 = baseline_speed(HYP1)["c0"]
    assert c0 == pytest.approx(C0_M10, rel=0.01)


def test_richardson_and_order_on_synthetic_sequence():
    vals = [1 + 0.3 * h ** 2 for h in (0.4, 0.2, 0.1)]
    assert observed_order(vals) == pytest.approx(2.0, abs=1e-9)
    assert richardson(vals) == pytest.approx(1.0, abs=1e-12)


def test_arrival_times_interpolate_linearly():
    g = Grid.box([-20], [100], 0.25)
    f = homogeneous_field(HYP1)
    u0 = build_front_data(HalfSpace(np.array([1.0]), np.array([0.0])), HYP1, g)
    at = arrival_time_field(f, u0, 150.0, 0.5)
    x = g.axes()[0]
    # beyond the initial profile's reach R
    sel = (x > u0.meta["R"] + 20) & (x < u0.meta["R"] + 60)
    slope = np.polyfit(x[sel], at.times[sel], 1)[0]
    assert 1 / slope == pytest.approx(TW_SPEED, rel=0.01)
    assert np.all(np.diff(at.times[sel]) > 0)


def test_level_crossings_on_linear_profile():
    g = Grid.box([0], [10], 0.5)
    u = np.clip(1 - g.axes()[0] / 10, 0, 1)
    pts = level_crossings(GridState(g, u, 0.0), 0.37)
    assert pts.shape == (1, 1) and pts[0, 0] == pytest.approx(6.3, abs=1e-12)


def test_superlevel_boundary_and_width():
    g = Grid.box([-10], [10], 0.5)
    x = g.axes()[0]
    u = np.clip(1 - np.abs(x) / 5, 0, 1)
    ls = superlevel_set(GridState(g, u, 0.0), 0.5)
    assert ls.mask.sum() == np.sum(np.abs(x) <= 2.5)
    assert ls.boundary.sum() == 2
    # on nodes: {u >= 0.12} is |x| <= 4, {u >= 0.5} is |x| <= 2.5
    assert transition_width(GridState(g, u, 0.0), 0.12, 0.5) == pytest.approx(1.5)
    assert math.isinf(transition_width(GridState(g, 0.3 * np.ones_like(u), 0.0), 0.1, 0.5))
    with pytest.raises(DomainError):
        transition_width(GridState(g, u, 0.0), 0.5, 0.1)


def test_state_roundtrip(tmp_path):
    g = Grid.box([-2, -1], [2, 1], 0.25)
    s = GridState(g, np.random.default_rng(0).random(g.shape), 1.25, {"x": 1})
    p = tmp_path / "s.snap"
    s.save(p, {"field_seed": 5})
    r = GridState.load(p)
    assert r.t == 1.25 and r.grid == g or r.grid.header() == g.header()
    assert np.array_equal(r.u, s.u)
    assert p.read_bytes()[:4] == b"SNAP"
