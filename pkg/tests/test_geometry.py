import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from frontlab.errors import DomainError
from frontlab.geometry import (ConvexBody, SpeedFunction, angular_resolution, circle_directions, dilate,
                               direction_grid, doubling_study, erode, hausdorff, interior_ball_check, random_polygon,
                               random_speed, regularize, theta_set)

E = direction_grid(2)


def tol_for(body):
    return angular_resolution(body.directions) * body.diameter


def test_ball_hausdorff_close_to_radius_gap():
    A, B = ConvexBody.ball(2, 1.0), ConvexBody.ball(2, 3.0)
    assert hausdorff(A, B) == pytest.approx(2.0, abs=tol_for(B))


def test_square_to_inscribed_ball():
    sq = ConvexBody.box([-1, -1], [1, 1])
    ball = ConvexBody.ball(2, 1.0)
    assert hausdorff(sq, ball) == pytest.approx(math.sqrt(2) - 1, abs=1e-9)


def test_interval_theta_set_exact():
    A = ConvexBody.interval(-1.0, 2.0)
    c = SpeedFunction(A.directions, np.array([0.5, 2.0]))  # directions are (-1, +1)
    th = theta_set(A, c, 3.0)
    assert sorted(th.vertices.ravel().tolist()) == pytest.approx([-2.5, 8.0])


def test_square_theta_membership():
    sq = ConvexBody.box([-1, -1], [1, 1])
    th = theta_set(sq, SpeedFunction.constant(1.0, sq.directions), 1.5)
    assert th.contains(np.array([[2.4, 0.0]]))[0]
    assert not th.contains(np.array([[2.6, 0.0]]))[0]


@given(seed=st.integers(0, 10 ** 6), t=st.floats(0.0, 2.0), s=st.floats(0.0, 2.0))
def test_semigroup(seed, t, s):
    rng = np.random.default_rng(seed)
    A = random_polygon(rng, E)
    c = random_speed(rng, E)
    one = theta_set(A, c, t + s)
    two = theta_set(theta_set(A, c, t), c, s)
    assert hausdorff(one, two) <= tol_for(one)


@given(seed=st.integers(0, 10 ** 6), t=st.floats(0.01, 2.0))
def test_monotone_in_speed(seed, t):
    rng = np.random.default_rng(seed)
    A = random_polygon(rng, E)
    c = random_speed(rng, E)
    bump = rng.uniform(0, 0.5, size=E.shape[0])
    c2 = SpeedFunction(E, c.at(E) + bump)
    small, big = theta_set(A, c, t), theta_set(A, c2, t)
    P = rng.uniform(-6, 6, (2000, 2))
    assert np.all(big.contains(P, closed=True)[small.contains(P, closed=True)])


@given(seed=st.integers(0, 10 ** 6), t=st.floats(0.01, 2.0))
def test_sandwich(seed, t):
    rng = np.random.default_rng(seed)
    A = random_polygon(rng, E)
    c0, c1 = 0.5, 2.0
    c = random_speed(rng, E, c0, c1)
    th = theta_set(A, c, t)
    P = rng.uniform(-8, 8, (3000, 2))
    dA = A.distance(P)
    # B_{c0 t}(A) ⊆ Θ(t) ⊆ B_{c1 t}(A), compared on probes with the exact distance to A
    inner = dA <= c0 * t
    assert np.all(th.contains(P[inner], closed=True, tol=1e-12))
    outside = dA > c1 * t + tol_for(th)
    assert not np.any(th.contains(P[outside], closed=True))


@given(seed=st.integers(0, 10 ** 6), r=st.floats(0.01, 0.5))
def test_erosion_dilation_adjunction(seed, r):
    rng = np.random.default_rng(seed)
    A = random_polygon(rng, E)
    P = rng.uniform(-3, 3, (2000, 2))
    sd = A.signed_distance(P)
    er = erode(A, r)
    ring = circle_directions(64)
    # x ∈ A⁰_r  ⇔  B_r(x) ⊆ A, away from ties
    clear = np.abs(sd + r) > 1e-6
    if not er.is_empty:
        inside = er.contains(P, closed=True)
        ball_in = np.array([A.contains(p + r * ring, closed=True, tol=1e-12).all() for p in P])
        assert np.array_equal(inside[clear], (sd <= -r)[clear])
        # the ring test is necessary: points of the erosion have their ring in A
        assert np.all(ball_in[inside])
    dl = dilate(A, r)
    assert np.all(dl.contains(P[sd <= r - 1e-9], closed=True))


def test_erode_to_empty():
    assert erode(ConvexBody.ball(2, 1.0), 1.5).is_empty
    with pytest.raises(DomainError):
        erode(ConvexBody.ball(2, 1.0), -0.1)


def test_interior_ball_check():
    ok, v, _ = interior_ball_check(ConvexBody.ball(2, 1.0), 0.9)
    assert ok and v <= 1e-12
    ok, v, _ = interior_ball_check(ConvexBody.box([-1, -1], [1, 1]), 0.2)
    assert not ok and v > 0


def test_regularization_on_random_data():
    rng = np.random.default_rng(7)
    for _ in range(4):
        A = random_polygon(rng, E)
        c = random_speed(rng, E)
        r = rng.uniform(0.05, 0.2)
        T = max(1.0, 2 * r / 0.5)
        A1, c1, info = regularize(A, c, r, T, c0=0.5, c1=2.0)
        for name, chk in info["checks"].items():
            assert chk["excess"] <= chk["tol"], name
        assert np.all(c1.at(E) <= c.at(E) + info["tolerance"] / T)


def test_regularize_rejects_short_horizon():
    A = ConvexBody.ball(2, 1.0)
    with pytest.raises(DomainError):
        regularize(A, SpeedFunction.constant(1.0, E), 0.5, 0.5)


def test_csv_roundtrip(tmp_path):
    A = random_polygon(np.random.default_rng(0), E)
    A.to_csv(tmp_path / "a.csv")
    B = ConvexBody.from_csv(tmp_path / "a.csv")
    assert np.array_equal(A.directions, B.directions) and np.array_equal(A.support, B.support)


def test_speed_interpolation_exact_on_grid():
    c = random_speed(np.random.default_rng(1), E)
    assert np.allclose(c.at(E), c.values)
    fine = circle_directions(1024)
    v = c.at(fine)
    assert v.min() >= c.values.min() - 1e-12 and v.max() <= c.values.max() + 1e-12


def test_resolution_doubling_shrinks_discretization_error():
    errs = []
    for n in (64, 128, 256):
        d = circle_directions(n)
        A = ConvexBody.ball(2, 1.0, directions=d)
        th = theta_set(A, SpeedFunction.constant(1.0, d), 1.0)
        errs.append(float(np.linalg.norm(th.vertices, axis=1).max()) - 2.0)
    assert errs[0] > errs[1] > errs[2] > 0
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.05)


def test_doubling_study_is_second_order():
    out = doubling_study(lambda d: ConvexBody.box([-1, -1], [1, 1], d), lambda d: 1 + 0.3 * d[:, 0] ** 2, 1.0)
    assert out["gaps"][0] > out["gaps"][1] > out["gaps"][2]
    assert out["order"] == pytest.approx(2.0, abs=0.1)


def test_one_sided_1d_speed_reports_missing_direction():
    c = SpeedFunction(np.array([[1.0]]), np.array([0.7]))
    assert c.at(np.array([[1.0]]))[0] == 0.7
    with pytest.raises(DomainError):
        c.at(np.array([[-1.0], [1.0]]))
