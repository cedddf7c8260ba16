"""Convex bodies stored as support values on a direction grid.

A body is the intersection of the half-spaces {x . e_i <= h_i}. Vertices
and exact ("true") support values are recovered from the half-space
intersection, which keeps every derived quantity consistent with the
membership rule.
"""
from __future__ import annotations

import csv
import math
from functools import cached_property
from typing import Callable, Optional

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, HalfspaceIntersection, cKDTree

from .errors import ConfigurationError, ConstructionError, DomainError

EMPTY_RADIUS = 1e-12


def circle_directions(n: int) -> np.ndarray:
    a = 2.0 * np.pi * np.arange(n) / n
    return np.stack([np.cos(a), np.sin(a)], axis=1)


def icosphere(level: int) -> np.ndarray:
    """Unit vectors of a subdivided icosahedron (12, 42, 162, 642, ... points)."""
    p = (1.0 + math.sqrt(5.0)) / 2.0
    v = [(-1, p, 0), (1, p, 0), (-1, -p, 0), (1, -p, 0), (0, -1, p), (0, 1, p),
         (0, -1, -p), (0, 1, -p), (p, 0, -1), (p, 0, 1), (-p, 0, -1), (-p, 0, 1)]
    verts = [np.array(x, float) / np.linalg.norm(x) for x in v]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11), (1, 5, 9), (5, 11, 4),
             (11, 10, 2), (10, 7, 6), (7, 1, 8), (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8),
             (3, 8, 9), (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    for _ in range(level):
        cache = {}

        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new
    return np.array(verts)


def direction_grid(d: int, n: Optional[int] = None, level: Optional[int] = None) -> np.ndarray:
    """Default resolution: 256 angles in d=2, icosphere level 3 in d=3."""
    if d == 1:
        return np.array([[-1.0], [1.0]])
    if d == 2:
        return circle_directions(256 if n is None else n)
    if d == 3:
        return icosphere(3 if level is None else level)
    raise ConfigurationError("dimension must be 1, 2 or 3")


def angular_resolution(directions: np.ndarray) -> float:
    d = directions.shape[1]
    if d == 1:
        return math.pi
    if d == 2:
        return 2.0 * math.pi / directions.shape[0]
    # mean nearest-neighbor angle
    tree = cKDTree(directions)
    dist, _ = tree.query(directions, k=2)
    return float(2.0 * np.arcsin(np.clip(dist[:, 1].max() / 2.0, 0.0, 1.0)))


def _segment_distance(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance from each point to the closest of the segments [a_k, b_k]."""
    ab = b - a
    L2 = np.maximum((ab * ab).sum(1), 1e-300)
    best = np.full(points.shape[0], np.inf)
    for lo in range(0, points.shape[0], 4096):
        p = points[lo : lo + 4096]
        ap = p[:, None, :] - a[None, :, :]
        t = np.clip((ap * ab[None]).sum(2) / L2[None], 0.0, 1.0)
        q = ap - t[..., None] * ab[None]
        best[lo : lo + 4096] = np.sqrt((q * q).sum(2).min(1))
    return best


class ConvexBody:
    """Intersection of {x . e_i <= h_i} over a direction grid."""

    def __init__(self, directions, support, *, empty: bool = False, descriptor: Optional[dict] = None):
        E = np.asarray(directions, dtype=float)
        if E.ndim != 2:
            raise ConfigurationError("directions must be an (n, d) array")
        h = np.asarray(support, dtype=float).reshape(-1)
        if h.size != E.shape[0]:
            raise ConfigurationError("one support value per direction")
        if not np.all(np.isfinite(h)):
            raise ConfigurationError("support values must be finite")
        self.directions = E
        self.support = h
        self.descriptor = descriptor
        self._forced_empty = bool(empty)

    # constructors ---------------------------------------------------------
    @classmethod
    def ball(cls, d: int, radius: float, center=None, directions=None) -> "ConvexBody":
        E = direction_grid(d) if directions is None else directions
        c = np.zeros(d) if center is None else np.asarray(center, float)
        return cls(E, E @ c + radius, descriptor={"kind": "ball", "radius": radius, "center": c.tolist()})

    @classmethod
    def box(cls, lo, hi, directions=None) -> "ConvexBody":
        lo = np.atleast_1d(np.asarray(lo, float))
        hi = np.atleast_1d(np.asarray(hi, float))
        E = direction_grid(lo.size) if directions is None else directions
        h = np.where(E > 0, E * hi, E * lo).sum(1)
        return cls(E, h, descriptor={"kind": "box", "lo": lo.tolist(), "hi": hi.tolist()})

    @classmethod
    def interval(cls, a: float, b: float) -> "ConvexBody":
        return cls.box([a], [b])

    @classmethod
    def from_points(cls, points, directions) -> "ConvexBody":
        """Grid representation of conv(points)."""
        P = np.asarray(points, float)
        return cls(directions, (P @ np.asarray(directions).T).max(0))

    @classmethod
    def empty_like(cls, directions) -> "ConvexBody":
        return cls(directions, np.zeros(len(directions)), empty=True)

    # basic properties --------------------------------------------------------
    @property
    def d(self) -> int:
        return self.directions.shape[1]

    @property
    def n(self) -> int:
        return self.directions.shape[0]

    @cached_property
    def chebyshev(self):
        """(center, radius) of the largest inscribed ball."""
        E, h = self.directions, self.support
        if self.d == 1:
            hp = h[E[:, 0] > 0].min()
            hm = h[E[:, 0] < 0].min()
            return np.array([(hp - hm) / 2.0]), float((hp + hm) / 2.0)
        A = np.hstack([E, np.linalg.norm(E, axis=1, keepdims=True)])
        cost = np.zeros(self.d + 1)
        cost[-1] = -1.0
        bounds = [(None, None)] * self.d + [(None, None)]
        res = linprog(cost, A_ub=A, b_ub=h, bounds=bounds, method="highs")
        if res.status != 0:
            if res.status == 3:
                raise DomainError("unbounded body: directions do not span all of S^{d-1}")
            return np.zeros(self.d), -math.inf
        return res.x[: self.d], float(res.x[-1])

    @property
    def is_empty(self) -> bool:
        return self._forced_empty or self.chebyshev[1] <= EMPTY_RADIUS

    def _require(self):
        if self.is_empty:
            raise DomainError("operation undefined for the empty body")

    @cached_property
    def vertices(self) -> np.ndarray:
        self._require()
        if self.d == 1:
            c, r = self.chebyshev
            return np.array([[c[0] - r], [c[0] + r]])
        center, _ = self.chebyshev
        hs = np.hstack([self.directions, -self.support[:, None]])
        V = HalfspaceIntersection(hs, center).intersections
        scale = max(1.0, float(np.abs(V).max()))
        key = np.round(V / (1e-10 * scale)).astype(np.int64)
        _, first = np.unique(key, axis=0, return_index=True)
        return V[np.sort(first)]

    def true_support(self, directions=None) -> np.ndarray:
        """sup over the body of x . e (exact for the polytope)."""
        E = self.directions if directions is None else np.asarray(directions, float)
        return (self.vertices @ E.T).max(0)

    @cached_property
    def tight_support(self) -> np.ndarray:
        return self.true_support()

    @property
    def diameter(self) -> float:
        V = self.vertices
        if V.shape[0] > 2000:
            V = V[ConvexHull(V).vertices] if self.d > 1 else V
        diff = V[:, None, :] - V[None, :, :]
        return float(np.sqrt((diff * diff).sum(2).max()))

    @property
    def angular_resolution(self) -> float:
        return angular_resolution(self.directions)

    @property
    def tolerance(self) -> float:
        """Geometric tolerance: angular resolution times diameter."""
        return self.angular_resolution * self.diameter

    # membership and distances -------------------------------------------------
    def gap(self, points) -> np.ndarray:
        """max_i (x . e_i - h_i): negative inside, at most the distance outside."""
        P = np.atleast_2d(np.asarray(points, float))
        if self.is_empty:
            return np.full(P.shape[0], math.inf)
        h = self.tight_support
        out = np.empty(P.shape[0])
        for lo in range(0, P.shape[0], 65536):
            out[lo : lo + 65536] = (P[lo : lo + 65536] @ self.directions.T - h).max(1)
        return out

    def contains(self, points, *, closed: bool = False, tol: float = 0.0) -> np.ndarray:
        g = self.gap(points)
        return g <= tol if closed else g < tol

    def distance(self, points) -> np.ndarray:
        """Euclidean distance to the body (exact in d <= 2, facet gap in d = 3)."""
        P = np.atleast_2d(np.asarray(points, float))
        g = self.gap(P)
        out = np.maximum(g, 0.0)
        outside = g > 0
        if self.d == 2 and outside.any():
            a, b = self.edges
            out[outside] = _segment_distance(P[outside], a, b)
        return out

    def signed_distance(self, points) -> np.ndarray:
        """Distance outside, minus distance to the boundary inside."""
        P = np.atleast_2d(np.asarray(points, float))
        g = self.gap(P)
        if self.d == 2 and (g > 0).any():
            a, b = self.edges
            g[g > 0] = _segment_distance(P[g > 0], a, b)
        return g

    @cached_property
    def ordered_vertices(self) -> np.ndarray:
        """2-D vertices in counterclockwise order."""
        V = self.vertices
        if self.d != 2:
            return V
        c = V.mean(0)
        ang = np.arctan2(V[:, 1] - c[1], V[:, 0] - c[0])
        return V[np.argsort(ang)]

    @property
    def edges(self):
        V = self.ordered_vertices
        return V, np.roll(V, -1, axis=0)

    def support_points(self) -> np.ndarray:
        """For each grid direction the barycenter of the maximizing vertices."""
        V = self.vertices
        proj = V @ self.directions.T
        top = proj.max(0)
        scale = max(1.0, float(np.abs(V).max()))
        w = (proj >= top - 1e-9 * scale).astype(float)
        return (w.T @ V) / w.sum(0)[:, None]

    def boundary_samples(self, spacing: float) -> np.ndarray:
        self._require()
        V = self.vertices
        if self.d == 1:
            return V
        if self.d == 2:
            a, b = self.edges
            out = []
            for p, q in zip(a, b):
                k = max(1, int(math.ceil(np.linalg.norm(q - p) / spacing)))
                s = np.arange(k)[:, None] / k
                out.append(p + s * (q - p))
            return np.concatenate(out)
        hull = ConvexHull(V)
        out = [V]
        for simplex in hull.simplices:
            for i in range(3):
                p, q = V[simplex[i]], V[simplex[(i + 1) % 3]]
                k = max(1, int(math.ceil(np.linalg.norm(q - p) / spacing)))
                s = np.arange(1, k)[:, None] / k
                out.append(p + s * (q - p))
        return np.unique(np.concatenate(out), axis=0)

    def translate(self, v) -> "ConvexBody":
        v = np.asarray(v, float)
        return ConvexBody(self.directions, self.support + self.directions @ v, empty=self._forced_empty)

    def polyline(self) -> np.ndarray:
        """Closed boundary polyline (d=2) or vertex list."""
        if self.d == 2:
            V = self.ordered_vertices
            return np.vstack([V, V[:1]])
        return self.vertices

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"e{i}" for i in range(self.d)] + ["h"])
            for e, h in zip(self.directions, self.support):
                w.writerow([format(float(x), ".17g") for x in e] + [format(float(h), ".17g")])

    @classmethod
    def from_csv(cls, path) -> "ConvexBody":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, :-1], data[:, -1])

    def __repr__(self) -> str:
        if self.is_empty:
            return f"ConvexBody(empty, d={self.d}, n={self.n})"
        return f"ConvexBody(d={self.d}, n={self.n}, inradius={self.chebyshev[1]:.4g})"


class SpeedFunction:
    """Positive speeds on a direction grid, interpolated piecewise linearly
    in angle (d=2), by sign (d=1) or by inverse-angle weights (d=3)."""

    def __init__(self, directions, values, bounds: Optional[tuple] = None):
        self.directions = np.asarray(directions, float)
        self.values = np.asarray(values, float).reshape(-1)
        if self.values.size != self.directions.shape[0]:
            raise ConfigurationError("one speed per direction")
        if not np.all(self.values > 0):
            raise ConfigurationError("speeds must be strictly positive")
        if bounds is not None:
            lo, hi = bounds
            if self.values.min() < lo * (1 - 1e-9) or self.values.max() > hi * (1 + 1e-9):
                raise ConfigurationError(f"speeds outside the configured bounds [{lo}, {hi}]")
        self.bounds = bounds
        self._angles = None
        if self.directions.shape[1] == 2:
            ang = np.mod(np.arctan2(self.directions[:, 1], self.directions[:, 0]), 2 * np.pi)
            order = np.argsort(ang)
            self._angles = ang[order]
            self._sorted = self.values[order]

    @classmethod
    def constant(cls, c: float, directions) -> "SpeedFunction":
        return cls(directions, np.full(len(directions), float(c)))

    @classmethod
    def from_function(cls, fn: Callable, directions) -> "SpeedFunction":
        E = np.asarray(directions, float)
        return cls(E, np.array([fn(e) for e in E]))

    @property
    def d(self) -> int:
        return self.directions.shape[1]

    def at(self, directions) -> np.ndarray:
        E = np.atleast_2d(np.asarray(directions, float))
        if self.d == 1:
            pos = self.values[self.directions[:, 0] > 0]
            neg = self.values[self.directions[:, 0] < 0]
            need = (E[:, 0] > 0).any() and not pos.size, (E[:, 0] < 0).any() and not neg.size
            if any(need):
                raise DomainError(f"no speed given for direction {'+1' if need[0] else '-1'}")
            return np.where(E[:, 0] > 0, pos[0] if pos.size else np.nan, neg[0] if neg.size else np.nan)
        if self.d == 2:
            q = np.mod(np.arctan2(E[:, 1], E[:, 0]), 2 * np.pi)
            xp = np.concatenate([self._angles - 2 * np.pi, self._angles, self._angles + 2 * np.pi])
            fp = np.tile(self._sorted, 3)
            return np.interp(q, xp, fp)
        cosang = np.clip(E @ self.directions.T, -1.0, 1.0)
        ang = np.arccos(cosang)
        idx = np.argsort(ang, axis=1)[:, :3]
        a = np.take_along_axis(ang, idx, 1)
        exact = a[:, 0] < 1e-12
        w = 1.0 / np.maximum(a, 1e-300) ** 2
        out = (w * self.values[idx]).sum(1) / w.sum(1)
        out[exact] = self.values[idx[exact, 0]]
        return out

    def resample(self, directions) -> "SpeedFunction":
        return SpeedFunction(directions, self.at(directions), self.bounds)

    def max_adjacent_jump(self) -> tuple:
        """(max |c_i - c_j|, max |c_i - c_j| / |e_i - e_j|) over grid neighbors."""
        if self.d == 2:
            v = self._sorted
            a = self._angles
            dv = np.abs(np.diff(np.append(v, v[0])))
            da = np.abs(2 * np.sin(np.diff(np.append(a, a[0] + 2 * np.pi)) / 2))
            return float(dv.max()), float((dv / da).max())
        if self.d == 1:
            return float(abs(self.values[0] - self.values[1])), float(abs(self.values[0] - self.values[1]) / 2)
        tree = cKDTree(self.directions)
        dist, nb = tree.query(self.directions, k=7)
        dv = np.abs(self.values[nb[:, 1:]] - self.values[:, None])
        return float(dv.max()), float((dv / dist[:, 1:]).max())


# ---------------------------------------------------------------------------


def theta_set(A: ConvexBody, c: SpeedFunction, t: float) -> ConvexBody:
    """∩_i {x . e_i < h_A(e_i) + c(e_i) t} on A's direction grid."""
    if t < 0:
        raise DomainError("t must be nonnegative")
    if A.is_empty:
        return ConvexBody.empty_like(A.directions)
    return ConvexBody(A.directions, A.tight_support + c.at(A.directions) * t)


def erode(A: ConvexBody, r: float) -> ConvexBody:
    if r < 0:
        raise DomainError("r must be nonnegative")
    if A.is_empty:
        return A
    _, rad = A.chebyshev
    if rad - r <= EMPTY_RADIUS:
        return ConvexBody.empty_like(A.directions)
    return ConvexBody(A.directions, A.tight_support - r)


def dilate(A: ConvexBody, r: float) -> ConvexBody:
    if r < 0:
        raise DomainError("r must be nonnegative")
    if A.is_empty:
        return A
    return ConvexBody(A.directions, A.tight_support + r)


def hausdorff(A: ConvexBody, B: ConvexBody) -> float:
    """Hausdorff distance between the (closed) bodies.

    For convex sets the farthest point of A from B is a vertex of A, so
    vertex-to-body distances suffice.
    """
    if A.is_empty or B.is_empty:
        raise DomainError("Hausdorff distance needs nonempty bodies")
    return float(max(B.distance(A.vertices).max(), A.distance(B.vertices).max()))


def interior_ball_check(A: ConvexBody, r: float):
    """Test B_r(x_e - r e) ⊆ A at every support point x_e.

    Returns (ok, worst violation, worst boundary point); violation is the
    amount by which the ball pokes out of A (<= 0 means inside).
    """
    if A.is_empty:
        raise DomainError("interior ball check needs a nonempty body")
    if r <= 0:
        raise DomainError("r must be positive")
    X = A.support_points()
    centers = X - r * A.directions
    depth = (A.tight_support[None, :] - centers @ A.directions.T).min(1)
    viol = r - depth
    k = int(np.argmax(viol))
    scale = max(1.0, A.diameter)
    return bool(viol[k] <= 1e-9 * scale), float(viol[k]), X[k]


def ray_directions(d: int, n: int) -> np.ndarray:
    if d == 1:
        return np.array([[-1.0], [1.0]])
    if d == 2:
        return circle_directions(n)
    level = max(1, int(math.ceil(math.log(max(n, 12) / 10.0) / math.log(4.0))))
    return icosphere(level)


def smoothed_core(K: ConvexBody, r: float, rays: Optional[int] = None):
    """Boundary samples of K1 = {sd_K(x) + δ|x - x0|^2 < 0}, δ = r / (2 max |x - x0|^2).

    Returns (samples, x0, δ). Along each ray from the Chebyshev center the
    defining function is convex, so bisection finds its unique root.
    """
    x0, rad = K.chebyshev
    V = K.vertices
    R2 = float(((V - x0) ** 2).sum(1).max())
    delta = 0.5 * r / R2
    U = ray_directions(K.d, rays or 4 * K.n)
    hi = np.full(U.shape[0], math.sqrt(R2) * 1.01 + 1e-9)
    lo = np.zeros(U.shape[0])
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        P = x0 + mid[:, None] * U
        g = K.gap(P) + delta * mid * mid
        inside = g < 0
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    return x0 + lo[:, None] * U, x0, delta


def regularize(A: ConvexBody, c: SpeedFunction, r: float, T: float, *, c0: Optional[float] = None,
               c1: Optional[float] = None, rays: Optional[int] = None, check: bool = True):
    """Inner regularization (A', c') of (A, c) at scale r over [0, T].

    A' = B_r(A1) with A1 a strictly convex core of A, A'' the same for the
    r-erosion of Θ^{A,c}(T), and c'(e) = (x_e(T) - x_e(0)) . e / T from the
    support points of A' and A''. Returns (A', c', info).
    """
    E = A.directions
    cv = c.at(E)
    c0 = float(cv.min()) if c0 is None else c0
    c1 = float(cv.max()) if c1 is None else c1
    if r <= 0:
        raise DomainError("r must be positive")
    if T < 2.0 * r / c0 * (1 - 1e-12):
        raise DomainError(f"T={T} below 2r/c0={2 * r / c0}")
    B1, _, _ = smoothed_core(A, r, rays)
    idx0 = np.argmax(B1 @ E.T, axis=0)
    y0 = B1[idx0]
    x_start = y0 + r * E
    A_prime = ConvexBody(E, (x_start * E).sum(1))
    ThetaT = theta_set(A, c, T)
    Kt = erode(ThetaT, r)
    if Kt.is_empty:
        raise ConstructionError("eroded Θ(T) is empty")
    B2, _, _ = smoothed_core(Kt, r, rays)
    idxT = np.argmax(B2 @ E.T, axis=0)
    x_end = B2[idxT] + r * E
    A_dprime = ConvexBody(E, (x_end * E).sum(1))
    c_new = ((x_end - x_start) * E).sum(1) / T
    if np.any(c_new <= 0):
        raise ConstructionError("perturbed speed is not positive", {"direction": E[int(np.argmin(c_new))]})
    c_prime = SpeedFunction(E, c_new)
    tol = A.angular_resolution * ThetaT.diameter
    info = {"x_start": x_start, "x_end": x_end, "A_dprime": A_dprime, "tolerance": tol}
    if check:
        info["checks"] = regularization_checks(A, c, r, T, A_prime, c_prime, c0=c0, c1=c1, tol=tol)
        bad = [k for k, v in info["checks"].items() if v["excess"] > v["tol"]]
        if bad:
            k = bad[0]
            raise ConstructionError(
                f"post-check {k} failed by {info['checks'][k]['excess']:.3g}",
                {"check": k, "direction": info["checks"][k]["direction"], "checks": info["checks"]},
            )
    return A_prime, c_prime, info


def regularization_checks(A, c, r, T, A_prime, c_prime, *, c0, c1, tol, times=(0.0, 0.5, 1.0),
                          ball_tol: Optional[float] = None) -> dict:
    """Conclusions (i)-(iii) of the regularization, as excess over zero.

    (i) c' <= c; (ii) A' ⊆ B_r(A) and Θ^{A,c}(T) ⊆ B_{c1 r/c0}(Θ^{A',c'}(T));
    (iii) Θ^{A',c'}(t) has interior balls of radius r (1 - ball_tol).
    """
    E = A.directions
    out = {}

    def rec(name, excess, t, extra=None):
        k = int(np.argmax(excess)) if np.ndim(excess) else 0
        out[name] = {"excess": float(np.max(excess)), "tol": t,
                     "direction": E[k].tolist() if np.ndim(excess) else None}
        if extra:
            out[name].update(extra)

    rec("i_speed", (c_prime.at(E) - c.at(E)) * T, tol)
    rec("ii_inner", A_prime.tight_support - (A.tight_support + r), tol)
    outer = theta_set(A_prime, c_prime, T).tight_support + c1 * r / c0
    rec("ii_outer", theta_set(A, c, T).tight_support - outer, tol)
    bt = 2.0 * A.angular_resolution if ball_tol is None else ball_tol
    worst = -math.inf
    for s in times:
        body = theta_set(A_prime, c_prime, s * T)
        _, v, _ = interior_ball_check(body, r * (1.0 - bt))
        worst = max(worst, v)
    out["iii_interior_ball"] = {"excess": worst, "tol": 1e-9 * max(1.0, A.diameter), "direction": None,
                                "radius": r * (1 - bt)}
    return out


def doubling_study(make_body: Callable, speed: Callable, t: float, sizes=(64, 128, 256, 512)) -> dict:
    """Discretization error of Θ(t) in d=2 by direction-grid doubling.

    ``make_body(directions)`` builds A and ``speed(directions)`` returns c on
    that grid. Gaps are Hausdorff distances between consecutive refinements;
    ``order`` is the observed convergence order from the last three sizes.
    """
    bodies = []
    for n in sizes:
        E = circle_directions(n)
        bodies.append(theta_set(make_body(E), SpeedFunction(E, np.asarray(speed(E), float)), t))
    gaps = [hausdorff(a, b) for a, b in zip(bodies, bodies[1:])]
    order = math.log2(gaps[-2] / gaps[-1]) if len(gaps) >= 2 and gaps[-1] > 0 else math.nan
    return {"sizes": list(sizes), "gaps": gaps, "order": order}


# random bodies and speeds for property tests and the CLI --------------------


def random_polygon(rng: np.random.Generator, directions, *, k_min: int = 5, k_max: int = 12,
                   max_arc: float = 0.6 * math.pi) -> ConvexBody:
    """Polygon inscribed in a random circle with all arcs below ``max_arc``
    (so every interior angle exceeds pi - max_arc)."""
    k = int(rng.integers(k_min, k_max + 1))
    while True:
        gaps = rng.dirichlet(np.ones(k)) * 2 * math.pi
        if gaps.max() < max_arc:
            break
    ang = rng.uniform(0, 2 * math.pi) + np.cumsum(gaps)
    R = rng.uniform(0.5, 2.0)
    center = rng.uniform(-1, 1, size=2)
    P = center + R * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    return ConvexBody.from_points(P, directions)


def random_speed(rng: np.random.Generator, directions, c0: float = 0.5, c1: float = 2.0) -> SpeedFunction:
    """Smooth random speed with values in [c0, c1]."""
    E = np.asarray(directions, float)
    if E.shape[1] == 1:
        return SpeedFunction(E, rng.uniform(c0, c1, size=2), (c0, c1))
    ang = np.arctan2(E[:, 1], E[:, 0]) if E.shape[1] == 2 else np.arccos(np.clip(E[:, 2], -1, 1))
    mean = rng.uniform(c0 + 0.25 * (c1 - c0), c1 - 0.25 * (c1 - c0))
    amp = rng.uniform(0, 1) * min(mean - c0, c1 - mean) / 2.0
    vals = mean + amp * (np.cos(rng.integers(1, 4) * ang + rng.uniform(0, 2 * np.pi))
                         + np.sin(ang + rng.uniform(0, 2 * np.pi)))
    return SpeedFunction(E, vals, (c0, c1))
