"""Stationary random ignition reactions with exact finite range of dependence.

A realization assigns i.i.d. parameters (amplitude, ignition offset) to the
lattice points ``rho * k``. Around each lattice point a C1 bump of radius
``rho / 2`` blends the parameters into the background values (1, theta1),
so the reaction at x only depends on the nearest lattice point. Cell
parameters come from a counter-based hash of (seed, absolute cell index),
which makes a shifted index stream reproduce the shifted field exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import _kernels as K
from .errors import ConfigurationError, DomainError
from .hypotheses import ReactionHypotheses
from .records import read_record, write_record

SMOOTHSTEP_SLOPE = 1.5
BUMP_SLOPE = 8.0 / (3.0 * math.sqrt(3.0))  # max |d/dr (1 - r^2)^2|
_Q0 = (3.0 - math.sqrt(3.0)) / 6.0
PSI_SLOPE = 32.0 * _Q0 * (1.0 - _Q0) * (1.0 - 2.0 * _Q0)  # max |psi'| for psi = 16 q^2 (1-q)^2

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


def _splitmix(z: np.ndarray) -> np.ndarray:
    z = z + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def cell_uniforms(seed: int, index: np.ndarray, stream: int) -> np.ndarray:
    """Uniform(0,1) variates keyed by (seed, integer cell index, stream)."""
    index = np.atleast_2d(np.asarray(index, dtype=np.int64))
    with np.errstate(over="ignore"):
        z = np.full(index.shape[0], np.uint64(seed & _MASK64), dtype=np.uint64)
        z = _splitmix(z ^ np.uint64(stream))
        for a in range(index.shape[1]):
            z = _splitmix(z ^ index[:, a].astype(np.uint64))
        z = _splitmix(z)
    return (z >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def smoothstep(z):
    z = np.clip(z, 0.0, 1.0)
    return z * z * (3.0 - 2.0 * z)


def bump(r):
    """(1 - r^2)^2 on [0, 1), zero outside."""
    r = np.asarray(r, dtype=float)
    q = np.clip(1.0 - r * r, 0.0, None)
    return q * q


@dataclass
class NodeReaction:
    """Reaction restricted to a fixed set of nodes (flat arrays)."""

    amp: np.ndarray
    theta: np.ndarray
    w: float
    m1: float
    pamp: np.ndarray | None = None
    ua: float = 0.0
    ub: float = 0.0
    lipschitz_u: float = 0.0

    def __post_init__(self):
        self.amp = np.ascontiguousarray(self.amp, dtype=np.float64).ravel()
        self.theta = np.ascontiguousarray(self.theta, dtype=np.float64).ravel()
        if self.pamp is not None:
            self.pamp = np.ascontiguousarray(self.pamp, dtype=np.float64).ravel()
        self._dummy = np.zeros(1)

    def _p(self):
        return (self.pamp, True) if self.pamp is not None else (self._dummy, False)

    def rates(self, u: np.ndarray) -> np.ndarray:
        u = np.ascontiguousarray(u, dtype=np.float64).ravel()
        out = np.empty_like(u)
        p, has = self._p()
        K.ignition_rates(u, self.amp, self.theta, self.w, float(self.m1), p, has, self.ua, self.ub, out)
        return out

    def update(self, u, lap, out, dt):
        p, has = self._p()
        return K.update_ignition(
            u, lap, out, dt, self.amp, self.theta, self.w, float(self.m1), p, has, self.ua, self.ub
        )


class _IgnitionBase:
    hyp: ReactionHypotheses
    w: float
    box: tuple

    def amp_theta(self, points: np.ndarray):
        raise NotImplementedError

    def perturbation(self, points: np.ndarray):
        return None, 0.0, 0.0

    @property
    def lipschitz_u(self) -> float:
        raise NotImplementedError

    def _points(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, self.hyp.d) if x.size != self.hyp.d else x[None, :]
        if x.shape[-1] != self.hyp.d:
            raise DomainError(f"points must have {self.hyp.d} coordinates")
        return x

    def on_nodes(self, points: np.ndarray) -> NodeReaction:
        points = self._points(points)
        amp, th = self.amp_theta(points)
        pamp, ua, ub = self.perturbation(points)
        return NodeReaction(amp, th, self.w, self.hyp.m1, pamp, ua, ub, self.lipschitz_u)

    def evaluate(self, x, u):
        """f(x, u) for points x (shape (n, d)) and values u broadcast to n."""
        pts = self._points(x)
        u = np.asarray(u, dtype=float)
        if np.any(~((u >= 0.0) & (u <= 1.0))):
            raise DomainError("u must lie in [0, 1]")
        try:
            uu = np.array(np.broadcast_to(u, (pts.shape[0],)))
        except ValueError:
            raise DomainError("u must be scalar or one value per point") from None
        out = self.on_nodes(pts).rates(uu)
        scalar = np.ndim(x) == 1 and np.size(x) == self.hyp.d and u.ndim == 0
        return float(out[0]) if scalar else out

    def evaluate_grid(self, x, us) -> np.ndarray:
        """Matrix f(x_i, u_j)."""
        nr = self.on_nodes(self._points(x))
        us = np.asarray(us, dtype=float)
        cols = [nr.rates(np.full(nr.amp.shape[0], v)) for v in us]
        return np.stack(cols, axis=1)


class IgnitionField(_IgnitionBase):
    """One sampled medium.

    ``lo`` is the integer index of the first stored cell, ``amplitude`` and
    ``offset`` hold the per-cell parameters on a box of cells covering the
    domain plus one cell of padding. Points beyond it use clamped indices.
    """

    MAGIC = b"IGNF"

    def __init__(self, hyp, seed, box, lo, amplitude, offset, shift=None):
        self.hyp = hyp
        self.seed = int(seed)
        self.box = (tuple(map(float, box[0])), tuple(map(float, box[1])))
        self.lo = np.asarray(lo, dtype=np.int64)
        self.amplitude = np.asarray(amplitude, dtype=np.float64)
        self.offset = np.asarray(offset, dtype=np.float64)
        self.shift = np.zeros(hyp.d, dtype=np.int64) if shift is None else np.asarray(shift, np.int64)
        self.w = hyp.ramp_width

    @property
    def rho(self) -> float:
        return self.hyp.rho

    @property
    def lipschitz_u(self) -> float:
        return lipschitz_u_bound(self.hyp)

    @property
    def lipschitz_x(self) -> float:
        return lipschitz_x_bound(self.hyp)

    def cell_index(self, points: np.ndarray) -> np.ndarray:
        return np.rint(points / self.rho).astype(np.int64)

    def cells_influencing(self, lo, hi) -> set:
        """Absolute indices of cells whose parameters can affect f on [lo, hi]."""
        lo = np.asarray(lo, float)
        hi = np.asarray(hi, float)
        # a bump centered at k*rho reaches rho/2; closed box is conservative
        kmin = np.ceil((lo - 0.5 * self.rho) / self.rho - 1e-12).astype(int)
        kmax = np.floor((hi + 0.5 * self.rho) / self.rho + 1e-12).astype(int)
        ranges = [range(a, b + 1) for a, b in zip(kmin, kmax)]
        grid = np.array(np.meshgrid(*ranges, indexing="ij")).reshape(len(ranges), -1).T
        return {tuple(int(v) + int(s) for v, s in zip(k, self.shift)) for k in grid}

    def _lookup(self, k: np.ndarray):
        local = np.clip(k - self.lo, 0, np.array(self.amplitude.shape) - 1)
        idx = tuple(local[:, a] for a in range(local.shape[1]))
        return self.amplitude[idx], self.offset[idx]

    def amp_theta(self, points):
        k = self.cell_index(points)
        r = np.linalg.norm(points - k * self.rho, axis=1) / (0.5 * self.rho)
        phi = bump(r)
        a_k, o_k = self._lookup(k)
        amp = 1.0 + phi * (a_k - 1.0)
        th = self.hyp.theta1 + phi * o_k
        return amp, th

    def theta_at(self, x):
        return self.amp_theta(self._points(x))[1]

    def amplitude_at(self, x):
        return self.amp_theta(self._points(x))[0]

    def save(self, path, extra=None) -> None:
        header = dict(extra or {})
        header.update({
            "kind": "ignition_field",
            "hypotheses": self.hyp.as_dict(),
            "seed": self.seed,
            "box": [list(self.box[0]), list(self.box[1])],
            "lo": self.lo.tolist(),
            "shift": self.shift.tolist(),
        })
        write_record(path, self.MAGIC, header, [self.amplitude, self.offset])

    @classmethod
    def load(cls, path) -> "IgnitionField":
        header, (amp, off) = read_record(path, cls.MAGIC)
        hyp = ReactionHypotheses(**header["hypotheses"])
        return cls(hyp, header["seed"], header["box"], header["lo"], amp, off, header["shift"])


def lipschitz_u_bound(hyp: ReactionHypotheses, a_max=None) -> float:
    a_max = hyp.a_max if a_max is None else a_max
    v = 1.0 - hyp.theta1
    return hyp.alpha1 * a_max * (
        hyp.m1 * v ** (hyp.m1 - 1.0) + v ** hyp.m1 * SMOOTHSTEP_SLOPE / hyp.ramp_width
    )


def lipschitz_x_bound(hyp: ReactionHypotheses) -> float:
    v = 1.0 - hyp.theta1
    grad = BUMP_SLOPE / (0.5 * hyp.rho)
    return hyp.alpha1 * v ** hyp.m1 * grad * (
        (hyp.a_max - 1.0) + hyp.a_max * SMOOTHSTEP_SLOPE * hyp.dtheta / hyp.ramp_width
    )


def sample_field(hyp: ReactionHypotheses, domain, seed: int, shift=None) -> IgnitionField:
    """Sample a realization covering ``domain = (lo, hi)``.

    ``shift`` (integer lattice vector) offsets the hashed cell stream, so
    ``sample_field(hyp, box, s, shift=k)`` evaluated at x equals
    ``sample_field(hyp, box + k*rho, s)`` evaluated at x + k*rho.
    """
    lo = np.asarray(domain[0], float).reshape(-1)
    hi = np.asarray(domain[1], float).reshape(-1)
    if lo.size != hyp.d or hi.size != hyp.d or np.any(hi < lo):
        raise ConfigurationError("domain must be a nonempty box in R^d")
    lu = lipschitz_u_bound(hyp)
    lx = lipschitz_x_bound(hyp)
    if lu > hyp.M or lx > hyp.M:
        raise ConfigurationError(
            f"field Lipschitz certificate exceeds M={hyp.M}: u-bound {lu:.4g}, x-bound {lx:.4g}"
        )
    shift = np.zeros(hyp.d, np.int64) if shift is None else np.asarray(shift, np.int64).reshape(-1)
    kmin = np.floor(lo / hyp.rho).astype(np.int64) - 1
    kmax = np.ceil(hi / hyp.rho).astype(np.int64) + 1
    dims = tuple(int(v) for v in kmax - kmin + 1)
    rel = np.indices(dims).reshape(hyp.d, -1).T
    absolute = rel + kmin + shift
    ua = cell_uniforms(seed, absolute, 1)
    uo = cell_uniforms(seed, absolute, 2)
    amplitude = (1.0 + (hyp.a_max - 1.0) * ua).reshape(dims)
    offset = (hyp.dtheta * uo).reshape(dims)
    return IgnitionField(hyp, seed, (lo, hi), kmin, amplitude, offset, shift)


class HomogeneousIgnition(_IgnitionBase):
    """x-independent ignition reaction ``amplitude * alpha1 (1-u)^m1 s((u-theta)/w)``."""

    def __init__(self, hyp, amplitude=1.0, theta=None, ramp_width=None):
        self.hyp = hyp
        self.amplitude = float(amplitude)
        self.theta = hyp.theta1 if theta is None else float(theta)
        self.w = hyp.ramp_width if ramp_width is None else float(ramp_width)
        self.box = None
        self.seed = 0

    @property
    def lipschitz_u(self) -> float:
        v = 1.0 - self.theta
        return self.hyp.alpha1 * self.amplitude * (
            self.hyp.m1 * v ** (self.hyp.m1 - 1.0) + v ** self.hyp.m1 * SMOOTHSTEP_SLOPE / self.w
        )

    def amp_theta(self, points):
        n = points.shape[0]
        return (
            np.full(n, self.amplitude),
            np.full(n, self.theta),
        )


def homogeneous_field(hyp, amplitude=1.0, theta=None, ramp_width=None) -> HomogeneousIgnition:
    return HomogeneousIgnition(hyp, amplitude, theta, ramp_width)


class LongRangeField(_IgnitionBase):
    """A base realization plus a global smooth perturbation of sup-norm alpha4 n^-m4.

    p(x, u) = amp * psi(u) * (1 + cos(k.x + phase)) / 2 with psi a quartic
    bump supported in u ∈ [theta1 + dtheta + w, 1 - theta1].
    """

    def __init__(self, base: _IgnitionBase, n: float, wavevector, phase: float):
        hyp = base.hyp
        self.base = base
        self.hyp = hyp
        self.w = base.w
        self.box = base.box
        self.seed = getattr(base, "seed", 0)
        self.n = float(n)
        self.gap = hyp.alpha4 * self.n ** (-hyp.m4)
        self.k = np.asarray(wavevector, float)
        self.phase = float(phase)
        self.ua = hyp.theta1 + hyp.dtheta + base.w
        self.ub = 1.0 - hyp.theta1

    def amp_theta(self, points):
        return self.base.amp_theta(points)

    def spatial_factor(self, points):
        return 0.5 * (1.0 + np.cos(points @ self.k + self.phase))

    def perturbation(self, points):
        return self.gap * self.spatial_factor(points), self.ua, self.ub

    def maximizer(self):
        """A point (x, u) where the perturbation attains its sup-norm."""
        kk = float(self.k @ self.k)
        x = -self.phase * self.k / kk if kk > 0 else np.zeros(self.hyp.d)
        return x, 0.5 * (self.ua + self.ub)

    @property
    def lipschitz_u(self) -> float:
        return self.base.lipschitz_u + self.gap * PSI_SLOPE / (self.ub - self.ua)

    @property
    def lipschitz_x(self) -> float:
        return getattr(self.base, "lipschitz_x", 0.0) + 0.5 * self.gap * float(np.linalg.norm(self.k))


def long_range_variant(field: _IgnitionBase, n: float, seed: int | None = None) -> LongRangeField:
    hyp = field.hyp
    if not hyp.has_h4:
        raise ConfigurationError("long-range variant needs m4, n4, alpha4")
    if n < hyp.n4:
        raise ConfigurationError(f"n={n} below n4={hyp.n4}")
    s = getattr(field, "seed", 0) if seed is None else seed
    rng = np.random.default_rng([int(s) & _MASK64, 4])
    g = rng.normal(size=hyp.d)
    direction = g / np.linalg.norm(g)
    wavelength = n * hyp.rho * (1.0 + rng.random())
    k = 2.0 * np.pi / wavelength * direction
    return LongRangeField(field, n, k, 2.0 * np.pi * rng.random())


@dataclass
class HypothesisReport:
    ok: bool
    violations: dict = dc_field(default_factory=dict)
    xi_hat: dict = dc_field(default_factory=dict)
    lipschitz_u: float = 0.0
    lipschitz_x: float = 0.0
    checks: dict = dc_field(default_factory=dict)


def verify_hypotheses(
    field,
    u_samples: int = 200,
    x_samples: int = 200,
    *,
    tol: float = 1e-9,
    etas=(0.02, 0.05, 0.1, 0.2),
    seed: int = 0,
    box=None,
    max_listed: int = 20,
) -> HypothesisReport:
    """Sample-based audit of the ignition hypotheses; never raises on failure."""
    if u_samples < 100 or x_samples < 100:
        raise ConfigurationError("need at least 100 u and x samples")
    hyp = field.hyp
    rng = np.random.default_rng(seed)
    if box is None:
        box = field.box if field.box is not None else (np.full(hyp.d, -5.0), np.full(hyp.d, 5.0))
    lo, hi = np.asarray(box[0], float), np.asarray(box[1], float)
    xs = lo + (hi - lo) * rng.random((x_samples, hyp.d))
    us = np.unique(np.concatenate([np.linspace(0.0, 1.0, u_samples), [hyp.theta1, 1.0 - hyp.theta1]]))
    F = field.evaluate_grid(xs, us)
    viol: dict = {}

    def flag(name, mask):
        ii, jj = np.nonzero(mask)
        if ii.size:
            viol[name] = [(tuple(xs[i].tolist()), float(us[j])) for i, j in zip(ii[:max_listed], jj[:max_listed])]

    flag("a_nonnegative", F < -tol)
    flag("a_zero_below_floor", (np.abs(F) > tol) & (us <= hyp.theta1)[None, :])
    flag("a_zero_at_one", (np.abs(F) > tol) & (us >= 1.0)[None, :])
    top = us >= 1.0 - hyp.theta1
    lower = hyp.alpha1 * (1.0 - us) ** hyp.m1
    flag("b_lower_bound", (F < lower[None, :] - tol) & top[None, :])
    dF = np.diff(F, axis=1)
    seg = (us[:-1] >= 1.0 - hyp.theta1)[None, :]
    flag("b_monotone", (dF > tol) & seg)
    du = np.diff(us)
    q_u = np.abs(dF) / du[None, :]
    lip_u = float(q_u.max())
    flag("c_lipschitz_u", np.pad(q_u > hyp.M * (1.0 + 1e-6), ((0, 0), (0, 1))))
    step = 0.01 * hyp.rho
    dirs = rng.normal(size=xs.shape)
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    F2 = field.evaluate_grid(xs + step * dirs, us)
    q_x = np.abs(F2 - F) / step
    lip_x = float(q_x.max())
    flag("c_lipschitz_x", q_x > hyp.M * (1.0 + 1e-6))
    nr = field.on_nodes(xs)
    xi = {}
    for eta in etas:
        uu = np.minimum(nr.theta + eta, 1.0)
        xi[float(eta)] = float(nr.rates(uu).min())
        if not xi[float(eta)] > 0.0:
            viol.setdefault("d_pure_ignition", []).append((float(eta), xi[float(eta)]))
    checks = {}
    if hyp.has_h3:
        ub = us[us >= 1.0 - hyp.theta1 / 2.0]
        worst = np.inf
        for eta in np.linspace(hyp.theta1 / 20.0, hyp.theta1 / 2.0, 10):
            a = field.evaluate_grid(xs, ub - eta)
            b = field.evaluate_grid(xs, ub)
            gap = a - b - hyp.alpha3 * eta ** hyp.m3
            worst = min(worst, float(gap.min()))
            ii, jj = np.nonzero(gap < -tol)
            if ii.size:
                viol.setdefault("e_strict_decrease", []).extend(
                    (tuple(xs[i].tolist()), float(ub[j])) for i, j in zip(ii[:max_listed], jj[:max_listed])
                )
        checks["e_min_gap"] = worst
    return HypothesisReport(not viol, viol, xi, lip_u, lip_x, checks)
