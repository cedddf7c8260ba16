"""Explicit finite-difference solver for u_t = Δu + f(x, u)."""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np
from scipy import ndimage
from scipy.integrate import solve_ivp

from . import _kernels as K
from .baseline import BaselineReaction, baseline_f0
from .errors import ConfigurationError, ConstructionError, DomainError, NumericalError
from .records import read_record, write_record

BC_CODES = {"neumann": K.NEUMANN, "dirichlet_zero": K.DIRICHLET_ZERO, "periodic": K.PERIODIC}
CLAMP_TOL = 1e-12


@dataclass(frozen=True)
class Grid:
    """Uniform grid. Node i sits at local coordinate ``origin + h*i``; the
    physical position is ``anchor + frame @ local`` (frame orthonormal)."""

    shape: tuple
    h: float
    origin: tuple
    bc: tuple = ()
    frame: Optional[np.ndarray] = None
    anchor: Optional[tuple] = None

    def __post_init__(self):
        shape = tuple(int(n) for n in self.shape)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))
        d = len(shape)
        if d not in (1, 2, 3):
            raise ConfigurationError("grid dimension must be 1, 2 or 3")
        if not self.h > 0:
            raise ConfigurationError("grid spacing must be positive")
        if any(n < 2 for n in shape):
            raise ConfigurationError("each axis needs at least two nodes")
        bc = self.bc or ("neumann",) * d
        if isinstance(bc, str):
            bc = (bc,) * d
        for b in bc:
            if b not in BC_CODES:
                raise ConfigurationError(f"unknown boundary rule {b!r}")
        object.__setattr__(self, "bc", tuple(bc))
        if len(self.origin) != d or len(self.bc) != d:
            raise ConfigurationError("origin and bc must have one entry per axis")

    @classmethod
    def box(cls, lo, hi, h, bc="neumann") -> "Grid":
        """Smallest node-aligned (multiples of h) grid covering [lo, hi]."""
        lo = np.atleast_1d(np.asarray(lo, float))
        hi = np.atleast_1d(np.asarray(hi, float))
        i0 = np.floor(lo / h + 1e-9).astype(np.int64)
        i1 = np.ceil(hi / h - 1e-9).astype(np.int64)
        return cls(tuple(i1 - i0 + 1), float(h), tuple(i0 * h), bc)

    @property
    def d(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def bc_codes(self) -> tuple:
        return tuple(BC_CODES[b] for b in self.bc)

    @property
    def extents(self) -> tuple:
        return tuple((o, o + (n - 1) * self.h) for o, n in zip(self.origin, self.shape))

    def axes(self) -> list:
        return [o + self.h * np.arange(n) for o, n in zip(self.origin, self.shape)]

    def local_points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def to_physical(self, local: np.ndarray) -> np.ndarray:
        local = np.asarray(local, float)
        out = local if self.frame is None else local @ np.asarray(self.frame).T
        if self.anchor is not None:
            out = out + np.asarray(self.anchor)
        return out

    def points(self) -> np.ndarray:
        return self.to_physical(self.local_points())

    def physical_bounds(self):
        """Axis-aligned physical box containing every node."""
        corners = np.array(np.meshgrid(*[[a, b] for a, b in self.extents], indexing="ij"))
        corners = self.to_physical(corners.reshape(self.d, -1).T)
        return corners.min(axis=0), corners.max(axis=0)

    def nearest_node(self, local_point) -> tuple:
        idx = np.rint((np.asarray(local_point, float) - np.asarray(self.origin)) / self.h).astype(int)
        if np.any(idx < 0) or np.any(idx >= np.asarray(self.shape)):
            raise ConfigurationError(f"point {local_point} outside the grid")
        return tuple(int(i) for i in idx)

    def memory_bytes(self, arrays: int = 8) -> int:
        return self.size * 8 * arrays

    def header(self) -> dict:
        return {
            "shape": list(self.shape),
            "h": self.h,
            "origin": list(self.origin),
            "bc": list(self.bc),
            "frame": None if self.frame is None else np.asarray(self.frame).tolist(),
            "anchor": None if self.anchor is None else list(self.anchor),
        }

    @classmethod
    def from_header(cls, head: dict) -> "Grid":
        frame = None if head.get("frame") is None else np.asarray(head["frame"])
        anchor = None if head.get("anchor") is None else tuple(head["anchor"])
        return cls(tuple(head["shape"]), head["h"], tuple(head["origin"]), tuple(head["bc"]), frame, anchor)


@dataclass
class GridState:
    grid: Grid
    u: np.ndarray
    t: float = 0.0
    meta: dict = dc_field(default_factory=dict)

    MAGIC = b"SNAP"

    def __post_init__(self):
        self.u = np.ascontiguousarray(self.u, dtype=np.float64).reshape(self.grid.shape)
        if self.t < 0:
            raise DomainError("time must be nonnegative")

    def copy(self) -> "GridState":
        return GridState(self.grid, self.u.copy(), self.t, dict(self.meta))

    def save(self, path, extra: Optional[dict] = None) -> None:
        header = {"kind": "snapshot", "grid": self.grid.header(), "t": self.t, "meta": self.meta}
        header.update(extra or {})
        write_record(path, self.MAGIC, header, [self.u])

    @classmethod
    def load(cls, path) -> "GridState":
        head, (u,) = read_record(path, cls.MAGIC)
        return cls(Grid.from_header(head["grid"]), u, head["t"], head.get("meta", {}))


def laplacian(u: np.ndarray, grid: Grid, out: Optional[np.ndarray] = None) -> np.ndarray:
    u = np.ascontiguousarray(u, dtype=np.float64).reshape(grid.shape)
    out = np.empty_like(u) if out is None else out
    ih2 = 1.0 / (grid.h * grid.h)
    bc = grid.bc_codes
    if grid.d == 1:
        K.laplacian1(u, out, ih2, bc[0])
    elif grid.d == 2:
        K.laplacian2(u, out, ih2, bc[0], bc[1])
    else:
        K.laplacian3(u, out, ih2, bc[0], bc[1], bc[2])
    return out


def max_stable_dt(grid: Grid, lipschitz_u: float, M: Optional[float] = None) -> float:
    """Largest dt for which one Euler step is a monotone map of [0,1]^N.

    The update is nondecreasing in every nodal value iff
    1 - dt (2d/h^2 + L) >= 0, where L bounds |df/du|.
    """
    dt = 1.0 / (2.0 * grid.d / grid.h ** 2 + lipschitz_u)
    if M is not None:
        dt = min(dt, 0.5 / M)
    return dt


class Stepper:
    """Explicit Euler stepping of one reaction on one grid."""

    def __init__(self, grid: Grid, reaction, dt: Optional[float] = None, cfl: float = 0.9, M=None):
        self.grid = grid
        self.nodes = reaction.on_nodes(grid.points())
        self.M = M if M is not None else getattr(getattr(reaction, "hyp", None), "M", None)
        self.dt_max = max_stable_dt(grid, self.nodes.lipschitz_u, self.M)
        if dt is None:
            dt = cfl * self.dt_max
        if dt <= 0 or dt > self.dt_max * (1.0 + 1e-12):
            raise ConfigurationError(f"dt={dt:.6g} violates the monotone step bound {self.dt_max:.6g}")
        self.dt = float(dt)
        self._lap = np.empty(grid.shape)
        self.seed = getattr(reaction, "seed", None)

    def step(self, u: np.ndarray, out: np.ndarray, t: float, dt: Optional[float] = None):
        dt = self.dt if dt is None else dt
        laplacian(u, self.grid, self._lap)
        dmin, exc, nan = self.nodes.update(u.reshape(-1), self._lap.reshape(-1), out.reshape(-1), dt)
        if nan or exc > CLAMP_TOL:
            flat = out.reshape(-1)
            bad = int(np.flatnonzero(~np.isfinite(flat))[0]) if nan else int(np.argmax(np.abs(flat - 0.5)))
            dump = {
                "t": t,
                "dt": dt,
                "node": np.unravel_index(bad, self.grid.shape),
                "nan_count": int(nan),
                "excursion": float(exc),
                "u_before": float(u.reshape(-1)[bad]),
            }
            raise NumericalError(f"step at t={t:.6g} left [0,1] (nan={nan}, excursion={exc:.3g})", dump)
        return dmin


def _run(state: GridState, stepper: Stepper, t_end: float, callback=None):
    """Advance in place to t_end; callback(u_old, u_new, t_old, dt, dmin) after each step.

    A truthy callback return value stops the run early.
    """
    if t_end < state.t - 1e-12:
        raise DomainError("t_end precedes the current time")
    u = state.u
    buf = np.empty_like(u)
    t = state.t
    n_full = int(math.floor((t_end - t) / stepper.dt + 1e-9))
    steps = [stepper.dt] * n_full
    rest = (t_end - t) - n_full * stepper.dt
    if rest > 1e-12 * max(1.0, t_end):
        steps.append(rest)
    stop = False
    for k, dt in enumerate(steps):
        dmin = stepper.step(u, buf, t, dt)
        t_new = t_end if k == len(steps) - 1 else t + dt
        if callback is not None:
            stop = bool(callback(u, buf, t, t_new - t, dmin))
        u, buf = buf, u
        t = t_new
        if stop:
            break
    state.u = np.ascontiguousarray(u)
    state.t = t
    return state


def advance(state: GridState, field, t_end: float, *, dt=None, stepper: Optional[Stepper] = None,
            monitor: Optional[Callable] = None) -> GridState:
    """Return the state at t_end (the input state is not modified)."""
    stepper = stepper or Stepper(state.grid, field, dt)
    return _run(state.copy(), stepper, t_end, monitor)


def snapshots(state: GridState, field, times, *, stepper: Optional[Stepper] = None) -> list:
    """States at each of the increasing ``times``."""
    stepper = stepper or Stepper(state.grid, field)
    cur = state.copy()
    out = []
    for t in times:
        _run(cur, stepper, float(t))
        out.append(cur.copy())
    return out


@dataclass
class ArrivalTimeField:
    grid: Grid
    times: np.ndarray
    threshold: float
    horizon: float


def arrival_time_field(field, initial: GridState, horizon: float, theta: float, *,
                       stepper: Optional[Stepper] = None, monotone: Optional[bool] = None,
                       tol: float = 1e-10, watch=None) -> ArrivalTimeField:
    """First time each node reaches ``theta`` (linear interpolation in t).

    ``watch`` (flat node indices) restricts tracking to those nodes and
    stops as soon as all of them have arrived.
    """
    if not horizon > 0:
        raise DomainError("horizon must be positive")
    stepper = stepper or Stepper(initial.grid, field)
    monotone = initial.meta.get("monotone", False) if monotone is None else monotone
    state = initial.copy()
    flat0 = state.u.reshape(-1)
    idx = None if watch is None else np.asarray(watch, dtype=np.int64).ravel()
    times = np.full(flat0.size if idx is None else idx.size, np.inf)
    sel = flat0 if idx is None else flat0[idx]
    times[sel >= theta] = 0.0
    level = float(theta)

    def cb(u_old, u_new, t, dt, dmin):
        if monotone and dmin < -tol:
            raise NumericalError(f"monotone data decreased by {-dmin:.3g} at t={t:.6g}")
        if idx is None:
            K.record_arrivals(u_old.reshape(-1), u_new.reshape(-1), times, t, dt, level)
            return False
        K.record_arrivals(u_old.reshape(-1)[idx], u_new.reshape(-1)[idx], times, t, dt, level)
        return bool(np.all(np.isfinite(times)))

    if not (idx is not None and np.all(np.isfinite(times))):
        _run(state, stepper, horizon, cb)
    shape = initial.grid.shape if idx is None else idx.shape
    return ArrivalTimeField(initial.grid, times.reshape(shape), level, horizon)


@dataclass
class LevelSet:
    mask: np.ndarray
    boundary: np.ndarray


def superlevel_set(state: GridState, theta: float) -> LevelSet:
    """Nodes with u >= theta, plus those of them with a neighbor outside."""
    if not 0.0 < theta < 1.0:
        raise DomainError("theta must lie in (0, 1)")
    mask = state.u >= theta
    boundary = np.zeros_like(mask)
    for ax in range(mask.ndim):
        n = mask.shape[ax]
        periodic = state.grid.bc[ax] == "periodic"
        for sh in (1, -1):
            nb = np.roll(mask, sh, axis=ax)
            if not periodic:
                edge = [slice(None)] * mask.ndim
                edge[ax] = 0 if sh == 1 else n - 1
                nb[tuple(edge)] = mask[tuple(edge)]
            boundary |= mask & ~nb
    return LevelSet(mask, boundary)


def level_crossings(state: GridState, theta: float) -> np.ndarray:
    """Physical points where u - theta changes sign along grid edges
    (linear interpolation), in the grid's local frame mapped to physical."""
    u = state.u
    g = state.grid
    pts = []
    base = np.asarray(g.origin)
    for ax in range(u.ndim):
        lo_sl = [slice(None)] * u.ndim
        hi_sl = [slice(None)] * u.ndim
        lo_sl[ax] = slice(0, -1)
        hi_sl[ax] = slice(1, None)
        lo, hi = u[tuple(lo_sl)], u[tuple(hi_sl)]
        hit = (lo >= theta) != (hi >= theta)
        if not np.any(hit):
            continue
        where = np.nonzero(hit)
        va, vb = lo[where], hi[where]
        idx = np.stack(where, axis=1).astype(float)
        idx[:, ax] += (theta - va) / (vb - va)
        pts.append(base + g.h * idx)
    if not pts:
        return np.zeros((0, u.ndim))
    return g.to_physical(np.concatenate(pts))


def transition_width(state: GridState, eta: float, theta: float) -> float:
    """Smallest L with {u >= eta} inside the L-neighborhood of {u >= theta}."""
    if not 0.0 < eta < theta < 1.0:
        raise DomainError("need 0 < eta < theta < 1")
    m_theta = state.u >= theta
    m_eta = state.u >= eta
    if not m_eta.any():
        return 0.0
    if not m_theta.any():
        return math.inf
    dist = ndimage.distance_transform_edt(~m_theta, sampling=state.grid.h)
    return float(dist[m_eta].max())


# ---------------------------------------------------------------------------
# initial data with Δ_h u0 + F0(u0) >= 0
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HalfSpace:
    """{x : (x - point) . normal <= 0}."""

    normal: np.ndarray
    point: np.ndarray

    def signed_distance(self, x):
        e = np.asarray(self.normal, float)
        e = e / np.linalg.norm(e)
        return (np.asarray(x, float) - np.asarray(self.point, float)) @ e


class FrontProfile:
    """u0 = Phi(dist(x, S)): a plateau 1 - theta* up to ``plateau``, a concave
    zone solving Phi'' + (k/s) Phi' = -lam F0(Phi) down to ``u_join``, then a
    convex zone Phi'' + (k/s) Phi' = kappa down to 0 (k = dim - 1)."""

    def __init__(self, F0: BaselineReaction, top: float, dim: int, lam: float, plateau: float,
                 u_join: float, kappa_frac: float = 0.25):
        self.top, self.dim, self.lam, self.plateau = top, dim, lam, plateau
        k = dim - 1.0
        s0 = max(plateau, 1e-9) if dim > 1 else plateau

        def concave(s, y):
            curv = k * y[1] / s if k else 0.0
            return [y[1], -lam * F0(y[0]) - curv]

        def hit_join(s, y):
            return y[0] - u_join

        hit_join.terminal = True
        hit_join.direction = -1
        span = 1e4
        sol = solve_ivp(concave, (s0, s0 + span), [top, 0.0], events=hit_join, dense_output=True,
                        rtol=1e-11, atol=1e-13, max_step=0.05)
        if not sol.t_events[0].size:
            raise ConstructionError("concave zone never reaches the junction", {"lam": lam})
        s_join = float(sol.t_events[0][0])
        slope = float(sol.y_events[0][0][1])
        if slope >= 0:
            raise ConstructionError("profile is not decreasing at the junction")
        self.kappa = kappa_frac * slope * slope / u_join
        self._concave = sol.sol
        self.s_join, self.u_join, self.slope = s_join, u_join, slope
        if k == 0:
            kap = self.kappa
            disc = slope * slope - 2.0 * kap * u_join
            self.s_zero = s_join + (-slope - math.sqrt(disc)) / kap
            self._convex = lambda s: u_join + slope * (s - s_join) + 0.5 * kap * (s - s_join) ** 2
        else:
            # the k/s term pushes the slope toward 0; with kappa -> 0 the profile
            # decays like log(s) and always reaches 0, so shrink kappa until it does
            for _ in range(16):
                kap = self.kappa

                def convex(s, y, kap=kap):
                    return [y[1], kap - k * y[1] / s]

                def zero(s, y):
                    return y[0]

                def flat(s, y):
                    return y[1]

                zero.terminal = True
                zero.direction = -1
                flat.terminal = True
                flat.direction = 1
                sol2 = solve_ivp(convex, (s_join, s_join + span), [u_join, slope], events=(zero, flat),
                                 dense_output=True, rtol=1e-11, atol=1e-13, max_step=0.05)
                if sol2.t_events[0].size:
                    break
                self.kappa *= 0.5
            else:
                raise ConstructionError("convex zone flattens before reaching 0", {"kappa": self.kappa})
            self.s_zero = float(sol2.t_events[0][0])
            self._convex = lambda s: sol2.sol(s)[0]
        self.radius = self.s_zero

    def __call__(self, s):
        s = np.asarray(s, float)
        out = np.zeros_like(s)
        out[s <= self.plateau] = self.top
        m1 = (s > self.plateau) & (s <= self.s_join)
        if m1.any():
            out[m1] = self._concave(s[m1])[0]
        m2 = (s > self.s_join) & (s < self.s_zero)
        if m2.any():
            out[m2] = self._convex(s[m2])
        return np.clip(out, 0.0, self.top)


def build_front_data(S, hyp, grid: Grid, *, baseline: Optional[BaselineReaction] = None,
                     tol: float = 1e-12, cap: float = 256.0, lam: float = 0.5,
                     u_join: Optional[float] = None, plateau0: float = 2.0) -> GridState:
    """(1 - theta*) times a smoothed indicator of S with Δ_h u0 + F0(u0) >= -tol.

    S is None (empty), a ``HalfSpace`` or anything with ``signed_distance``.
    The plateau radius doubles (and lam halves) until the discrete residual
    passes or the total radius exceeds ``cap``.
    """
    top = 1.0 - hyp.theta_star
    if S is None or getattr(S, "empty", False):
        return GridState(grid, np.zeros(grid.shape), 0.0, {"monotone": True, "R": 0.0, "residual_min": 0.0})
    F0 = baseline or baseline_f0(hyp)
    if u_join is None:
        u_join = 1.0 - hyp.theta1 + 0.1 * (hyp.theta1 - hyp.theta_star)
    sd = S.signed_distance(grid.points())
    if not np.any(sd <= 0):
        raise DomainError("S does not intersect the grid")
    dim = 1 if isinstance(S, HalfSpace) else grid.d
    plateau = 0.0 if dim == 1 else plateau0
    tried = []
    while True:
        prof = FrontProfile(F0, top, dim, lam, plateau, u_join)
        u0 = prof(sd).reshape(grid.shape)
        res = laplacian(u0, grid) + F0(u0)
        rmin = float(res.min())
        tried.append({"plateau": plateau, "lam": lam, "R": prof.radius, "residual_min": rmin})
        if rmin >= -tol:
            meta = {"monotone": True, "R": prof.radius, "plateau": plateau, "lam": lam,
                    "residual_min": rmin, "attempts": len(tried)}
            return GridState(grid, u0, 0.0, meta)
        plateau = 2.0 * plateau if plateau > 0 else 1.0
        lam *= 0.5
        if plateau + prof.radius > cap:
            raise ConstructionError(
                f"no admissible front data below radius cap {cap}", {"attempts": tried}
            )
