"""End-to-end test of front homogenization at desk scale.

For each (ε, seed) the unscaled equation is solved on a grid covering
ε⁻¹ B_{c1 T0 + 1}(A) up to time T0/ε. Because u_ε(t, x) = u(t/ε, x/ε),
the ε-scaled level set at time t is the unscaled node mask at t/ε with
node positions multiplied by ε: no interpolation is involved.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigurationError, DomainError, EstimationError
from .geometry import ConvexBody, SpeedFunction, dilate, erode, theta_set
from .hypotheses import ReactionHypotheses
from .parallel import ordered_map
from .seeding import derive_rng, derive_seed
from .solver import Grid, GridState, Stepper, level_crossings, snapshots
from .speeds import FieldSpec

BYTES_PER_NODE_ARRAY = 8


@dataclass(frozen=True)
class ExperimentConfig:
    hyp: ReactionHypotheses
    body: ConvexBody
    theta: float = 0.5
    T0: float = 1.0
    eps: tuple = (0.2, 0.1, 0.05, 0.02)
    seeds: int = 20
    n_checkpoints: int = 8
    C0: Optional[float] = None
    h: float = 0.25
    mollifier_cap: float = 2.0
    memory_cap_mb: float = 2048.0
    field_kind: str = "random"
    long_range_n: Optional[float] = None
    root_seed: int = 0

    def __post_init__(self):
        eps = tuple(float(e) for e in self.eps)
        object.__setattr__(self, "eps", eps)
        if any(not 0.0 < e < 0.5 for e in eps):
            raise ConfigurationError("violated invariant: every eps ∈ (0, 0.5)")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ConfigurationError("violated invariant: eps ladder strictly decreasing")
        if not 0.0 < self.theta < 1.0:
            raise ConfigurationError("violated invariant: theta ∈ (0, 1)")
        if self.T0 < 1.0:
            raise ConfigurationError("violated invariant: T0 ≥ 1")
        if self.body.d != self.hyp.d:
            raise ConfigurationError("body dimension differs from hypotheses d")
        if self.body.is_empty:
            raise ConfigurationError("violated invariant: A nonempty and bounded")
        if self.seeds < 1 or self.n_checkpoints < 1:
            raise ConfigurationError("need at least one seed and one checkpoint")

    @property
    def time_floor_constant(self) -> float:
        """C0: zero when theta < 1 - theta1 (no ignition delay floor), else 10."""
        if self.C0 is not None:
            return float(self.C0)
        return 0.0 if self.theta < 1.0 - self.hyp.theta1 else 10.0

    def checkpoints(self) -> np.ndarray:
        """Uniform times in (t_min, T0] shared by every ε."""
        t_min = self.time_floor_constant * max(self.eps)
        k = np.arange(1, self.n_checkpoints + 1)
        return t_min + k * (self.T0 - t_min) / self.n_checkpoints

    def margin(self, eps: float) -> float:
        return eps ** self.hyp.sigma

    def mollifier_width(self, eps: float) -> float:
        return min(self.mollifier_cap, eps ** (self.hyp.nu - 1.0))

    def field_spec(self) -> FieldSpec:
        return FieldSpec(self.hyp, self.field_kind, self.long_range_n)


def unscaled_grid(A: ConvexBody, eps: float, hyp: ReactionHypotheses, T0: float, h: float) -> Grid:
    """Node-aligned grid covering ε⁻¹ B_{c1 T0 + 1}(A)."""
    V = A.vertices
    R = hyp.c1 * T0 + 1.0
    return Grid.box((V.min(0) - R) / eps, (V.max(0) + R) / eps, h)


def memory_estimate_mb(grid: Grid) -> float:
    return grid.size * BYTES_PER_NODE_ARRAY * (7 + grid.d) / 2 ** 20


def initial_data(A: ConvexBody, eps: float, grid: Grid, hyp: ReactionHypotheses, width: float) -> np.ndarray:
    """(1 - theta1) ψ(x): ψ = 1 at depth >= width inside ε⁻¹A, 0 outside,
    cosine ramp in between (depth in unscaled units)."""
    depth = -A.gap(grid.points() * eps) / eps
    q = np.clip(depth / width, 0.0, 1.0)
    return ((1.0 - hyp.theta1) * 0.5 * (1.0 - np.cos(np.pi * q))).reshape(grid.shape)


@dataclass
class ScaledRun:
    eps: float
    grid: Grid
    times: np.ndarray
    masks: list
    crossings: list
    states: Optional[list] = None

    def scaled_points(self) -> np.ndarray:
        return self.grid.points() * self.eps

    @property
    def h_scaled(self) -> float:
        return self.grid.h * self.eps


def scaled_solve(field, eps: float, A: ConvexBody, nu: float, theta: float, checkpoints: Sequence[float], *,
                 hyp: Optional[ReactionHypotheses] = None, h: float = 0.25, grid: Optional[Grid] = None,
                 mollifier_cap: float = 2.0, memory_cap_mb: float = 2048.0,
                 keep_states: bool = False) -> ScaledRun:
    """Level sets {u_ε(t) >= θ} at the checkpoints, as masks on the unscaled grid."""
    hyp = hyp or field.hyp
    cps = np.asarray(checkpoints, float)
    if np.any(cps <= 0) or np.any(np.diff(cps) <= 0):
        raise DomainError("checkpoints must be positive and increasing")
    grid = grid or unscaled_grid(A, eps, hyp, float(cps[-1]), h)
    need = memory_estimate_mb(grid)
    if need > memory_cap_mb:
        raise ConfigurationError(
            f"grid of {grid.size} nodes needs about {need:.0f} MB, above the cap of {memory_cap_mb:.0f} MB"
        )
    width = min(mollifier_cap, eps ** (nu - 1.0))
    u0 = GridState(grid, initial_data(A, eps, grid, hyp, width), 0.0)
    states = snapshots(u0, field, cps / eps, stepper=Stepper(grid, field))
    masks = [s.u >= theta for s in states]
    crossings = [level_crossings(s, theta) * eps for s in states]
    return ScaledRun(eps, grid, cps, masks, crossings, states if keep_states else None)


def _nodes_in_box(points: np.ndarray, lo, hi) -> np.ndarray:
    return np.flatnonzero(np.all((points >= lo) & (points <= hi), axis=1))


def gamma_hausdorff(crossings: np.ndarray, body: ConvexBody, spacing: float) -> float:
    """Hausdorff distance between the sampled level-set boundary and ∂body."""
    if crossings.shape[0] == 0 or body.is_empty:
        return math.inf
    d1 = float(np.abs(body.signed_distance(crossings)).max())
    Q = body.boundary_samples(spacing)
    d2 = float(cKDTree(crossings).query(Q)[0].max())
    return max(d1, d2)


def verify_inclusions(mask: np.ndarray, points: np.ndarray, theta_t: ConvexBody, margin: float,
                      crossings: Optional[np.ndarray] = None, spacing: Optional[float] = None,
                      h: Optional[float] = None):
    """(lower_ok, upper_ok, d_H) for Γ = nodes with ``mask`` (scaled ``points``).

    lower: every node of the margin-erosion of Θ_t lies in Γ;
    upper: every node of Γ lies in the margin-dilation of Θ_t.
    An empty Γ counts as a lower failure whenever the erosion is nonempty.
    """
    if h is not None and not margin > h:
        raise DomainError(f"margin {margin} must exceed the scaled grid spacing {h}")
    flat = mask.reshape(-1)
    inner = erode(theta_t, margin)
    if inner.is_empty:
        lower = True
    else:
        V = inner.vertices
        cand = _nodes_in_box(points, V.min(0), V.max(0))
        inside = cand[inner.contains(points[cand])]
        lower = bool(flat[inside].all())
    gam = np.flatnonzero(flat)
    if gam.size == 0:
        upper = True
        lower = False if not inner.is_empty else lower
    else:
        upper = bool(dilate(theta_t, margin).contains(points[gam], closed=True).all())
    dH = math.nan
    if crossings is not None:
        dH = gamma_hausdorff(crossings, theta_t, spacing or margin)
    return lower, upper, dH


def cube_grid_probes(outer: ConvexBody, inner: Optional[ConvexBody], r: float) -> np.ndarray:
    """One point from each cube of side r d^{-1/2} with corners on that lattice
    that meets outer minus the open inner body. Every point of that region
    lies within r of a probe (cube diameter r)."""
    if r <= 0:
        raise DomainError("r must be positive")
    d = outer.d
    s = r / math.sqrt(d)
    V = outer.vertices
    lo = np.floor(V.min(0) / s).astype(int)
    hi = np.ceil(V.max(0) / s).astype(int)
    ranges = [np.arange(a, b) for a, b in zip(lo, hi)]
    cells = np.array(np.meshgrid(*ranges, indexing="ij")).reshape(d, -1).T * s
    unit = np.array(np.meshgrid(*[[0.0, 1.0]] * d, indexing="ij")).reshape(d, -1).T * s
    # gap is 1-Lipschitz, so a center farther than the half diagonal is clear of the body
    cells = cells[outer.gap(cells + 0.5 * s) <= 0.5 * r]
    nc, nk = cells.shape[0], unit.shape[0]
    corners = (cells[:, None, :] + unit[None, :, :]).reshape(-1, d)
    in_outer = (outer.gap(corners) <= 0).reshape(nc, nk)
    if inner is None or inner.is_empty:
        g_in = np.full((nc, nk), np.inf)
    else:
        g_in = inner.gap(corners).reshape(nc, nk)
    probes = np.full((nc, d), np.nan)
    # a corner inside outer and outside the open inner body is a valid probe
    good = in_outer & (g_in >= 0)
    has = good.any(1)
    first = np.argmax(good, axis=1)
    probes[has] = corners.reshape(nc, nk, d)[has, first[has]]
    # all corners in the open inner body: the cube lies inside it
    skip = has | np.all(g_in < 0, axis=1)
    eye = np.eye(d)
    for i in np.flatnonzero(~skip):
        c0 = cells[i]
        E = np.vstack([outer.directions, eye, -eye])
        h = np.concatenate([outer.tight_support, c0 + s, -c0])
        piece = ConvexBody(E, h)
        centre, rad = piece.chebyshev
        if rad < -1e-12:
            continue
        cand = piece.vertices if rad > 1e-12 else centre[None, :]
        if not np.all(outer.gap(cand) <= 1e-9):
            continue
        if inner is None or inner.is_empty:
            probes[i] = cand[0]
            continue
        g = inner.gap(cand)
        k = int(np.argmax(g))
        if g[k] >= 0:
            probes[i] = cand[k]
    return probes[np.all(np.isfinite(probes), axis=1)]


# ---------------------------------------------------------------------------
# experiment driver
# ---------------------------------------------------------------------------


def _job(job):
    cfg, speed, eps, seed_index = job
    hyp = cfg.hyp
    A = cfg.body
    cps = cfg.checkpoints()
    grid = unscaled_grid(A, eps, hyp, cfg.T0, cfg.h)
    seed = derive_seed(cfg.root_seed, "homogenize-field", seed_index)
    lo, hi = grid.physical_bounds()
    field = cfg.field_spec().make(seed, (lo - 1.0, hi + 1.0))
    run = scaled_solve(field, eps, A, hyp.nu, cfg.theta, cps, hyp=hyp, grid=grid,
                       mollifier_cap=cfg.mollifier_cap, memory_cap_mb=cfg.memory_cap_mb)
    pts = run.scaled_points()
    margin = cfg.margin(eps)
    cone_C = hyp.c1 + 1.0
    rows = []
    prev = None
    for t, mask, cross in zip(run.times, run.masks, run.crossings):
        th = theta_set(A, speed, float(t))
        lower, upper, dH = verify_inclusions(mask, pts, th, margin, cross, run.h_scaled, run.h_scaled)
        cone = dilate(A, cone_C * (float(t) + eps ** hyp.sigma_prime))
        gam = np.flatnonzero(mask.reshape(-1))
        cone_ok = bool(cone.contains(pts[gam], closed=True).all()) if gam.size else True
        nested = bool(prev is None or not np.any(prev & ~mask))
        prev = mask
        rows.append({
            "eps": eps,
            "seed_index": seed_index,
            "seed": seed,
            "t": float(t),
            "lower_ok": lower,
            "upper_ok": upper,
            "d_H": dH,
            "margin": margin,
            "cone_ok": cone_ok,
            "nested": nested,
            "gamma_nodes": int(gam.size),
        })
    return rows


def run_experiment(cfg: ExperimentConfig, speed: SpeedFunction, *, workers=None, jobs=None) -> list:
    """Rows for every (ε, seed, checkpoint), ordered by (ε desc, seed, t)."""
    if speed.d != cfg.hyp.d:
        raise ConfigurationError("speed profile dimension differs from hypotheses d")
    speed = speed.resample(cfg.body.directions)
    job_list = jobs if jobs is not None else [(e, s) for e in cfg.eps for s in range(cfg.seeds)]
    out = ordered_map(_job, [(cfg, speed, e, s) for e, s in job_list], workers)
    return [row for rows in out for row in rows]


def experiment_jobs(cfg: ExperimentConfig) -> list:
    return [(e, s) for e in cfg.eps for s in range(cfg.seeds)]


# ---------------------------------------------------------------------------
# analysis
# ---------------------------------------------------------------------------


def _group(rows):
    by = {}
    for r in rows:
        by.setdefault(r["eps"], {}).setdefault(r["seed_index"], []).append(r)
    return by


def median_dh_table(rows) -> dict:
    """{t: {eps: median over seeds of d_H}}."""
    table = {}
    for r in rows:
        table.setdefault(r["t"], {}).setdefault(r["eps"], []).append(r["d_H"])
    return {t: {e: float(np.median(v)) for e, v in sorted(d.items(), reverse=True)} for t, d in sorted(table.items())}


@dataclass
class RateFit:
    sigma_hat: float
    ci: tuple
    eps: np.ndarray
    stat: np.ndarray


def _slope(eps, stat):
    return float(np.polyfit(np.log(eps), np.log(stat), 1)[0])


def rate_fit(rows, *, bootstrap: int = 1000, rng: Optional[np.random.Generator] = None,
             level: float = 0.95) -> RateFit:
    """Slope of log median_seed(max_t d_H) against log ε, bootstrap CI over seeds."""
    by = _group(rows)
    eps_ok, per_seed = [], []
    for e in sorted(by, reverse=True):
        vals = np.array([max(r["d_H"] for r in rs) for _, rs in sorted(by[e].items())])
        finite = vals[np.isfinite(vals)]
        if finite.size >= 3 and np.isfinite(np.median(vals)) and np.median(vals) > 0:
            eps_ok.append(e)
            per_seed.append(vals)
    if len(eps_ok) < 3:
        raise EstimationError("need at least three ε values with finite median d_H")
    eps_arr = np.array(eps_ok)
    stat = np.array([np.median(v) for v in per_seed])
    sig = _slope(eps_arr, stat)
    rng = rng or np.random.default_rng(0)
    boots = []
    for _ in range(bootstrap):
        s = np.array([np.median(v[rng.integers(0, v.size, v.size)]) for v in per_seed])
        if np.all(np.isfinite(s)) and np.all(s > 0):
            boots.append(_slope(eps_arr, s))
    a = (1.0 - level) / 2.0
    ci = (float(np.quantile(boots, a)), float(np.quantile(boots, 1.0 - a))) if boots else (math.nan, math.nan)
    return RateFit(sig, ci, eps_arr, stat)


def success_probability(rows, eps: float, *, sigma: Optional[float] = None, t_min: float = 0.0,
                        min_seeds: int = 10) -> dict:
    """Fraction of seeds with both inclusions at every checkpoint t >= t_min."""
    by = _group(rows).get(eps)
    if not by or len(by) < min_seeds:
        raise EstimationError(f"need at least {min_seeds} seeds at eps={eps}")
    ok = [all(r["lower_ok"] and r["upper_ok"] for r in rs if r["t"] >= t_min) for rs in by.values()]
    out = {"eps": eps, "seeds": len(ok), "frequency": float(np.mean(ok))}
    if sigma is not None:
        out["asymptotic_bound"] = float(1.0 - math.exp(-eps ** (-2.0 * sigma)))
    return out


@dataclass
class HomogenizationReport:
    rows: list
    sigma: float
    rate: Optional[RateFit]
    success: list
    medians: dict
    eps0_empirical: Optional[float]
    notes: list = dc_field(default_factory=list)


def build_report(rows, cfg: ExperimentConfig, *, bootstrap: int = 1000) -> HomogenizationReport:
    rng = derive_rng(cfg.root_seed, "rate-bootstrap", 0)
    try:
        rate = rate_fit(rows, bootstrap=bootstrap, rng=rng)
    except EstimationError:
        rate = None
    success = []
    for e in cfg.eps:
        try:
            success.append(success_probability(rows, e, sigma=cfg.hyp.sigma, min_seeds=min(10, cfg.seeds)))
        except EstimationError:
            pass
    full = [s["eps"] for s in success if s["frequency"] == 1.0]
    notes = [
        "speeds are the measured profile, not the exact c*",
        f"time floor constant C0 = {cfg.time_floor_constant}",
    ]
    return HomogenizationReport(rows, cfg.hyp.sigma, rate, success, median_dh_table(rows),
                                min(full) if full else None, notes)
