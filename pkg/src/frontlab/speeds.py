"""Front speeds and arrival-time statistics from half-space experiments.

Each experiment solves the equation on a slab aligned with the direction
e, periodic across it, started from front data for the half-space behind
y. Arrival times at the probe points y + l e give T(l); speeds come from
the large-l behavior of mean T(l)/l.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field as dc_field
from typing import Optional, Sequence

import numpy as np

from .baseline import baseline_f0
from .errors import ConfigurationError, EstimationError
from .geometry import SpeedFunction, direction_grid
from .hypotheses import ReactionHypotheses
from .parallel import ordered_map
from .reaction import homogeneous_field, long_range_variant, sample_field
from .seeding import derive_rng, derive_seed
from .solver import Grid, HalfSpace, Stepper, arrival_time_field, build_front_data

DEFAULT_H = 0.25
DEFAULT_WIDTH = 16.0
BEHIND = 10.0
AHEAD = 20.0


@dataclass(frozen=True)
class FieldSpec:
    """Picklable recipe for the medium used by a job."""

    hyp: ReactionHypotheses
    kind: str = "random"  # random | homogeneous | long_range
    n: Optional[float] = None
    amplitude: float = 1.0

    def make(self, seed: int, box):
        if self.kind == "homogeneous":
            return homogeneous_field(self.hyp, self.amplitude)
        base = sample_field(self.hyp, box, seed)
        if self.kind == "long_range":
            return long_range_variant(base, self.n if self.n is not None else self.hyp.n4)
        if self.kind != "random":
            raise ConfigurationError(f"unknown field kind {self.kind!r}")
        return base


def orthonormal_frame(e) -> np.ndarray:
    """Rotation whose first column is e."""
    e = np.asarray(e, float).reshape(-1)
    e = e / np.linalg.norm(e)
    d = e.size
    if d == 1:
        return e.reshape(1, 1)
    if d == 2:
        return np.array([[e[0], -e[1]], [e[1], e[0]]])
    q, _ = np.linalg.qr(np.column_stack([e, np.eye(3)]))
    q = q[:, :3]
    if q[:, 0] @ e < 0:
        q[:, 0] *= -1
    if np.linalg.det(q) < 0:
        q[:, 2] *= -1
    return q


def slab_grid(d: int, e, y, l_max: float, *, h: float = DEFAULT_H, width: float = DEFAULT_WIDTH,
              behind: float = BEHIND, ahead: float = AHEAD) -> Grid:
    """Grid with local axis 0 along e over [-behind, l_max + ahead] and
    periodic transverse axes of the given width."""
    n0 = int(math.ceil((behind + l_max + ahead) / h)) + 1
    i0 = -int(math.ceil(behind / h))
    shape = [n0]
    origin = [i0 * h]
    bc = ["neumann"]
    if d > 1:
        nt = max(2, int(round(width / h)))
        shape += [nt] * (d - 1)
        origin += [0.0] * (d - 1)
        bc += ["periodic"] * (d - 1)
    return Grid(tuple(shape), h, tuple(origin), tuple(bc), orthonormal_frame(e), tuple(np.asarray(y, float)))


def field_box(grid: Grid, pad: float = 1.0):
    lo, hi = grid.physical_bounds()
    return lo - pad, hi + pad


def halfspace_arrival(field, e, y, probes: Sequence[float], *, hyp: Optional[ReactionHypotheses] = None,
                      h: float = DEFAULT_H, width: float = DEFAULT_WIDTH, grid: Optional[Grid] = None,
                      baseline=None, horizon: Optional[float] = None) -> dict:
    """Arrival times of level 1 - theta* at y + l e for each probe l.

    Probes are snapped to the nearest slab node; the returned keys are the
    requested l values.
    """
    hyp = hyp or field.hyp
    probes = [float(l) for l in probes]
    if min(probes) < 1.0:
        raise ConfigurationError("probe distances must be at least 1")
    grid = grid or slab_grid(hyp.d, e, y, max(probes), h=h, width=width)
    lo0, hi0 = grid.extents[0]
    nodes = []
    for l in probes:
        if not lo0 <= l <= hi0:
            raise ConfigurationError(f"probe l={l} outside the slab [{lo0}, {hi0}]")
        local = np.zeros(grid.d)
        local[0] = l
        nodes.append(np.ravel_multi_index(grid.nearest_node(local), grid.shape))
    frame = np.asarray(grid.frame)
    S = HalfSpace(frame[:, 0], np.asarray(y, float))
    u0 = build_front_data(S, hyp, grid, baseline=baseline)
    if horizon is None:
        horizon = 50.0 * (max(probes) + u0.meta["R"]) + 100.0
    stepper = Stepper(grid, field)
    at = arrival_time_field(field, u0, horizon, 1.0 - hyp.theta_star, stepper=stepper, watch=nodes)
    return dict(zip(probes, at.times.tolist()))


@functools.lru_cache(maxsize=32)
def launch_distance(hyp: ReactionHypotheses, h: float = DEFAULT_H) -> float:
    """Reach R of the half-space front data: beyond it the initial ramp no
    longer fills in, so arrival ladders start there."""
    g = Grid.box([-BEHIND], [BEHIND + 64.0], h)
    u0 = build_front_data(HalfSpace(np.array([1.0]), np.zeros(1)), hyp.replace(d=1), g)
    return float(u0.meta["R"])


def _arrival_job(job):
    spec, e, lengths, seed, h, width = job
    hyp = spec.hyp
    start = launch_distance(hyp, h)
    probes = [start + l for l in lengths]
    grid = slab_grid(hyp.d, e, np.zeros(hyp.d), max(probes), h=h, width=width)
    field = spec.make(seed, field_box(grid))
    res = halfspace_arrival(field, e, np.zeros(hyp.d), probes, hyp=hyp, grid=grid)
    return [res[l] for l in probes]


def arrival_matrix(spec: FieldSpec, e, lengths, seeds: Sequence[int], *, h=DEFAULT_H,
                   width=DEFAULT_WIDTH, workers=None) -> np.ndarray:
    """T[i, j] = arrival time at distance R + lengths[j] for field seed seeds[i],
    with R = launch_distance(hyp, h)."""
    lengths = [float(l) for l in lengths]
    jobs = [(spec, tuple(np.asarray(e, float)), lengths, int(s), h, width) for s in seeds]
    return np.array(ordered_map(_arrival_job, jobs, workers), dtype=float)


def field_seeds(root_seed: int, count: int, module: str = "field") -> list:
    return [derive_seed(root_seed, module, i) for i in range(count)]


@dataclass
class SpeedEstimate:
    direction: np.ndarray
    lengths: np.ndarray
    T: np.ndarray
    T_bar: float
    c_hat: float
    stderr: float
    model: str
    per_length_mean: np.ndarray = dc_field(default=None)

    @property
    def slowness_per_length(self) -> np.ndarray:
        return (self.T / self.lengths[None, :]).mean(0)


def _intercept(lengths, ratios, model, beta, delta):
    if model == "affine":
        x = 1.0 / lengths
    elif model == "rate":
        x = lengths ** (-(1.0 - beta - delta))
    else:
        raise ConfigurationError(f"unknown extrapolation model {model!r}")
    A = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(A, ratios, rcond=None)
    return float(coef[0])


def speed_from_arrivals(T: np.ndarray, lengths, *, beta: float, model: str = "affine", delta: float = 0.05,
                        bootstrap: int = 400, rng: Optional[np.random.Generator] = None):
    """(T_bar, c_hat, stderr) from an arrival matrix (seeds x lengths)."""
    lengths = np.asarray(lengths, float)
    if lengths.size < 3:
        raise EstimationError("need at least three ladder lengths")
    if T.shape[0] < 2:
        raise EstimationError("need at least two seeds")
    if not np.all(np.isfinite(T)):
        raise EstimationError("some probes were never reached")
    R = T / lengths[None, :]
    T_bar = _intercept(lengths, R.mean(0), model, beta, delta)
    if T_bar <= 0:
        raise EstimationError("extrapolated mean slowness is not positive")
    rng = rng or np.random.default_rng(0)
    boots = []
    for _ in range(bootstrap):
        idx = rng.integers(0, R.shape[0], R.shape[0])
        boots.append(1.0 / _intercept(lengths, R[idx].mean(0), model, beta, delta))
    return T_bar, 1.0 / T_bar, float(np.std(boots, ddof=1))


def estimate_front_speed(hyp: ReactionHypotheses, e, lengths, seeds, *, root_seed: int = 0,
                         spec: Optional[FieldSpec] = None, model: str = "affine", delta: float = 0.05,
                         h: float = DEFAULT_H, width: float = DEFAULT_WIDTH, workers=None,
                         min_seeds: int = 8) -> SpeedEstimate:
    """ĉ*(e) = 1 / T̄̂(e) with T̄̂ the l -> ∞ intercept of mean T(l)/l.

    ``seeds`` is a count (seeds derived from ``root_seed``) or explicit list.
    """
    lengths = np.asarray(sorted(float(l) for l in lengths))
    if lengths.size < 3:
        raise EstimationError("need at least three ladder lengths")
    seed_list = field_seeds(root_seed, seeds) if isinstance(seeds, (int, np.integer)) else list(seeds)
    if len(seed_list) < min_seeds:
        raise EstimationError(f"need at least {min_seeds} seeds")
    spec = spec or FieldSpec(hyp)
    T = arrival_matrix(spec, e, lengths, seed_list, h=h, width=width, workers=workers)
    rng = derive_rng(root_seed, "bootstrap", 0)
    T_bar, c, se = speed_from_arrivals(T, lengths, beta=hyp.beta, model=model, delta=delta, rng=rng)
    return SpeedEstimate(np.asarray(e, float), lengths, T, T_bar, c, se, model, (T / lengths).mean(0))


@dataclass
class FluctuationStats:
    lengths: np.ndarray
    n: int
    mean: np.ndarray
    std: np.ndarray
    b_hat: float
    tail_counts: np.ndarray  # (len(lengths), 3): #{|T - mean| >= k std}, k = 1, 2, 3
    beta: float
    T: np.ndarray = dc_field(repr=False, default=None)

    @property
    def cv(self) -> np.ndarray:
        return self.std / self.mean

    @property
    def tail_frequency(self) -> np.ndarray:
        return self.tail_counts / self.n


def stats_from_arrivals(T: np.ndarray, lengths, beta: float) -> FluctuationStats:
    lengths = np.asarray(lengths, float)
    mean = T.mean(0)
    std = T.std(0, ddof=1)
    if np.any(std <= 0):
        raise EstimationError("zero spread in arrival times")
    b_hat = float(np.polyfit(np.log(lengths), np.log(std), 1)[0])
    dev = np.abs(T - mean[None, :])
    tails = np.stack([(dev >= k * std[None, :]).sum(0) for k in (1, 2, 3)], axis=1)
    return FluctuationStats(lengths, T.shape[0], mean, std, b_hat, tails, beta, T)


def fluctuation_stats(hyp: ReactionHypotheses, e, lengths, seeds, *, root_seed: int = 0,
                      spec: Optional[FieldSpec] = None, h: float = DEFAULT_H, width: float = DEFAULT_WIDTH,
                      workers=None, min_seeds: int = 30) -> FluctuationStats:
    """std(T(l e)) growth exponent and tail counts over seeds."""
    lengths = np.asarray(sorted(float(l) for l in lengths))
    if lengths.size < 2:
        raise EstimationError("need at least two lengths")
    seed_list = field_seeds(root_seed, seeds) if isinstance(seeds, (int, np.integer)) else list(seeds)
    if len(seed_list) < min_seeds:
        raise EstimationError(f"need at least {min_seeds} seeds for tail counting")
    T = arrival_matrix(spec or FieldSpec(hyp), e, lengths, seed_list, h=h, width=width, workers=workers)
    if not np.all(np.isfinite(T)):
        raise EstimationError("some probes were never reached")
    return stats_from_arrivals(T, lengths, hyp.beta)


# ---------------------------------------------------------------------------
# c0 and c1
# ---------------------------------------------------------------------------


def front_speed_1d(reaction, hyp: ReactionHypotheses, h: float, *, x_far: float = 60.0,
                   window: float = 0.5, baseline=None, horizon: float = 1e5) -> float:
    """Speed of a 1-D front of an x-independent reaction on a grid of spacing h.

    Arrival times at every node of the last ``window`` fraction of [0, x_far]
    are regressed on position; the inverse slope is the speed. Node
    positions are multiples of h, so refinements by 2 share the coarse nodes.
    """
    grid = Grid.box([-BEHIND], [x_far + AHEAD], h)
    u0 = build_front_data(HalfSpace(np.array([1.0]), np.array([0.0])), hyp.replace(d=1), grid,
                          baseline=baseline)
    x = grid.axes()[0]
    sel = np.flatnonzero((x >= (1.0 - window) * x_far) & (x <= x_far))
    at = arrival_time_field(reaction, u0, horizon, 1.0 - hyp.theta_star, stepper=Stepper(grid, reaction, M=hyp.M),
                            watch=sel)
    T = at.times
    if not np.all(np.isfinite(T)):
        raise EstimationError("front did not reach the tracking window")
    slope = np.polyfit(x[sel], T, 1)[0]
    return float(1.0 / slope)


def richardson(values: Sequence[float], ratio: float = 2.0, order: float = 2.0) -> float:
    """Extrapolate the last two values of a refinement sequence."""
    a, b = values[-2], values[-1]
    return b + (b - a) / (ratio ** order - 1.0)


def observed_order(values: Sequence[float], ratio: float = 2.0) -> float:
    a, b, c = values[-3:]
    return float(math.log(abs(a - b) / abs(b - c)) / math.log(ratio))


def baseline_speed(hyp: ReactionHypotheses, h: float = DEFAULT_H, *, x_far: float = 60.0,
                   resolution: int = 2 ** 14) -> dict:
    """c0 by 1-D front tracking of F0 at h and h/2 plus Richardson extrapolation."""
    F0 = baseline_f0(hyp, resolution)
    if not np.any(F0.values > 0):
        raise EstimationError("F0 vanishes identically; no positive front speed")
    speeds = [front_speed_1d(F0, hyp, hh, x_far=x_far, baseline=F0) for hh in (h, h / 2.0)]
    return {"c0": richardson(speeds), "speeds": speeds, "h": [h, h / 2.0]}


def speed_bounds(hyp: ReactionHypotheses, h: float = DEFAULT_H, **kw) -> tuple:
    """(c0, c1) with c1 = 2 sqrt(M d) and c0 the extrapolated F0 front speed."""
    return baseline_speed(hyp, h, **kw)["c0"], hyp.c1


@dataclass
class SpeedProfile:
    directions: np.ndarray
    c_hat: np.ndarray
    stderr: np.ndarray
    c0: float
    c1: float
    lengths: np.ndarray = None
    width: float = DEFAULT_WIDTH
    notes: list = dc_field(default_factory=lambda: ["transverse-periodic slab surrogate for full space"])

    def speed_function(self, directions=None) -> SpeedFunction:
        sf = SpeedFunction(self.directions, self.c_hat)
        return sf if directions is None else sf.resample(directions)

    def bound_violations(self, k: float = 2.0) -> list:
        lo = self.c0 - k * self.stderr
        hi = self.c1 + k * self.stderr
        bad = np.flatnonzero((self.c_hat < lo) | (self.c_hat > hi))
        return [(self.directions[i].tolist(), float(self.c_hat[i])) for i in bad]

    def continuity(self) -> dict:
        """Max adjacent jump and fitted modulus K with jump <= K|Δe| + 4 stderr."""
        sf = SpeedFunction(self.directions, self.c_hat)
        jump, ratio = sf.max_adjacent_jump()
        if self.directions.shape[1] == 2:
            ang = np.mod(np.arctan2(self.directions[:, 1], self.directions[:, 0]), 2 * np.pi)
            o = np.argsort(ang)
            v, s, a = self.c_hat[o], self.stderr[o], ang[o]
            dv = np.abs(np.diff(np.append(v, v[0])))
            ds = 4.0 * np.maximum(s, np.roll(s, -1))
            de = np.abs(2 * np.sin(np.diff(np.append(a, a[0] + 2 * np.pi)) / 2))
            K = float(np.max(np.maximum(dv - ds, 0.0) / de))
        else:
            K = ratio
        return {"max_jump": jump, "K": K}

    def rows(self) -> list:
        return [
            {"direction": e.tolist(), "c_hat": float(c), "stderr": float(s)}
            for e, c, s in zip(self.directions, self.c_hat, self.stderr)
        ]


def _profile_job(job):
    spec, e, lengths, seeds, root, model, h, width, min_seeds = job
    est = estimate_front_speed(spec.hyp, e, lengths, seeds, root_seed=root, spec=spec, model=model,
                               h=h, width=width, workers=1, min_seeds=min_seeds)
    return est.c_hat, est.stderr, est.T


def speed_profile(hyp: ReactionHypotheses, directions=None, lengths=(10.0, 20.0, 40.0), seeds=8, *,
                  root_seed: int = 0, spec: Optional[FieldSpec] = None, model: str = "affine",
                  h: float = DEFAULT_H, width: float = DEFAULT_WIDTH, workers=None,
                  c0: Optional[float] = None, n_directions: int = 32, min_seeds: int = 8) -> SpeedProfile:
    """ĉ*(e) over a direction grid. The same field seeds serve every direction."""
    E = direction_grid(hyp.d, n_directions) if directions is None else np.asarray(directions, float)
    seed_list = field_seeds(root_seed, seeds) if isinstance(seeds, (int, np.integer)) else list(seeds)
    spec = spec or FieldSpec(hyp)
    jobs = [(spec, e, lengths, seed_list, root_seed, model, h, width, min_seeds) for e in E]
    out = ordered_map(_profile_job, jobs, workers)
    if c0 is None:
        c0 = speed_bounds(hyp, h)[0]
    return SpeedProfile(E, np.array([o[0] for o in out]), np.array([o[1] for o in out]), c0, hyp.c1,
                        np.asarray(lengths, float), width)


def width_sensitivity(hyp: ReactionHypotheses, e, lengths, seeds, *, widths=(DEFAULT_WIDTH, 2 * DEFAULT_WIDTH),
                      root_seed: int = 0, spec: Optional[FieldSpec] = None, h: float = DEFAULT_H,
                      workers=None, min_seeds: int = 8) -> dict:
    """ĉ*(e) at two or more transverse slab widths, same field seeds.

    The periodic slab stands in for full space; the relative spread of the
    estimates is the diagnostic for how much the width biases T̄(e).
    """
    if hyp.d == 1:
        raise ConfigurationError("width sensitivity needs d >= 2")
    ests = [estimate_front_speed(hyp, e, lengths, seeds, root_seed=root_seed, spec=spec, h=h, width=w,
                                 workers=workers, min_seeds=min_seeds) for w in widths]
    c = np.array([est.c_hat for est in ests])
    return {"widths": list(widths), "c_hat": c.tolist(), "stderr": [est.stderr for est in ests],
            "rel_spread": float(np.ptp(c) / np.mean(c))}
