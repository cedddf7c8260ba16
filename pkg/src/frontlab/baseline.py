"""The deterministic minorant F0: the largest M-Lipschitz function below
g(u) = alpha1 (1-u)^m1 [u >= 1 - theta1]."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .errors import ConfigurationError
from .hypotheses import ReactionHypotheses


def lower_envelope(g: np.ndarray, step: float) -> np.ndarray:
    """min_j (g[j] + step * |i - j|) by a forward and a backward sweep."""
    g = np.asarray(g, dtype=float)
    j = np.arange(g.size, dtype=float) * step
    fwd = np.minimum.accumulate(g - j) + j
    bwd = (np.minimum.accumulate((g + j)[::-1]))[::-1] - j
    return np.minimum(fwd, bwd)


def ignition_minorant(hyp: ReactionHypotheses, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    return np.where(u >= 1.0 - hyp.theta1, hyp.alpha1 * np.clip(1.0 - u, 0.0, None) ** hyp.m1, 0.0)


@dataclass(frozen=True)
class BaselineReaction:
    """Tabulated F0 on a uniform grid of [0, 1] with linear interpolation."""

    u: np.ndarray
    values: np.ndarray
    M: float
    theta1: float
    m1: float
    alpha1: float

    @property
    def du(self) -> float:
        return 1.0 / (self.u.size - 1)

    @property
    def lipschitz_u(self) -> float:
        return self.M

    def __call__(self, u):
        return np.interp(u, self.u, self.values)

    def on_nodes(self, points) -> "TabulatedNodes":
        return TabulatedNodes(self)

    def rates(self, u):
        return self(u)


class TabulatedNodes:
    """Node-level adapter so the stepper treats F0 like any other reaction."""

    def __init__(self, table: BaselineReaction):
        self.table = table
        self.values = np.ascontiguousarray(table.values)
        self.lipschitz_u = table.M

    def rates(self, u):
        return self.table(np.asarray(u).ravel())

    def update(self, u, lap, out, dt):
        return K.update_tabulated(u, lap, out, dt, self.values, self.table.du)


def baseline_f0(hyp: ReactionHypotheses, resolution: int = 2 ** 14) -> BaselineReaction:
    """Discrete inf-convolution of g with M|.| on ``resolution`` cells.

    g is taken lower semicontinuous (g = 0 at the jump 1 - theta1); the
    cone M|u - (1 - theta1)| rooted at the jump is folded in so the result
    is exact at every table point, not only at points of the grid.
    """
    if resolution < 1000:
        raise ConfigurationError("resolution must be at least 1000")
    if hyp.alpha1 <= 0.0:
        raise ConfigurationError("alpha1 must be positive")
    u = np.linspace(0.0, 1.0, resolution + 1)
    jump = 1.0 - hyp.theta1
    g = np.where(u > jump, hyp.alpha1 * (1.0 - u) ** hyp.m1, 0.0)
    env = lower_envelope(g, hyp.M / resolution)
    env = np.minimum(env, hyp.M * np.abs(u - jump))
    env[u <= jump] = 0.0
    env[-1] = 0.0
    return BaselineReaction(u, env, hyp.M, hyp.theta1, hyp.m1, hyp.alpha1)
