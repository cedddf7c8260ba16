"""Reaction constants and the exponent arithmetic derived from them."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Optional

from .errors import ConfigurationError


@dataclass(frozen=True)
class ReactionHypotheses:
    """Constants of the random ignition reaction.

    ``M`` bounds the Lipschitz constants in x and u, ``theta1`` is the
    ignition floor, ``alpha1 (1-u)^m1`` the lower bound near u = 1 and
    ``rho`` the range of dependence. ``m3/alpha3`` and ``m4/n4/alpha4``
    are the optional strict-decrease and long-range constants.

    ``a_max``, ``dtheta`` and ``ramp_width`` parametrize the sampled
    field; ``theta_star`` sets the arrival level ``1 - theta_star``.
    """

    M: float
    theta1: float
    m1: float
    alpha1: float
    rho: float = 1.0
    d: int = 2
    nu: float = 0.5
    m3: Optional[float] = None
    alpha3: Optional[float] = None
    m4: Optional[float] = None
    n4: Optional[float] = None
    alpha4: Optional[float] = None
    a_max: float = 2.0
    dtheta: Optional[float] = None
    ramp_width: float = 0.05
    theta_star: float = 0.05

    def __post_init__(self):
        if self.dtheta is None:
            object.__setattr__(self, "dtheta", 0.1 * (1.0 - 2.0 * self.theta1))
        self.validate()

    def validate(self):
        def need(ok, name):
            if not ok:
                raise ConfigurationError(f"violated invariant: {name}")

        need(0.0 < self.theta1 < 0.5, "theta1 ∈ (0, 0.5)")
        need(self.m1 > 1.0, "m1 > 1")
        need(self.M >= 1.0, "M ≥ 1")
        need(self.alpha1 > 0.0, "alpha1 > 0")
        need(self.rho >= 1.0, "rho ≥ 1")
        need(self.d in (1, 2, 3), "d ∈ {1, 2, 3}")
        need(self.nu > 0.0, "nu > 0")
        need(
            self.alpha1 * self.theta1 ** self.m1 <= self.M * self.theta1,
            "alpha1·theta1^m1 ≤ M·theta1",
        )
        need(self.a_max >= 1.0, "a_max ≥ 1")
        need(self.dtheta >= 0.0, "dtheta ≥ 0")
        need(self.ramp_width > 0.0, "ramp_width > 0")
        need(
            self.theta1 + self.dtheta + self.ramp_width < 1.0 - self.theta1,
            "theta1 + dtheta + ramp_width < 1 - theta1",
        )
        need(0.0 < self.theta_star <= self.theta1 / 4.0, "theta_star ∈ (0, theta1/4]")
        if (self.m3 is None) != (self.alpha3 is None):
            raise ConfigurationError("violated invariant: m3 and alpha3 set together")
        if self.m3 is not None:
            need(self.m3 >= 1.0, "m3 ≥ 1")
            need(self.alpha3 > 0.0, "alpha3 > 0")
        h4 = (self.m4, self.n4, self.alpha4)
        if any(v is not None for v in h4):
            need(all(v is not None for v in h4), "m4, n4, alpha4 set together")
            need(self.m4 > 0.0 and self.n4 > 0.0 and self.alpha4 > 0.0, "m4, n4, alpha4 > 0")

    @property
    def has_h3(self) -> bool:
        return self.m3 is not None

    @property
    def has_h4(self) -> bool:
        return self.m4 is not None

    @property
    def long_range(self) -> bool:
        """True when the β / σ̃ formulas take the long-range branch."""
        return self.has_h3 and self.has_h4

    def replace(self, **changes) -> "ReactionHypotheses":
        return dataclasses.replace(self, **changes)

    # exponents -------------------------------------------------------
    @property
    def beta(self) -> float:
        q = 1.0 / (2.0 * self.m1)
        if self.long_range:
            q = min(q, self.m4 / (self.m3 + 2.0 * self.m4))
        return 1.0 - q

    @property
    def sigma_tilde(self) -> float:
        s = 1.0 / (8.0 * self.m1)
        if self.long_range:
            s = min(s, self.m4 / (4.0 * self.m3 + 8.0 * self.m4))
        return s

    @property
    def sigma(self) -> float:
        return 0.5 * min(self.sigma_tilde, self.nu)

    @property
    def sigma_prime(self) -> float:
        return min((1.0 - self.beta) / 4.0, self.nu)

    @property
    def sigma_dprime(self) -> float:
        b = self.beta
        return (1.0 - b) / (2.0 * (2.0 - b))

    def exponents(self) -> dict:
        out = {
            "beta": self.beta,
            "sigma_tilde": self.sigma_tilde,
            "sigma": self.sigma,
            "sigma_prime": self.sigma_prime,
            "sigma_dprime": self.sigma_dprime,
        }
        # when σ̃ = (1-β)/4 the two definitions give σ' = 2σ
        tied = math.isclose(self.sigma_tilde, (1.0 - self.beta) / 4.0, rel_tol=1e-12)
        out["sigma_prime_is_2sigma"] = tied and math.isclose(
            self.sigma_prime, 2.0 * self.sigma, rel_tol=1e-12
        )
        return out

    # closed-form bounds ------------------------------------------------
    @property
    def c1(self) -> float:
        return 2.0 * math.sqrt(self.M * self.d)

    @property
    def kappa1(self) -> float:
        return 1.0 + math.sqrt(self.d / self.M) * math.log(2.0 * self.d / (1.0 - 2.0 * self.theta1))

    def propagation_radius(self, t: float) -> float:
        """Radius of the cone outside of which a solution cannot ignite by time t."""
        return self.c1 * t + self.kappa1

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)
