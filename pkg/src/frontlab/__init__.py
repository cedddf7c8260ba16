"""Random ignition fronts: reaction fields, a monotone finite-difference
solver, front-speed estimation, Wulff-shape geometry and a homogenization
harness."""

__version__ = "0.1.0"

from .errors import (ConfigurationError, ConstructionError, DomainError, EstimationError, JobError,
                     NumericalError)
from .hypotheses import ReactionHypotheses

__all__ = [
    "__version__",
    "ConfigurationError",
    "ConstructionError",
    "DomainError",
    "EstimationError",
    "JobError",
    "NumericalError",
    "ReactionHypotheses",
]
