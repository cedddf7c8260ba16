"""Flat key/value experiment files with four sections.

    [hypotheses]  reaction constants (ReactionHypotheses fields)
    [geometry]    initial body A and the direction grid
    [ladder]      ε ladder, seeds, checkpoints, speed-estimation lengths
    [runtime]     root seed, workers, memory cap, field kind

Unknown sections or keys raise ConfigurationError.
"""
from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigurationError
from .geometry import ConvexBody, direction_grid
from .harness import ExperimentConfig
from .hypotheses import ReactionHypotheses
from .reaction import lipschitz_u_bound, lipschitz_x_bound

_HYP_FIELDS = {f.name: f for f in dataclasses.fields(ReactionHypotheses)}
_INT_HYP = {"d"}

GEOMETRY_KEYS = {"body", "radius", "center", "lo", "hi", "points", "csv", "directions", "icosphere_level"}
LADDER_KEYS = {"eps", "seeds", "T0", "theta", "checkpoints", "C0", "h", "mollifier_cap",
               "speed_lengths", "speed_seeds", "speed_directions", "speed_model", "speed_h", "speed_width"}
RUNTIME_KEYS = {"root_seed", "workers", "memory_cap_mb", "field", "long_range_n"}
SECTIONS = {"hypotheses": set(_HYP_FIELDS), "geometry": GEOMETRY_KEYS, "ladder": LADDER_KEYS,
            "runtime": RUNTIME_KEYS}


def _floats(text: str) -> list:
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigurationError(f"expected a list of numbers, got {text!r}") from exc


def _float(text: str, key: str) -> float:
    try:
        return float(text)
    except ValueError as exc:
        raise ConfigurationError(f"{key}: expected a number, got {text!r}") from exc


def _int(text: str, key: str) -> int:
    try:
        return int(text)
    except ValueError as exc:
        raise ConfigurationError(f"{key}: expected an integer, got {text!r}") from exc


@dataclass(frozen=True)
class SpeedSettings:
    lengths: tuple = (10.0, 20.0, 40.0)
    seeds: int = 8
    directions: int = 32
    model: str = "affine"
    h: float = 0.25
    width: float = 16.0


@dataclass(frozen=True)
class RunConfig:
    """Everything a batch run needs, plus the raw text for hashing."""

    hyp: ReactionHypotheses
    experiment: ExperimentConfig
    speed: SpeedSettings
    workers: Optional[int]
    source: str

    @property
    def root_seed(self) -> int:
        return self.experiment.root_seed

    @property
    def config_hash(self) -> str:
        return config_hash(self.source)

    def echo(self) -> dict:
        """Validated values and derived exponents, for logs and manifests."""
        ex = self.experiment
        return {
            "hypotheses": self.hyp.as_dict(),
            "exponents": self.hyp.exponents(),
            "field_certificate": _certificate(self.hyp),
            "body": {"vertices": ex.body.vertices.tolist(), "directions": ex.body.n},
            "ladder": {"eps": list(ex.eps), "seeds": ex.seeds, "T0": ex.T0, "theta": ex.theta,
                       "checkpoints": ex.checkpoints().tolist(), "C0": ex.time_floor_constant, "h": ex.h},
            "speed": dataclasses.asdict(self.speed),
            "runtime": {"root_seed": ex.root_seed, "workers": self.workers,
                        "memory_cap_mb": ex.memory_cap_mb, "field": ex.field_kind},
        }

    def with_root_seed(self, seed: int) -> "RunConfig":
        ex = dataclasses.replace(self.experiment, root_seed=int(seed))
        return dataclasses.replace(self, experiment=ex, source=self.source + f"\n# root_seed override {int(seed)}\n")


def _certificate(hyp: ReactionHypotheses) -> dict:
    lu, lx = lipschitz_u_bound(hyp), lipschitz_x_bound(hyp)
    return {"u_bound": lu, "x_bound": lx, "within_M": bool(lu <= hyp.M and lx <= hyp.M)}


def config_hash(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _hypotheses(sec) -> ReactionHypotheses:
    kw = {}
    for key, raw in sec.items():
        kw[key] = _int(raw, key) if key in _INT_HYP else _float(raw, key)
    for need in ("M", "theta1", "m1", "alpha1"):
        if need not in kw:
            raise ConfigurationError(f"[hypotheses] missing required key {need!r}")
    return ReactionHypotheses(**kw)


def _body(sec, d: int) -> ConvexBody:
    n = _int(sec["directions"], "directions") if "directions" in sec else None
    level = _int(sec["icosphere_level"], "icosphere_level") if "icosphere_level" in sec else None
    E = direction_grid(d, n=n, level=level)
    kind = sec.get("body", "ball")
    if kind == "ball":
        center = _floats(sec["center"]) if "center" in sec else [0.0] * d
        if len(center) != d:
            raise ConfigurationError("center needs d coordinates")
        return ConvexBody.ball(d, _float(sec.get("radius", "1"), "radius"), center, E)
    if kind == "box":
        lo, hi = _floats(sec["lo"]), _floats(sec["hi"])
        if len(lo) != d or len(hi) != d:
            raise ConfigurationError("lo and hi need d coordinates")
        return ConvexBody.box(lo, hi, E)
    if kind == "points":
        pts = np.array(_floats(sec["points"]))
        if pts.size % d:
            raise ConfigurationError("points: coordinate count not a multiple of d")
        return ConvexBody.from_points(pts.reshape(-1, d), E)
    if kind == "csv":
        return ConvexBody.from_csv(sec["csv"])
    raise ConfigurationError(f"unknown body kind {kind!r}")


def parse_text(text: str, base: Optional[Path] = None) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed config: {exc}") from exc
    for name in cp.sections():
        if name not in SECTIONS:
            raise ConfigurationError(f"unknown section [{name}]")
        extra = set(cp[name]) - SECTIONS[name]
        if extra:
            raise ConfigurationError(f"unknown key(s) in [{name}]: {', '.join(sorted(extra))}")
    if "hypotheses" not in cp:
        raise ConfigurationError("missing section [hypotheses]")
    hyp = _hypotheses(cp["hypotheses"])
    geo = dict(cp["geometry"]) if "geometry" in cp else {}
    if "csv" in geo and base is not None and not Path(geo["csv"]).is_absolute():
        geo["csv"] = str(base / geo["csv"])
    body = _body(geo, hyp.d)
    lad = cp["ladder"] if "ladder" in cp else {}
    run = cp["runtime"] if "runtime" in cp else {}

    ex_kw = {}
    if "eps" in lad:
        ex_kw["eps"] = tuple(_floats(lad["eps"]))
    for key in ("T0", "theta", "C0", "h", "mollifier_cap"):
        if key in lad:
            ex_kw[key] = _float(lad[key], key)
    for key, dst in (("seeds", "seeds"), ("checkpoints", "n_checkpoints")):
        if key in lad:
            ex_kw[dst] = _int(lad[key], key)
    if "root_seed" in run:
        ex_kw["root_seed"] = _int(run["root_seed"], "root_seed")
    if "memory_cap_mb" in run:
        ex_kw["memory_cap_mb"] = _float(run["memory_cap_mb"], "memory_cap_mb")
    if "field" in run:
        if run["field"] not in ("random", "homogeneous", "long_range"):
            raise ConfigurationError(f"unknown field kind {run['field']!r}")
        ex_kw["field_kind"] = run["field"]
    if "long_range_n" in run:
        ex_kw["long_range_n"] = _float(run["long_range_n"], "long_range_n")
    experiment = ExperimentConfig(hyp, body, **ex_kw)

    sp_kw = {}
    if "speed_lengths" in lad:
        sp_kw["lengths"] = tuple(_floats(lad["speed_lengths"]))
        if len(sp_kw["lengths"]) < 3:
            raise ConfigurationError("violated invariant: at least three speed_lengths")
    if "speed_seeds" in lad:
        sp_kw["seeds"] = _int(lad["speed_seeds"], "speed_seeds")
    if "speed_directions" in lad:
        sp_kw["directions"] = _int(lad["speed_directions"], "speed_directions")
    if "speed_model" in lad:
        if lad["speed_model"] not in ("affine", "rate"):
            raise ConfigurationError(f"unknown speed_model {lad['speed_model']!r}")
        sp_kw["model"] = lad["speed_model"]
    for key, dst in (("speed_h", "h"), ("speed_width", "width")):
        if key in lad:
            sp_kw[dst] = _float(lad[key], key)
    workers = _int(run["workers"], "workers") if "workers" in run else None
    return RunConfig(hyp, experiment, SpeedSettings(**sp_kw), workers, text)


def parse_config(path) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigurationError(f"config file {p} does not exist")
    return parse_text(p.read_text(), p.parent)


def echo_json(cfg: RunConfig) -> str:
    return json.dumps(cfg.echo(), indent=2, sort_keys=True)
