"""Batch orchestration: manifests, round-trip text output, resumable jobs."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import time
import traceback
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .config import RunConfig
from .errors import ConfigurationError, JobError
from .geometry import SpeedFunction, circle_directions, icosphere
from .harness import _job as homogenize_job
from .harness import experiment_jobs
from .parallel import ordered_imap
from .speeds import FieldSpec, speed_profile

MANIFEST_NAME = "manifest-{command}.json"


# ---------------------------------------------------------------------------
# 17-significant-digit text output
# ---------------------------------------------------------------------------


def fmt(v) -> str:
    """Scalar as text; floats keep 17 significant digits."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "NaN"
        if math.isinf(v):
            return "Infinity" if v > 0 else "-Infinity"
        return format(v, ".17g")
    if v is None:
        return "null"
    return json.dumps(v)


def dumps17(obj) -> str:
    """JSON text with every float written as '.17g'."""
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {dumps17(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(dumps17(v) for v in obj) + "]"
    return fmt(obj)


def write_jsonl(path, header: dict, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps17({"header": header}) + "\n")
        for r in rows:
            fh.write(dumps17(r) + "\n")


def read_jsonl(path):
    """(header, rows) from a file written by write_jsonl."""
    header, rows = {}, []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            if "header" in obj and len(obj) == 1:
                header = obj["header"]
            else:
                rows.append(obj)
    return header, rows


def write_csv(path, header: dict, columns, rows) -> None:
    buf = io.StringIO()
    buf.write("# " + dumps17(header) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow(["" if r.get(c) is None else (fmt(r[c]) if not isinstance(r[c], str) else r[c]) for c in columns])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_csv(path):
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    header = json.loads(lines[0][2:]) if lines and lines[0].startswith("# ") else {}
    body = lines[1:] if header else lines
    return header, list(csv.DictReader(body))


def file_header(cfg_hash: str, kind: str, **extra) -> dict:
    out = {"kind": kind, "config_hash": cfg_hash, "version": __version__}
    out.update(extra)
    return out


# ---------------------------------------------------------------------------
# manifest
# ---------------------------------------------------------------------------


@dataclass
class RunManifest:
    path: Path
    command: str
    config_hash: str
    version: str = __version__
    root_seed: Optional[int] = None
    jobs: dict = dc_field(default_factory=dict)
    complete: bool = False

    @classmethod
    def open(cls, out_dir, command: str, config_hash: str, root_seed=None) -> "RunManifest":
        """Resume the manifest in ``out_dir`` if it belongs to the same config,
        otherwise start a fresh one."""
        path = Path(out_dir) / MANIFEST_NAME.format(command=command)
        if path.is_file():
            raw = json.loads(path.read_text())
            if raw.get("config_hash") == config_hash and raw.get("root_seed") == root_seed:
                return cls(path, command, config_hash, raw.get("version", __version__), root_seed,
                           raw.get("jobs", {}), False)
        return cls(path, command, config_hash, __version__, root_seed)

    def save(self) -> None:
        data = {
            "command": self.command,
            "config_hash": self.config_hash,
            "version": self.version,
            "root_seed": self.root_seed,
            "complete": self.complete,
            "jobs": self.jobs,
        }
        tmp = self.path.with_suffix(".tmp")
        tmp.write_text(json.dumps(data, indent=1, sort_keys=True))
        os.replace(tmp, self.path)

    def is_done(self, job_id: str) -> bool:
        j = self.jobs.get(job_id)
        if not j or j.get("status") != "done":
            return False
        out = j.get("output")
        return out is None or Path(out).is_file()

    def record(self, job_id: str, module: str, params: dict, seed, output, status: str,
               wall_time: float, error: Optional[str] = None) -> None:
        self.jobs[job_id] = {
            "module": module,
            "params": params,
            "seed": seed,
            "output": None if output is None else str(output),
            "status": status,
            "wall_time": wall_time,
            "error": error,
        }

    def orphans(self) -> list:
        """Referenced outputs that are missing."""
        return [k for k, j in self.jobs.items() if j.get("output") and not Path(j["output"]).is_file()]


# ---------------------------------------------------------------------------
# homogenize
# ---------------------------------------------------------------------------


def profile_directions(d: int, n: int) -> np.ndarray:
    if d == 1:
        return np.array([[1.0], [-1.0]])
    if d == 2:
        return circle_directions(n)
    level = 0 if n <= 12 else 1 if n <= 42 else 2
    return icosphere(level)


def _safe_homogenize(job):
    t0 = time.perf_counter()
    try:
        rows = homogenize_job(job)
        return "done", rows, time.perf_counter() - t0
    except Exception as exc:  # reported with the job identity by the caller
        return "failed", f"{type(exc).__name__}: {exc}\n{traceback.format_exc(limit=3)}", time.perf_counter() - t0


def _speed_for(cfg: RunConfig, manifest: RunManifest, out_dir: Path, workers) -> SpeedFunction:
    job_id = "speed-profile"
    out = out_dir / "jobs" / "speed_profile.csv"
    ex = cfg.experiment
    if not manifest.is_done(job_id):
        t0 = time.perf_counter()
        sp = cfg.speed
        E = profile_directions(cfg.hyp.d, sp.directions)
        prof = speed_profile(cfg.hyp, E, sp.lengths, sp.seeds, root_seed=ex.root_seed,
                             spec=FieldSpec(cfg.hyp, ex.field_kind, ex.long_range_n), model=sp.model,
                             h=sp.h, width=sp.width, workers=workers, min_seeds=min(8, sp.seeds))
        rows = [{"direction": " ".join(fmt(v) for v in r["direction"]), "c_hat": r["c_hat"],
                 "stderr": r["stderr"]} for r in prof.rows()]
        write_csv(out, file_header(cfg.config_hash, "speed_profile", c0=prof.c0, c1=prof.c1),
                  ["direction", "c_hat", "stderr"], rows)
        manifest.record(job_id, "front_speed_lab", {"lengths": list(sp.lengths), "seeds": sp.seeds,
                                                     "directions": len(E)},
                        ex.root_seed, out, "done", time.perf_counter() - t0)
        manifest.save()
    _, rows = read_csv(out)
    E = np.array([[float(v) for v in r["direction"].split()] for r in rows])
    c = np.array([float(r["c_hat"]) for r in rows])
    return SpeedFunction(E, c)


def run_homogenize(cfg: RunConfig, out_path, out_dir, *, workers=None, speed: Optional[SpeedFunction] = None,
                   max_jobs: Optional[int] = None) -> Path:
    """Run (or resume) every (ε, seed) job and fold the rows into ``out_path``.

    ``max_jobs`` stops after that many new jobs, leaving the manifest
    incomplete (used to exercise resume).
    """
    out_dir = Path(out_dir)
    (out_dir / "jobs").mkdir(parents=True, exist_ok=True)
    ex = cfg.experiment
    manifest = RunManifest.open(out_dir, "homogenize", cfg.config_hash, ex.root_seed)
    manifest.complete = False
    manifest.save()
    if speed is None:
        speed = _speed_for(cfg, manifest, out_dir, workers)
    speed = speed.resample(ex.body.directions)

    jobs = experiment_jobs(ex)
    # shortest round-trip text keeps names readable and unique
    ids = [f"homogenize:eps={float(e)!r}:seed={s}" for e, s in jobs]
    paths = [out_dir / "jobs" / f"homogenize_eps{float(e)!r}_seed{s}.jsonl" for e, s in jobs]
    pending = [i for i, jid in enumerate(ids) if not manifest.is_done(jid)]
    if max_jobs is not None:
        pending = pending[:max_jobs]
    failures = {}
    work = [(ex, speed, jobs[i][0], jobs[i][1]) for i in pending]
    for i, (status, payload, wall) in zip(pending, ordered_imap(_safe_homogenize, work, workers)):
        e, s = jobs[i]
        params = {"eps": e, "seed_index": s}
        if status == "done":
            write_jsonl(paths[i], file_header(cfg.config_hash, "homogenize_job", eps=e, seed_index=s), payload)
            manifest.record(ids[i], "homogenization_harness", params, payload[0]["seed"], paths[i], "done", wall)
        else:
            failures[ids[i]] = payload.splitlines()[0]
            manifest.record(ids[i], "homogenization_harness", params, None, None, "failed", wall, payload)
        manifest.save()
    if failures:
        raise JobError(failures)
    if not all(manifest.is_done(j) for j in ids):
        return None

    rows = []
    for p in paths:
        rows.extend(read_jsonl(p)[1])
    rows.sort(key=lambda r: (-r["eps"], r["seed_index"], r["t"]))
    out_path = Path(out_path)
    head = file_header(cfg.config_hash, "homogenize_report", hypotheses=cfg.hyp.as_dict(),
                       sigma=cfg.hyp.sigma, theta=ex.theta, T0=ex.T0, C0=ex.time_floor_constant,
                       eps=list(ex.eps), seeds=ex.seeds, root_seed=ex.root_seed,
                       speed_source="measured profile")
    write_jsonl(out_path, head, rows)
    manifest.record("report", "homogenization_harness", {}, ex.root_seed, out_path, "done", 0.0)
    manifest.complete = True
    manifest.save()
    return out_path


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


SUMMARY_COLUMNS = ["kind", "eps", "t", "value", "lo", "hi", "seeds"]


def summarize(header: dict, rows: list, *, bootstrap: int = 1000) -> list:
    from .harness import median_dh_table, rate_fit, success_probability
    from .seeding import derive_rng
    from .errors import EstimationError

    out = []
    for t, by_eps in median_dh_table(rows).items():
        for e, v in by_eps.items():
            out.append({"kind": "median_d_H", "eps": e, "t": t, "value": v})
    sigma = header.get("sigma")
    try:
        fit = rate_fit(rows, bootstrap=bootstrap, rng=derive_rng(header.get("root_seed", 0), "rate-bootstrap", 0))
        out.append({"kind": "sigma_hat", "value": fit.sigma_hat, "lo": fit.ci[0], "hi": fit.ci[1]})
    except EstimationError:
        out.append({"kind": "sigma_hat", "value": math.nan, "lo": math.nan, "hi": math.nan})
    if sigma is not None:
        out.append({"kind": "sigma_predicted", "value": sigma})
    full = []
    for e in sorted({r["eps"] for r in rows}, reverse=True):
        n = len({r["seed_index"] for r in rows if r["eps"] == e})
        try:
            sp = success_probability(rows, e, sigma=sigma, min_seeds=min(10, n))
        except EstimationError:
            continue
        out.append({"kind": "success_frequency", "eps": e, "value": sp["frequency"], "seeds": sp["seeds"]})
        if "asymptotic_bound" in sp:
            out.append({"kind": "asymptotic_bound", "eps": e, "value": sp["asymptotic_bound"]})
        if sp["frequency"] == 1.0:
            full.append(e)
    out.append({"kind": "eps0_empirical", "value": min(full) if full else math.nan})
    return out


def run_report(in_path, out_path, *, bootstrap: int = 1000) -> Path:
    if not Path(in_path).is_file():
        raise ConfigurationError(f"report {in_path} does not exist")
    header, rows = read_jsonl(in_path)
    if not rows:
        raise ConfigurationError(f"{in_path} holds no rows")
    summary = summarize(header, rows, bootstrap=bootstrap)
    head = file_header(header.get("config_hash", ""), "homogenize_summary", source=str(Path(in_path).name))
    write_csv(out_path, head, SUMMARY_COLUMNS, summary)
    return Path(out_path)
