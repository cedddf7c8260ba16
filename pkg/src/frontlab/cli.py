"""Command line entry point: ``frontlab <subcommand> ...``."""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import echo_json, parse_config
from .errors import (ConfigurationError, ConstructionError, DomainError, EstimationError, JobError,
                     NumericalError)
from .geometry import ConvexBody, SpeedFunction, hausdorff, theta_set
from .parallel import default_workers
from .reaction import IgnitionField, sample_field
from .runner import (RunManifest, file_header, fmt, profile_directions, read_csv, run_homogenize,
                     run_report, write_csv)
from .solver import Grid, HalfSpace, Stepper, build_front_data, snapshots
from .speeds import FieldSpec, estimate_front_speed, field_seeds


def _vec(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.replace(",", " ").split()])
    except ValueError as exc:
        raise ConfigurationError(f"expected comma separated numbers, got {text!r}") from exc


def parse_lengths(text: str) -> list:
    """``a:b:n`` gives n geometrically spaced lengths from a to b; a plain
    comma list is taken as is."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigurationError("lengths must look like a:b:n")
        a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
        if n < 1 or a <= 0 or b < a:
            raise ConfigurationError("lengths a:b:n needs 0 < a <= b and n >= 1")
        return np.geomspace(a, b, n).tolist()
    return _vec(text).tolist()


def _out(args, name) -> Path:
    p = Path(name)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return p if p.is_absolute() else out_dir / p


def _arg_hash(args) -> str:
    items = {k: v for k, v in vars(args).items() if k != "func"}
    return hashlib.sha256(json.dumps(items, sort_keys=True, default=str).encode()).hexdigest()[:16]


def _load_config(args):
    cfg = parse_config(args.config)
    if args.root_seed is not None:
        cfg = cfg.with_root_seed(args.root_seed)
    return cfg


def _workers(args, cfg=None):
    if args.threads is not None:
        return args.threads
    if cfg is not None and cfg.workers is not None:
        return cfg.workers
    return default_workers()


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_check_config(args) -> int:
    cfg = _load_config(args)
    print(echo_json(cfg))
    return 0


def cmd_sample_field(args) -> int:
    cfg = _load_config(args)
    d = cfg.hyp.d
    lo = _vec(args.lo) if args.lo else -np.full(d, args.half_width)
    hi = _vec(args.hi) if args.hi else np.full(d, args.half_width)
    t0 = time.perf_counter()
    field = sample_field(cfg.hyp, (lo, hi), args.seed)
    out = _out(args, args.out)
    field.save(out, {"config_hash": cfg.config_hash, "version": __version__})
    man = RunManifest.open(args.out_dir, "sample-field", cfg.config_hash, cfg.root_seed)
    man.record(f"sample-field:seed={args.seed}", "reaction_field", {"lo": lo.tolist(), "hi": hi.tolist()},
               args.seed, out, "done", time.perf_counter() - t0)
    man.complete = True
    man.save()
    print(out)
    return 0


def _initial_set(spec: str, d: int):
    kind, _, rest = spec.partition(":")
    parts = rest.split(":") if rest else []
    if kind == "ball":
        r = float(parts[0]) if parts else 1.0
        c = _vec(parts[1]) if len(parts) > 1 else np.zeros(d)
        return ConvexBody.ball(d, r, c)
    if kind == "box":
        return ConvexBody.box(_vec(parts[0]), _vec(parts[1]))
    if kind == "halfspace":
        e = _vec(parts[0]) if parts else np.eye(d)[0]
        e = e / np.linalg.norm(e)
        y = float(parts[1]) if len(parts) > 1 else 0.0
        return HalfSpace(e, y * e)
    if kind == "empty":
        return None
    raise ConfigurationError(f"unknown initial data spec {spec!r} (ball, box, halfspace, empty)")


def cmd_solve(args) -> int:
    field = IgnitionField.load(args.field)
    hyp = field.hyp
    lo = _vec(args.lo) if args.lo else np.asarray(field.box[0]) + 1.0
    hi = _vec(args.hi) if args.hi else np.asarray(field.box[1]) - 1.0
    grid = Grid.box(lo, hi, args.h)
    S = _initial_set(args.init, hyp.d)
    state = build_front_data(S, hyp, grid)
    if args.checkpoint_every <= 0 or args.until <= 0:
        raise ConfigurationError("--until and --checkpoint-every must be positive")
    n = int(np.floor(args.until / args.checkpoint_every + 1e-9))
    times = [args.checkpoint_every * (k + 1) for k in range(n)]
    if not times or times[-1] < args.until - 1e-12:
        times.append(args.until)
    t0 = time.perf_counter()
    states = snapshots(state, field, times, stepper=Stepper(grid, field))
    h = _arg_hash(args)
    man = RunManifest.open(args.out_dir, "solve", h, field.seed)
    extra = {"config_hash": h, "field_seed": field.seed, "version": __version__}
    for k, s in enumerate([state] + states):
        out = _out(args, f"snapshot_{k:04d}.snap")
        s.save(out, extra)
        man.record(f"solve:t={fmt(s.t)}", "front_solver", {"t": s.t, "init": args.init}, field.seed, out, "done",
                   time.perf_counter() - t0)
    man.complete = True
    man.save()
    print(f"{len(states) + 1} snapshots in {args.out_dir}")
    return 0


def cmd_speed(args) -> int:
    cfg = _load_config(args)
    hyp = cfg.hyp
    if args.direction == "grid":
        E = profile_directions(hyp.d, args.n_directions)
    else:
        e = _vec(args.direction)
        if e.size != hyp.d:
            raise ConfigurationError("direction needs d components")
        E = (e / np.linalg.norm(e))[None, :]
    lengths = parse_lengths(args.lengths) if args.lengths else list(cfg.speed.lengths)
    seeds = args.seeds if args.seeds is not None else cfg.speed.seeds
    seed_list = field_seeds(cfg.root_seed, seeds)
    ex = cfg.experiment
    spec = FieldSpec(hyp, ex.field_kind, ex.long_range_n)
    workers = _workers(args, cfg)
    rows = []
    man = RunManifest.open(args.out_dir, "speed", cfg.config_hash, cfg.root_seed)
    t0 = time.perf_counter()
    for e in E:
        est = estimate_front_speed(hyp, e, lengths, seed_list, root_seed=cfg.root_seed, spec=spec,
                                   model=args.model or cfg.speed.model, h=cfg.speed.h, width=cfg.speed.width,
                                   workers=workers, min_seeds=min(8, len(seed_list)))
        dtext = " ".join(fmt(v) for v in e)
        for i, s in enumerate(seed_list):
            for j, l in enumerate(est.lengths):
                rows.append({"direction": dtext, "l": l, "seed": s, "T": est.T[i, j]})
        for j, l in enumerate(est.lengths):
            rows.append({"direction": dtext, "l": l, "seed": "mean", "T": float(est.T[:, j].mean())})
        rows.append({"direction": dtext, "l": "inf", "seed": "slowness", "T": est.T_bar,
                     "c_hat": est.c_hat, "stderr": est.stderr})
    out = _out(args, args.out)
    write_csv(out, file_header(cfg.config_hash, "speed", lengths=lengths, seeds=seeds),
              ["direction", "l", "seed", "T", "c_hat", "stderr"], rows)
    man.record("speed", "front_speed_lab", {"directions": len(E), "lengths": lengths, "seeds": seeds},
               cfg.root_seed, out, "done", time.perf_counter() - t0)
    man.complete = True
    man.save()
    print(out)
    return 0


def _load_speed(text: str, directions) -> SpeedFunction:
    p = Path(text)
    if p.is_file():
        _, rows = read_csv(p)
        E = np.array([[float(v) for v in r["direction"].split()] for r in rows if r.get("c_hat")])
        c = np.array([float(r["c_hat"]) for r in rows if r.get("c_hat")])
        return SpeedFunction(E, c).resample(directions)
    return SpeedFunction.constant(float(text), directions)


def cmd_geometry(args) -> int:
    A = ConvexBody.from_csv(args.body)
    rows = []
    if args.action == "theta":
        c = _load_speed(args.speed, A.directions)
        times = _vec(args.times)
        for t in times:
            th = theta_set(A, c, float(t))
            for k, x in enumerate(th.polyline()):
                rows.append({"t": float(t), "k": k, **{f"x{i}": float(v) for i, v in enumerate(x)}})
        columns = ["t", "k"] + [f"x{i}" for i in range(A.d)]
        if args.save_body:
            theta_set(A, c, float(times[-1])).to_csv(_out(args, args.save_body))
    else:
        B = ConvexBody.from_csv(args.other)
        rows.append({"hausdorff": hausdorff(A, B)})
        for name, body in (("a", A), ("b", B)):
            for k, x in enumerate(body.polyline()):
                rows.append({"body": name, "k": k, **{f"x{i}": float(v) for i, v in enumerate(x)}})
        columns = ["hausdorff", "body", "k"] + [f"x{i}" for i in range(A.d)]
    out = _out(args, args.out)
    write_csv(out, file_header(_arg_hash(args), f"geometry_{args.action}"), columns, rows)
    print(out)
    return 0


def cmd_homogenize(args) -> int:
    cfg = _load_config(args)
    speed = None
    if args.speed:
        speed = _load_speed(args.speed, cfg.experiment.body.directions)
    out = run_homogenize(cfg, _out(args, args.out), args.out_dir, workers=_workers(args, cfg), speed=speed,
                         max_jobs=args.max_jobs)
    if out is None:
        print("stopped with pending jobs; rerun to resume", file=sys.stderr)
        return 3
    print(out)
    return 0


def cmd_report(args) -> int:
    out = run_report(args.in_path, _out(args, args.out), bootstrap=args.bootstrap)
    man = RunManifest.open(args.out_dir, "report", _arg_hash(args), None)
    man.record("report", "homogenization_harness", {"in": str(args.in_path)}, None, out, "done", 0.0)
    man.complete = True
    man.save()
    print(out)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="frontlab", description="Random ignition fronts: solve, measure, homogenize.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--threads", type=int, default=None, help="worker processes (default: $FRONTLAB_WORKERS or 1)")
    p.add_argument("--root-seed", type=int, default=None, help="override the config root seed")
    p.add_argument("--out-dir", default=".", help="directory for outputs and manifests")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("check-config", help="validate a config and print derived exponents")
    s.add_argument("--config", required=True)
    s.set_defaults(func=cmd_check_config)

    s = sub.add_parser("sample-field", help="sample and save a random medium")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--lo", help="lower corner, comma separated")
    s.add_argument("--hi", help="upper corner, comma separated")
    s.add_argument("--half-width", type=float, default=20.0)
    s.set_defaults(func=cmd_sample_field)

    s = sub.add_parser("solve", help="evolve front data in a saved medium and write snapshots")
    s.add_argument("--field", required=True)
    s.add_argument("--init", required=True, help="ball:R[:c] | box:lo:hi | halfspace:e[:y] | empty")
    s.add_argument("--until", type=float, required=True)
    s.add_argument("--checkpoint-every", type=float, required=True)
    s.add_argument("--h", type=float, default=0.25)
    s.add_argument("--lo")
    s.add_argument("--hi")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("speed", help="arrival times and front speed estimates")
    s.add_argument("--config", required=True)
    s.add_argument("--direction", default="grid", help="comma separated vector or 'grid'")
    s.add_argument("--n-directions", type=int, default=32)
    s.add_argument("--lengths", help="a:b:n (geometric) or comma list")
    s.add_argument("--seeds", type=int)
    s.add_argument("--model", choices=["affine", "rate"])
    s.add_argument("--out", default="speeds.csv")
    s.set_defaults(func=cmd_speed)

    s = sub.add_parser("geometry", help="theta-set evolution and Hausdorff comparisons")
    s.add_argument("action", choices=["theta", "hausdorff"])
    s.add_argument("--body", required=True, help="body CSV (directions, support)")
    s.add_argument("--speed", default="1", help="constant speed or a speed CSV")
    s.add_argument("--times", default="0,0.5,1")
    s.add_argument("--other", help="second body CSV for hausdorff")
    s.add_argument("--save-body", help="write the last theta set as a body CSV")
    s.add_argument("--out", default="geometry.csv")
    s.set_defaults(func=cmd_geometry)

    s = sub.add_parser("homogenize", help="run the scaled experiment over the ε ladder")
    s.add_argument("--config", required=True)
    s.add_argument("--out", default="report.jsonl")
    s.add_argument("--speed", help="speed CSV or constant (default: measure a profile)")
    s.add_argument("--max-jobs", type=int, help="stop after this many new jobs")
    s.set_defaults(func=cmd_homogenize)

    s = sub.add_parser("report", help="rate fit and frequency table from a report")
    s.add_argument("--in", dest="in_path", required=True)
    s.add_argument("--out", default="summary.csv")
    s.add_argument("--bootstrap", type=int, default=1000)
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "geometry" and args.action == "hausdorff" and not args.other:
        print("error: geometry hausdorff needs --other", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except JobError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DomainError, NumericalError, EstimationError, ConstructionError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
