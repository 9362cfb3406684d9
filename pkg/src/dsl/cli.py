"""Command-line driver: ``dsl <command> --config FILE [--seed U64] [--workers K] [--out DIR]``.

Every command writes ``<command>.csv`` (one row per computed value, see
`recipes.ROW_COLUMNS`), ``summary.json``, ``run.failures.json`` and
``run.meta.json`` into the output directory.  Only ``run.meta.json`` holds
run-dependent data (timestamp, wall time, workers); the other files are a
deterministic function of the config and seed.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import COMMANDS, OPTIMAL, RunConfig, config_hash, load_config, to_ini, with_overrides
from .diagnostics import log_negativity, purity
from .errors import ConfigError, DSLError
from .estimation import (
    build_candidate_model,
    covering_range,
    default_candidates,
    discretize_pdf,
    field_distribution,
    run_experiments,
    sample_counts,
)
from .metrology import fisher_triplet, fit_scaling, optimize_drive, optimize_drive_detuning, partial_trace
from .model import ModelParams, qubit_bloch, steady_state
from .operators import TruncationSpec
from .parallel import derive_seed, pmap
from .phase_space import (
    PhaseSpaceGrid,
    auto_grid,
    auto_grid_2d,
    cfi_heterodyne,
    field_moments,
    homodyne_cfi_of,
    optimize_angle_of,
    solved_field,
    wigner,
)
from .recipes import ROW_COLUMNS, figure_recipes

SCHEMA_VERSION = 1
log = logging.getLogger("dsl")


# ---------------------------------------------------------------- rows


def _row(cfg, chash, N, drive, detuning, subsystem, quantity, value, arg1="", arg2="", residual="", cutoff="",
         seed="", reason=""):
    return {
        "N": N,
        "drive_ratio": drive,
        "detuning_ratio": detuning,
        "subsystem": subsystem,
        "quantity": quantity,
        "arg1": arg1,
        "arg2": arg2,
        "value": value,
        "residual": residual,
        "cutoff_used": cutoff,
        "seed": seed,
        "reason": reason,
        "config_hash": chash,
        "version": __version__,
    }


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "nan" if math.isnan(v) else repr(v)
    return "" if v is None else str(v)


def write_csv(path: Path, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")  # RFC 4180 line endings
    w.writerow(ROW_COLUMNS)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in ROW_COLUMNS])
    path.write_bytes(buf.getvalue().encode("utf-8"))


def _json_default(o):
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    raise TypeError(type(o))


def _clean(obj):
    """Replace NaN/inf by None so the JSON stays standard."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)) and not math.isfinite(float(obj)):
        return None
    return obj


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True, default=_json_default) + "\n")


# ---------------------------------------------------------------- tasks


def _trunc(cfg: RunConfig, N: float) -> TruncationSpec:
    return TruncationSpec(cfg.start_cutoff(N), cfg.tail_tol)


def _failure(task, exc) -> dict:
    return {"task": task, "error": type(exc).__name__, "message": str(exc)}


def _operating_point(cfg: RunConfig, N: float):
    """Resolve 'optimal' drive/detuning for one N; returns (drives, detunings, rows)."""
    chash = config_hash(cfg)
    tr = _trunc(cfg, N)
    base = ModelParams.from_resource(N)
    sub = cfg.optimal_subsystem
    rows = []
    if cfg.detuning == OPTIMAL:
        if cfg.drive == OPTIMAL:
            (dl, dr), q = optimize_drive_detuning(base, tr, sub, cfg.detuning_grid, cfg.drive_grid, cfg.rounds,
                                                  max_cutoff=cfg.max_cutoff)
            rows.append(_row(cfg, chash, N, dr, dl, sub, "drive_opt", dr))
            rows.append(_row(cfg, chash, N, dr, dl, sub, "detuning_opt", dl))
            rows.append(_row(cfg, chash, N, dr, dl, sub, "qfi_opt", q))
            return (dr,), (dl,), rows
        # detuning that is optimal jointly; the sweep then runs over the given drives
        (dl, dr), q = optimize_drive_detuning(base, tr, sub, cfg.detuning_grid, cfg.drive_grid, cfg.rounds,
                                              max_cutoff=cfg.max_cutoff)
        rows.append(_row(cfg, chash, N, dr, dl, sub, "detuning_opt", dl))
        return cfg.drive, (dl,), rows
    if cfg.drive == OPTIMAL:
        drives, dets = [], []
        for dl in cfg.detuning:
            dr, q = optimize_drive(base.with_detuning(dl), tr, sub, cfg.drive_grid, max_cutoff=cfg.max_cutoff)
            rows.append(_row(cfg, chash, N, dr, dl, sub, "drive_opt", dr))
            rows.append(_row(cfg, chash, N, dr, dl, sub, "qfi_opt", q))
            drives.append(dr)
            dets.append(dl)
        return tuple(drives), tuple(dets), rows
    return cfg.drive, cfg.detuning, rows


def _resolve_task(args):
    cfg, N = args
    try:
        drives, dets, rows = _operating_point(cfg, N)
        paired = cfg.drive == OPTIMAL and cfg.detuning != OPTIMAL
        return N, drives, dets, paired, rows, None
    except (DSLError, ValueError) as exc:
        return N, (), (), False, [], _failure({"stage": "operating_point", "N": N}, exc)


def _nan_rows(cfg, chash, N, drive, detuning, reason):
    return [_row(cfg, chash, N, drive, detuning, "", "failed", float("nan"), reason=reason)]


def _eval_point(args):
    """Evaluate one grid point; returns (rows, failure or None)."""
    cfg, index, N, drive, detuning = args
    chash = config_hash(cfg)
    try:
        return _COMMANDS[cfg.command](cfg, chash, index, N, drive, detuning), None
    except (DSLError, ValueError, OverflowError) as exc:
        reason = f"{type(exc).__name__}: {exc}"
        task = {"stage": "point", "index": index, "N": N, "drive_ratio": drive, "detuning_ratio": detuning}
        return _nan_rows(cfg, chash, N, drive, detuning, reason), _failure(task, exc)


def _steady(cfg, N, drive, detuning, derivative=False):
    p = ModelParams.from_resource(N, drive, detuning)
    return p, steady_state(p, _trunc(cfg, N), derivative=derivative, max_cutoff=cfg.max_cutoff)


def _cmd_steady(cfg, chash, index, N, drive, detuning):
    p, res = _steady(cfg, N, drive, detuning)
    rho_f = partial_trace(res.rho, "field")
    mean_a, nbar = field_moments(rho_f)
    sx, sy, sz = qubit_bloch(partial_trace(res.rho, "qubit"))
    common = dict(residual=res.residual, cutoff=res.cutoff_used)
    vals = [
        ("whole", "tail_population", res.tail_population),
        ("whole", "purity", purity(res.rho)),
        ("field", "mean_photons", nbar),
        ("field", "re_a", mean_a.real),
        ("field", "im_a", mean_a.imag),
        ("qubit", "sx", sx),
        ("qubit", "sy", sy),
        ("qubit", "sz", sz),
    ]
    return [_row(cfg, chash, N, drive, detuning, s, q, v, **common) for s, q, v in vals]


def _cmd_qfi(cfg, chash, index, N, drive, detuning):
    p = ModelParams.from_resource(N, drive, detuning)
    q = fisher_triplet(p, _trunc(cfg, N), cfg.max_cutoff)
    common = dict(residual=q["residual"], cutoff=q["cutoff_used"])
    # g = 1, so the scaled QFI g^2 Q equals Q
    return [_row(cfg, chash, N, drive, detuning, s, "qfi", q[s], **common) for s in cfg.subsystems]


def _cmd_bloch(cfg, chash, index, N, drive, detuning):
    p, res = _steady(cfg, N, drive, detuning)
    b = qubit_bloch(partial_trace(res.rho, "qubit"))
    common = dict(residual=res.residual, cutoff=res.cutoff_used)
    return [_row(cfg, chash, N, drive, detuning, "qubit", f"s{c}", v, **common) for c, v in zip("xyz", b)]


def _cmd_diagnostics(cfg, chash, index, N, drive, detuning):
    p, res = _steady(cfg, N, drive, detuning)
    _, nbar = field_moments(partial_trace(res.rho, "field"))
    sx, sy, sz = qubit_bloch(partial_trace(res.rho, "qubit"))
    common = dict(residual=res.residual, cutoff=res.cutoff_used)
    vals = [
        ("whole", "log_negativity", log_negativity(res.rho)),
        ("whole", "purity", purity(res.rho)),
        ("field", "mean_photons", nbar),
        ("qubit", "sx", sx),
        ("qubit", "sy", sy),
        ("qubit", "sz", sz),
    ]
    return [_row(cfg, chash, N, drive, detuning, s, q, v, **common) for s, q, v in vals]


def _cmd_wigner(cfg, chash, index, N, drive, detuning):
    p, res = _steady(cfg, N, drive, detuning)
    rho_f = partial_trace(res.rho, "field")
    points = cfg.points or 101
    grid = PhaseSpaceGrid(-cfg.half_width, cfg.half_width, points) if cfg.half_width else auto_grid(rho_f, points)
    W = wigner(rho_f, grid)
    xs = grid.axis
    common = dict(residual=res.residual, cutoff=res.cutoff_used)
    return [
        _row(cfg, chash, N, drive, detuning, "field", "wigner", W[i, j], arg1=xs[i], arg2=xs[j], **common)
        for i in range(points)
        for j in range(points)
    ]


def _cmd_homodyne(cfg, chash, index, N, drive, detuning):
    p = ModelParams.from_resource(N, drive, detuning)
    tr = _trunc(cfg, N)
    rho_f, drho_f = solved_field(p, tr, cfg.max_cutoff)
    q = fisher_triplet(p, tr, cfg.max_cutoff)
    common = dict(residual=q["residual"], cutoff=q["cutoff_used"])
    x = auto_grid(rho_f, cfg.points or 801).axis
    rows = [
        _row(cfg, chash, N, drive, detuning, "field", "cfi_angle", homodyne_cfi_of(rho_f, drho_f, a, x), arg1=a,
             **common)
        for a in cfg.angles
    ]
    angle, f = optimize_angle_of(rho_f, drho_f, x=x)
    rows += [
        _row(cfg, chash, N, drive, detuning, "field", "angle_opt", angle, **common),
        _row(cfg, chash, N, drive, detuning, "field", "cfi", f, arg1=angle, **common),
        _row(cfg, chash, N, drive, detuning, "field", "ratio", f / q["whole"], **common),
    ]
    return rows


def _cmd_heterodyne(cfg, chash, index, N, drive, detuning):
    p = ModelParams.from_resource(N, drive, detuning)
    tr = _trunc(cfg, N)
    q = fisher_triplet(p, tr, cfg.max_cutoff)
    rho_f, _ = solved_field(p, tr, cfg.max_cutoff)
    grid = auto_grid_2d(rho_f, cfg.points or 201)
    f = cfi_heterodyne(p, tr, grid, max_cutoff=cfg.max_cutoff)
    common = dict(residual=q["residual"], cutoff=q["cutoff_used"])
    return [
        _row(cfg, chash, N, drive, detuning, "field", "cfi", f, **common),
        _row(cfg, chash, N, drive, detuning, "field", "ratio", f / q["whole"], **common),
    ]


def _cmd_bayes(cfg, chash, index, N, drive, detuning):
    p = ModelParams.from_resource(N, drive, detuning)
    tr = _trunc(cfg, N)
    rho_f, drho_f = solved_field(p, tr, cfg.max_cutoff)
    angle, _ = optimize_angle_of(rho_f, drho_f)
    task_seed = derive_seed(cfg.seed, index)
    rows = [_row(cfg, chash, N, drive, detuning, "field", "angle_opt", angle, seed=task_seed)]

    dist = field_distribution(p, tr, angle, cfg.max_cutoff)
    rows += [
        _row(cfg, chash, N, drive, detuning, "field", "pdf", d, arg1=x, arg2=angle)
        for x, d in zip(dist.grid, dist.density)
    ]
    lo, hi = covering_range(dist, cfg.width)
    bins = discretize_pdf(dist, cfg.width, (lo, hi))
    rows += [
        _row(cfg, chash, N, drive, detuning, "field", "bin_prob", pr, arg1=a, arg2=b)
        for a, b, pr in zip(bins.edges[:-1], bins.edges[1:], bins.probs)
    ]
    for k, m in enumerate(cfg.record_shots):
        s = derive_seed(task_seed, k)
        rec = sample_counts(bins, m, s)
        rows += [
            _row(cfg, chash, N, drive, detuning, "field", "count", int(c), arg1=a, arg2=m, seed=s)
            for a, c in zip(rec.edges[:-1], rec.counts)
        ]
    if cfg.experiments:
        cands = default_candidates(p.drive, cfg.candidates, cfg.span)
        model = build_candidate_model(p, tr, angle, cands, width=cfg.width, max_cutoff=cfg.max_cutoff)
        exp_seed = derive_seed(task_seed, 2**32)
        summary = run_experiments(p, tr, cfg.n_experiments, cfg.shots, exp_seed, angle, model,
                                  max_cutoff=cfg.max_cutoff)
        rows += [
            _row(cfg, chash, N, drive, detuning, "field", "estimate", e, arg1=i, arg2=cfg.shots, seed=int(s))
            for i, (e, s) in enumerate(zip(summary.estimates, summary.seeds))
        ]
        rows += [
            _row(cfg, chash, N, drive, detuning, "whole", "q_whole", summary.q_whole),
            _row(cfg, chash, N, drive, detuning, "field", "variance", summary.scaled_variance, arg2=cfg.shots,
                 seed=exp_seed),
            _row(cfg, chash, N, drive, detuning, "field", "variance_stderr", summary.variance_stderr, arg2=cfg.shots),
            _row(cfg, chash, N, drive, detuning, "whole", "qcrb", summary.qcrb, arg2=cfg.shots),
        ]
    return rows


_COMMANDS = {
    "steady": _cmd_steady,
    "qfi-sweep": _cmd_qfi,
    "bloch-sweep": _cmd_bloch,
    "diagnostics": _cmd_diagnostics,
    "wigner": _cmd_wigner,
    "homodyne": _cmd_homodyne,
    "heterodyne": _cmd_heterodyne,
    "bayes": _cmd_bayes,
}


def _optimize_task(args):
    cfg, N, subsystem = args
    c = dataclasses.replace(cfg, optimal_subsystem=subsystem)
    try:
        _, _, rows = _operating_point(c, N)
        return rows, None
    except (DSLError, ValueError) as exc:
        chash = config_hash(cfg)
        reason = f"{type(exc).__name__}: {exc}"
        return ([_row(cfg, chash, N, float("nan"), float("nan"), subsystem, "failed", float("nan"), reason=reason)],
                _failure({"stage": "optimize", "N": N, "subsystem": subsystem}, exc))


# ---------------------------------------------------------------- driver


def execute(cfg: RunConfig) -> tuple[list, list, dict]:
    """Run a config; returns (rows, failures, summary)."""
    chash = config_hash(cfg)
    rows, failures, summary = [], [], {}

    if cfg.command in ("optimize", "scaling"):
        # each subsystem is optimized on its own; 'optimal' tokens select the search mode
        opt_cfg = dataclasses.replace(cfg, drive=OPTIMAL)
        tasks = [(opt_cfg, N, s) for N in cfg.N for s in cfg.subsystems]
        for r, f in pmap(_optimize_task, tasks, cfg.workers):
            rows += r
            if f:
                failures.append(f)
        optima = {}
        for r in rows:
            if r["quantity"] in ("drive_opt", "detuning_opt", "qfi_opt"):
                optima.setdefault(r["subsystem"], {}).setdefault(_fmt(r["N"]), {})[r["quantity"]] = r["value"]
        summary["optima"] = optima
        if cfg.command == "scaling":
            fits = {}
            for s in cfg.subsystems:
                pts = [(float(n), v["qfi_opt"]) for n, v in optima.get(s, {}).items() if "qfi_opt" in v]
                try:
                    fit = fit_scaling(pts, n_min=cfg.fit_n_min)
                except (DSLError, ValueError) as exc:
                    failures.append(_failure({"stage": "fit", "subsystem": s}, exc))
                    fits[s] = None
                    continue
                fits[s] = {"A": fit.A, "B": fit.B, "C": fit.C, "rms_residual": fit.rms_residual,
                           "n_min_used": fit.n_min_used}
                for name in ("A", "B", "C", "rms_residual"):
                    rows.append(_row(cfg, chash, "", "", "", s, "fit", getattr(fit, name), arg1=name,
                                     arg2=fit.n_min_used))
            summary["fits"] = fits
        return rows, failures, summary

    resolved = pmap(_resolve_task, [(cfg, N) for N in cfg.N], cfg.workers)
    points = []
    for N, drives, dets, paired, r, f in resolved:
        rows += r
        if f:
            failures.append(f)
            rows += _nan_rows(cfg, chash, N, float("nan"), float("nan"), f"{f['error']}: {f['message']}")
            continue
        if paired:
            points += [(N, dr, dl) for dr, dl in zip(drives, dets)]
        else:
            points += [(N, dr, dl) for dl in dets for dr in drives]
    tasks = [(cfg, i, N, dr, dl) for i, (N, dr, dl) in enumerate(points)]
    for r, f in pmap(_eval_point, tasks, cfg.workers):
        rows += r
        if f:
            failures.append(f)

    if cfg.command == "bayes":
        summary["bayes"] = {
            _fmt(r["N"]): {q: next((x["value"] for x in rows if x["N"] == r["N"] and x["quantity"] == q), None)
                           for q in ("variance", "variance_stderr", "qcrb", "q_whole", "angle_opt")}
            for r in rows if r["quantity"] == "qcrb"
        }
    if cfg.command == "homodyne":
        summary["homodyne"] = [
            {"N": r["N"], "drive_ratio": r["drive_ratio"], "detuning_ratio": r["detuning_ratio"], "angle_opt": r["value"]}
            for r in rows if r["quantity"] == "angle_opt"
        ]
    opt_rows = [r for r in rows if r["quantity"] in ("drive_opt", "detuning_opt", "qfi_opt")]
    if opt_rows:
        summary["operating_points"] = [
            {"N": r["N"], "subsystem": r["subsystem"], "quantity": r["quantity"], "value": r["value"]} for r in opt_rows
        ]
    return rows, failures, summary


def run(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise ConfigError(f"output directory {out} is not writable")
    t0 = time.time()
    rows, failures, summary = execute(cfg)
    write_csv(out / f"{cfg.command}.csv", rows)
    write_json(out / "summary.json", {
        "schema_version": SCHEMA_VERSION,
        "command": cfg.command,
        "config_hash": config_hash(cfg),
        "version": __version__,
        "seed": cfg.seed,
        "rows": len(rows),
        "failures": len(failures),
        "results": summary,
    })
    write_json(out / "run.failures.json", {"schema_version": SCHEMA_VERSION, "failures": failures})
    write_json(out / "run.meta.json", {
        "schema_version": SCHEMA_VERSION,
        "started": time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime(t0)),
        "wall_seconds": round(time.time() - t0, 3),
        "workers": cfg.workers,
        "python": sys.version.split()[0],
        "config": to_ini(cfg),
    })
    if failures:
        kinds = sorted({f["error"] for f in failures})
        log.error("%d task(s) failed (%s); see %s", len(failures), ", ".join(kinds), out / "run.failures.json")
        return 1
    return 0


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _posint(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("workers must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dsl", description="Steady-state sensing with the driven Jaynes-Cummings model.")
    ap.add_argument("command", choices=COMMANDS + ("recipes",))
    ap.add_argument("--config", help="INI run configuration (see docs/config.md)")
    ap.add_argument("--seed", type=_u64)
    ap.add_argument("--workers", type=_posint)
    ap.add_argument("--out", help="output directory (overrides [run] out)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def _write_recipes(out) -> int:
    recipes = figure_recipes()
    if out is None:
        for name, rec in recipes.items():
            print(f"{name:8s} {rec.config.command:12s} {rec.description}")
        return 0
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    for name, rec in recipes.items():
        (d / f"{name}.ini").write_text(rec.ini())
    print(f"wrote {len(recipes)} recipes to {d}")
    return 0


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "recipes":
        return _write_recipes(args.out)
    if not args.config:
        ap.print_usage(sys.stderr)
        print("dsl: error: --config is required", file=sys.stderr)
        return 2
    try:
        cfg = with_overrides(load_config(args.config), args.seed, args.workers, args.out)
    except (ConfigError, OSError) as exc:
        print(f"dsl: error: {exc}", file=sys.stderr)
        return 2
    if cfg.command != args.command:
        print(f"dsl: error: config is for '{cfg.command}', not '{args.command}'", file=sys.stderr)
        return 2
    try:
        return run(cfg)
    except ConfigError as exc:
        print(f"dsl: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
