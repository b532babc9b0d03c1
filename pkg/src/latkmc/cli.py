"""Command-line experiment drivers.

Subcommands: trajectory | exit-time | hysteresis | equilibrium | bench |
validate.  Every command reads an optional INI config (see config.py),
applies --set overrides and dedicated flags, writes CSV/JSON with a
reproducibility header into the output directory, and prints the JSON
summary path.  Exit codes: 0 success, 1 configuration error, 2 runtime
error, 3 validation failure.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, load_config
from .errors import ConfigurationError
from .io import write_csv, write_json
from .lattice import empty_config
from .observables import (
    GridCoverageObserver,
    TimeAverageObserver,
    exit_time_ensemble,
    hysteresis_loop_area,
    hysteresis_sweep,
    summarize_exit_times,
    _run_indexed,
)
from .potentials import closed_form_coverage, equilibrium_coverage_prediction
from .rates import MICROSCOPIC, TWO_LEVEL_SPLIT, RateModel
from .samplers import RngState, drive, make_sampler
from .validation import run_validation

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2
EXIT_VALIDATION = 3

DEFAULT_OUTPUT_ENV = "LATKMC_OUTPUT_DIR"


def _initial_state(cfg: ExperimentConfig) -> np.ndarray:
    if cfg.kind == "cgmc":
        return np.zeros(cfg.coarse_spec().num_cells, dtype=np.int64)
    return empty_config(cfg.n)


def _outdir(cfg: ExperimentConfig, args) -> Path:
    if args.output is not None:
        return Path(args.output)
    env = os.environ.get(DEFAULT_OUTPUT_ENV)
    if env and cfg.directory == "out":
        return Path(env)
    return Path(cfg.directory)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_trajectory(cfg: ExperimentConfig, outdir: Path, label: str) -> dict:
    model = cfg.rate_model()
    grids = []
    stats_list = []

    def worker(i: int):
        sampler = make_sampler(cfg.kind, model, _initial_state(cfg), **cfg.sampler_options())
        obs = GridCoverageObserver(cfg.t_final, cfg.grid_points, sampler.coverage())
        stats = drive(sampler, RngState(cfg.seed, i).generator(), cfg.t_final, observers=(obs,))
        return obs.grid, obs.finalize(), stats

    results = _run_indexed(worker, cfg.n_replicas, cfg.threads)
    rows = []
    for i, (grid, values, stats) in enumerate(results):
        grids.append(values)
        stats_list.append(stats)
        if cfg.t_final > 0:
            rows.extend((i, t, c) for t, c in zip(grid, values))
    csv_path = write_csv(outdir / f"{label}.csv", ["replica", "t", "coverage"], rows, cfg.echo(), cfg.seed)
    mean_curve = np.mean(grids, axis=0) if (grids and cfg.t_final > 0) else np.array([])
    summary = {
        "command": "trajectory",
        "csv": str(csv_path),
        "n_replicas": cfg.n_replicas,
        "t_grid": results[0][0].tolist() if cfg.t_final > 0 else [],
        "mean_coverage": mean_curve.tolist(),
        "total_events": int(sum(s.n_steps for s in stats_list)),
        "total_null": int(sum(s.n_null for s in stats_list)),
        "absorbed_replicas": int(sum(s.absorbed for s in stats_list)),
    }
    return summary


def cmd_exit_time(cfg: ExperimentConfig, outdir: Path, label: str) -> dict:
    model = cfg.rate_model()
    t0 = time.perf_counter()
    samples, totals = exit_time_ensemble(
        model,
        cfg.kind,
        _initial_state(cfg),
        cfg.threshold,
        cfg.t_final,
        cfg.n_replicas,
        cfg.seed,
        threads=cfg.threads,
        return_stats=True,
        **cfg.sampler_options(),
    )
    wall = time.perf_counter() - t0
    rows = [(i, s.tau, s.censored) for i, s in enumerate(samples)]
    csv_path = write_csv(outdir / f"{label}.csv", ["replica", "tau", "censored"], rows, cfg.echo(), cfg.seed)
    summary = summarize_exit_times(samples)
    summary.update({"command": "exit-time", "csv": str(csv_path), "wall_seconds": wall,
                    "threshold": cfg.threshold, "t_final": cfg.t_final, **totals})
    return summary


def cmd_hysteresis(cfg: ExperimentConfig, outdir: Path, label: str) -> dict:
    h_values = np.linspace(cfg.h_min, cfg.h_max, cfg.n_points)
    points = hysteresis_sweep(
        cfg.potential_spec(),
        cfg.model_variant(),
        cfg.n,
        None if cfg.model_variant() == MICROSCOPIC else cfg.coarse_spec(),
        cfg.kind,
        h_values,
        cfg.t_equil,
        cfg.t_measure,
        RngState(cfg.seed, 0),
        _initial_state(cfg),
        **cfg.sampler_options(),
    )
    rows = [(p.direction, p.h, p.mean_coverage, p.stderr, p.absorbed) for p in points]
    csv_path = write_csv(
        outdir / f"{label}.csv",
        ["direction", "h", "mean_coverage", "stderr", "absorbed"],
        rows,
        cfg.echo(),
        cfg.seed,
    )
    return {
        "command": "hysteresis",
        "csv": str(csv_path),
        "loop_area": hysteresis_loop_area(points),
        "n_points": cfg.n_points,
        "h_range": [cfg.h_min, cfg.h_max],
    }


def cmd_equilibrium(cfg: ExperimentConfig, outdir: Path, label: str) -> dict:
    model = cfg.rate_model()
    sampler = make_sampler(cfg.kind, model, _initial_state(cfg), **cfg.sampler_options())
    gen = RngState(cfg.seed, 0).generator()
    drive(sampler, gen, cfg.burn_in)
    obs = TimeAverageObserver(t_start=sampler.t, initial_coverage=sampler.coverage(),
                              t_end=sampler.t + cfg.t_final)
    drive(sampler, gen, sampler.t + cfg.t_final, observers=(obs,))
    closed = closed_form_coverage(cfg.K, cfg.J, cfg.h, beta=cfg.beta)
    predicted = equilibrium_coverage_prediction(cfg.K, cfg.J, cfg.h, beta=cfg.beta)
    rows = [(obs.mean, obs.stderr)]
    csv_path = write_csv(outdir / f"{label}.csv", ["mean_coverage", "stderr"], rows, cfg.echo(), cfg.seed)
    return {
        "command": "equilibrium",
        "csv": str(csv_path),
        "mean_coverage": obs.mean,
        "stderr": obs.stderr,
        "burn_in": cfg.burn_in,
        "t_measure": cfg.t_final,
        "closed_form_coverage": closed,
        "predicted_equilibrium_coverage": predicted,
    }


def cmd_bench(cfg: ExperimentConfig, outdir: Path, label: str, sizes: list[int], samplers: list[str]) -> dict:
    """Wall-clock of each sampler driven to t_final, per lattice size.

    Timing wraps the sampling loop only; ratios (not absolute seconds) are the
    meaningful output.
    """
    cells = []
    for n in sizes:
        for kind in samplers:
            # q = n in the config means "one coarse cell" at every benched size.
            q = n if cfg.q == cfg.n else cfg.q
            sub = replace(cfg, n=n, q=q, kind=kind)
            sub.validate()
            model = sub.rate_model()
            sampler = make_sampler(kind, model, _initial_state(sub), **sub.sampler_options())
            gen = RngState(cfg.seed, 0).generator()
            t0 = time.perf_counter()
            stats = drive(sampler, gen, cfg.t_final)
            wall = time.perf_counter() - t0
            cells.append(
                {
                    "sampler": kind,
                    "n": n,
                    "wall_seconds": wall,
                    "events": stats.n_steps,
                    "flips": stats.n_flips,
                    "null_fraction": stats.n_null / max(1, stats.n_steps),
                }
            )
    ratios = {}
    for n in sizes:
        by_kind = {c["sampler"]: c["wall_seconds"] for c in cells if c["n"] == n}
        if "null-event" in by_kind and "mlkmc" in by_kind and by_kind["mlkmc"] > 0:
            ratios[str(n)] = by_kind["null-event"] / by_kind["mlkmc"]
    summary = {"command": "bench", "t_final": cfg.t_final, "cells": cells, "speedup_null_over_mlkmc": ratios}
    rows = [(c["sampler"], c["n"], c["wall_seconds"], c["events"], c["flips"], c["null_fraction"]) for c in cells]
    summary["csv"] = str(
        write_csv(outdir / f"{label}.csv",
                  ["sampler", "n", "wall_seconds", "events", "flips", "null_fraction"],
                  rows, cfg.echo(), cfg.seed)
    )
    return summary


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="latkmc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("trajectory", "exit-time", "hysteresis", "equilibrium", "bench", "validate"):
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="INI config file")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="SECTION.KEY=VALUE", help="override a config entry")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--output", default=None, help="output directory")
        p.add_argument("--n-replicas", dest="n_replicas", type=int, default=None)
        p.add_argument("--t-final", dest="t_final", type=float, default=None)
        p.add_argument("--label", default=None, help="basename for output files")
        if name == "bench":
            p.add_argument("--sizes", default="512,1024,2048")
            p.add_argument("--samplers", default="null-event,mlkmc")
        if name == "validate":
            p.add_argument("--level", choices=("fast", "full"), default="fast")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.overrides)
        for flag in ("seed", "threads", "n_replicas", "t_final"):
            val = getattr(args, flag, None)
            if val is not None:
                setattr(cfg, flag, val)
        cfg.validate()
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    outdir = _outdir(cfg, args)
    label = args.label or args.command.replace("-", "_")
    try:
        if args.command == "validate":
            report = run_validation(level=args.level)
            path = write_json(outdir / f"{label}.json", report)
            print(path)
            if not report["all_passed"]:
                failed = [c["name"] for c in report["checks"] if not c["passed"]]
                print("failed checks: " + "; ".join(failed), file=sys.stderr)
                return EXIT_VALIDATION
            return EXIT_OK
        if args.command == "trajectory":
            summary = cmd_trajectory(cfg, outdir, label)
        elif args.command == "exit-time":
            summary = cmd_exit_time(cfg, outdir, label)
        elif args.command == "hysteresis":
            summary = cmd_hysteresis(cfg, outdir, label)
        elif args.command == "equilibrium":
            summary = cmd_equilibrium(cfg, outdir, label)
        elif args.command == "bench":
            sizes = [int(s) for s in args.sizes.split(",") if s]
            samplers = [s.strip() for s in args.samplers.split(",") if s.strip()]
            summary = cmd_bench(cfg, outdir, label, sizes, samplers)
        else:  # pragma: no cover
            raise ConfigurationError(f"unknown command {args.command}")
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # runtime failure
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    summary["seed"] = cfg.seed
    path = write_json(outdir / f"{label}.json", summary)
    print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
