"""Command-line experiment runner.

Subcommands: ``simulate`` (replicas -> snapshots.csv + manifest.json),
``observe`` (statistics tables from a run directory), ``hierarchy``
(mean-field and pair-closure trajectories, optionally compared against a
run), and ``full`` (all of the above in one output directory).

Relative output directories resolve under $SRS_OUTPUT_ROOT when set, else
under the current directory.  A fixed config plus seed reproduces every CSV
byte for byte.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, ExperimentConfig, load, parse, validate
from .runner import (
    RunDirError,
    cmd_hierarchy,
    cmd_observe,
    cmd_simulate,
    read_manifest,
)

EXIT_OK = 0
EXIT_ASSERT_FAILED = 1
EXIT_CONFIG = 2
EXIT_RUNDIR = 3


def resolve_out_dir(path_str: str) -> Path:
    path = Path(path_str)
    if path.is_absolute():
        return path
    root = os.environ.get("SRS_OUTPUT_ROOT")
    return (Path(root) / path) if root else (Path.cwd() / path)


def _load_config(path: str) -> ExperimentConfig:
    return load(path)


def _config_for_run_dir(run_dir: Path, override: str | None) -> ExperimentConfig:
    if override is not None:
        return _load_config(override)
    manifest = read_manifest(run_dir)
    cfg = parse(manifest["config"])
    validate(cfg)
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="srs",
        description="Spatial birth-death process: exact simulation, diagnostics, closures.")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run replicas and write snapshots + manifest")
    sim.add_argument("--config", required=True, help="experiment config file")
    sim.add_argument("--seed", type=int, default=None, help="override run.seed")
    sim.add_argument("--jobs", type=int, default=1, help="parallel replica workers")
    sim.add_argument("--force", action="store_true", help="overwrite an existing run dir")
    sim.add_argument("--out", default=None, help="override output.dir")

    obs = sub.add_parser("observe", help="compute statistics tables for a run directory")
    obs.add_argument("--run", required=True, help="run directory (manifest + snapshots)")
    obs.add_argument("--config", default=None, help="override the manifest's config")
    obs.add_argument("--assert-subpoisson", action="store_true",
                     help="exit nonzero unless every sub-Poisson test passes")

    hier = sub.add_parser("hierarchy", help="solve mean-field and pair truncations")
    hier.add_argument("--config", required=True)
    hier.add_argument("--out", default=None, help="override output.dir")
    hier.add_argument("--compare", default=None, help="run directory to compare against")

    full = sub.add_parser("full", help="simulate + observe + hierarchy + compare")
    full.add_argument("--config", required=True)
    full.add_argument("--seed", type=int, default=None)
    full.add_argument("--jobs", type=int, default=1)
    full.add_argument("--force", action="store_true")
    full.add_argument("--assert-subpoisson", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            cfg = _load_config(args.config)
            if args.seed is not None:
                cfg = replace(cfg, seed=args.seed)
            run_dir = resolve_out_dir(args.out or cfg.output_dir)
            cmd_simulate(cfg, run_dir, jobs=args.jobs, force=args.force)
            print(f"simulate: wrote {run_dir}")
            return EXIT_OK

        if args.command == "observe":
            run_dir = Path(args.run)
            cfg = _config_for_run_dir(run_dir, args.config)
            out = cmd_observe(cfg, run_dir)
            print(f"observe: wrote tables in {run_dir}")
            if args.assert_subpoisson and not out.all_subpoisson_pass:
                print("observe: sub-Poisson test FAILED", file=sys.stderr)
                return EXIT_ASSERT_FAILED
            return EXIT_OK

        if args.command == "hierarchy":
            cfg = _load_config(args.config)
            run_dir = resolve_out_dir(args.out or cfg.output_dir)
            compare = Path(args.compare) if args.compare else None
            cmd_hierarchy(cfg, run_dir, compare_dir=compare)
            print(f"hierarchy: wrote trajectories in {run_dir}")
            return EXIT_OK

        # full
        cfg = _load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        run_dir = resolve_out_dir(cfg.output_dir)
        results = cmd_simulate(cfg, run_dir, jobs=args.jobs, force=args.force)
        out = cmd_observe(cfg, run_dir, results=results)
        cmd_hierarchy(cfg, run_dir, compare_dir=run_dir)
        print(f"full: wrote {run_dir}")
        if args.assert_subpoisson and not out.all_subpoisson_pass:
            print("full: sub-Poisson test FAILED", file=sys.stderr)
            return EXIT_ASSERT_FAILED
        return EXIT_OK

    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RunDirError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNDIR


if __name__ == "__main__":
    sys.exit(main())
