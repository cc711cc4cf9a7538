"""Experiment orchestration: replica simulation, CSV emission, manifests.

Replicas get independent rng streams spawned from the master seed, so results
do not depend on worker scheduling; aggregation is ordered by replica id.
CSV bodies are byte-deterministic for a fixed (config, seed): floats are
written in shortest round-trip form and row order is fully determined by the
replica order and the simulator's own bookkeeping order.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from . import __version__
from .config import ConfigError, ExperimentConfig, serialize
from .hierarchy import (
    MeanFieldParams,
    PairGrid,
    PairState,
    solve_mean_field,
    solve_pair,
)
from .observables import (
    Box,
    count_distribution,
    estimate_correlations,
    f_theta,
    generator_on_f_theta,
    kolmogorov_residual,
    ruelle_check,
    snapshots_at,
    stencil_times,
    sub_poisson_test,
    suggest_kappa_grid,
)
from .simulator import RunResult, Snapshot, init_poisson, run

SNAPSHOT_FILE = "snapshots.csv"
MANIFEST_FILE = "manifest.json"


class RunDirError(RuntimeError):
    """Output directory collision without --force."""


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def sha256_of(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def run_id_for(cfg: ExperimentConfig, seed: int) -> str:
    return hashlib.sha256((serialize(cfg) + f"seed={seed}").encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------

def snapshot_schedule(cfg: ExperimentConfig) -> list[float]:
    """Configured snapshot times plus any residual-stencil times."""
    times = set(cfg.snapshots)
    if cfg.residual_times:
        times.update(stencil_times(cfg.residual_times, cfg.residual_h))
    return sorted(times)


def _run_one(cfg: ExperimentConfig, replica: int, child_seed: np.random.SeedSequence,
             schedule: list[float]) -> RunResult:
    geom = cfg.geometry()
    kernels = cfg.kernels()
    rng = np.random.default_rng(child_seed)
    state = init_poisson(cfg.kappa, geom, kernels, rng)
    return run(state, horizon=cfg.horizon, snapshot_times=schedule, replica=replica)


def simulate_replicas(cfg: ExperimentConfig, seed: int | None = None,
                      jobs: int = 1) -> list[RunResult]:
    """All replicas of the configured experiment, deterministically seeded."""
    master = cfg.seed if seed is None else seed
    schedule = snapshot_schedule(cfg)
    children = np.random.SeedSequence(master).spawn(cfg.replicas)
    if jobs == 1 or cfg.replicas == 1:
        return [_run_one(cfg, i, children[i], schedule) for i in range(cfg.replicas)]
    return Parallel(n_jobs=jobs)(
        delayed(_run_one)(cfg, i, children[i], schedule) for i in range(cfg.replicas))


def write_simulation(run_dir: Path, cfg: ExperimentConfig, seed: int,
                     results: list[RunResult], wall_time: float) -> None:
    coords = ["x", "y"][: cfg.dim]
    rows = []
    for res in results:
        for snap in res.snapshots:
            for point in snap.points:
                rows.append([res.replica, snap.time, *point])
    write_csv(run_dir / SNAPSHOT_FILE, ["replica", "time", *coords], rows)

    kernels = cfg.kernels()
    manifest = {
        "run_id": run_id_for(cfg, seed),
        "seed": seed,
        "versions": {"srs": __version__, "numpy": np.__version__},
        "config": serialize(cfg),
        "wall_time_seconds": wall_time,
        "derived": {
            "fission_rate_total": kernels.b_total,
            "competition_integral": kernels.competition_integral,
            "max_kernel_range": kernels.max_range,
        },
        "extinction": {
            "count": sum(1 for r in results if r.extinct),
            "replicas": len(results),
        },
        "replicas": [
            {
                "replica": r.replica,
                "extinct": r.extinct,
                "extinction_time": r.extinction_time,
                "n_deaths": r.n_deaths,
                "n_fissions": r.n_fissions,
                "final_population": r.final_population,
            }
            for r in results
        ],
        "files": {},
    }
    _write_manifest(run_dir, manifest)
    register_files(run_dir, [SNAPSHOT_FILE])


def _write_manifest(run_dir: Path, manifest: dict) -> None:
    with open(run_dir / MANIFEST_FILE, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_manifest(run_dir: Path) -> dict:
    with open(run_dir / MANIFEST_FILE, "r", encoding="utf-8") as fh:
        return json.load(fh)


def register_files(run_dir: Path, names: list[str]) -> None:
    """Record content hashes of output files in the manifest."""
    manifest = read_manifest(run_dir)
    for name in names:
        manifest.setdefault("files", {})[name] = sha256_of(run_dir / name)
    _write_manifest(run_dir, manifest)


def load_runs(run_dir: Path, cfg: ExperimentConfig) -> list[RunResult]:
    """Rebuild per-replica snapshot runs from snapshots.csv plus the manifest."""
    manifest = read_manifest(run_dir)
    info = {entry["replica"]: entry for entry in manifest["replicas"]}
    per_replica: dict[int, dict[float, list[list[float]]]] = {}
    path = run_dir / SNAPSHOT_FILE
    if not path.exists():
        raise FileNotFoundError(f"missing {SNAPSHOT_FILE} in {run_dir}")
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["replica", "time"]:
            raise ValueError(f"unexpected snapshot header {header}")
        for row in reader:
            rep = int(row[0])
            t = float(row[1])
            per_replica.setdefault(rep, {}).setdefault(t, []).append(
                [float(v) for v in row[2:]])
    results = []
    for rep in sorted(info):
        entry = info[rep]
        times = per_replica.get(rep, {})
        snapshots = [
            Snapshot(time=t, points=np.asarray(pts, dtype=float).reshape(-1, cfg.dim),
                     replica=rep)
            for t, pts in sorted(times.items())
        ]
        results.append(RunResult(
            snapshots=snapshots,
            extinct=entry["extinct"],
            extinction_time=entry["extinction_time"],
            n_deaths=entry["n_deaths"],
            n_fissions=entry["n_fissions"],
            final_population=entry["final_population"],
            final_time=cfg.horizon,
            replica=rep,
        ))
    return results


# ---------------------------------------------------------------------------
# Observables pipeline
# ---------------------------------------------------------------------------

@dataclass
class ObserveOutput:
    counts_rows: list
    subpoisson_rows: list
    correlation_rows: list
    timeseries_rows: list
    residual_rows: list
    all_subpoisson_pass: bool


def observe_runs(cfg: ExperimentConfig, results: list[RunResult],
                 run_id: str = "") -> ObserveOutput:
    geom = cfg.geometry()
    kernels = cfg.kernels()
    thetas = cfg.theta_functions()
    edges = np.asarray(cfg.bin_edges)
    windows = [Box(lo=(0.0,) * cfg.dim, hi=(w,) * cfg.dim) for w in cfg.windows]
    mid_window = windows[len(windows) // 2] if windows else None

    counts_rows = []
    sub_rows = []
    corr_rows = []
    ts_rows = []
    all_pass = True
    gen_rng_children = np.random.SeedSequence(cfg.seed ^ 0x5EED0B5).spawn(max(len(cfg.snapshots), 1))

    for j, t in enumerate(cfg.snapshots):
        snaps = snapshots_at(results, t, geom)
        var_to_mean = float("nan")
        for w, box in zip(cfg.windows, windows):
            cd = count_distribution(snaps, box)
            for n in sorted(cd.histogram):
                freq = cd.histogram[n]
                se = float(np.sqrt(freq * (1.0 - freq) / cd.replicas))
                counts_rows.append([t, w, n, freq, se, run_id])
            if cd.replicas >= 2:
                res = sub_poisson_test(cd, suggest_kappa_grid(cd), cfg.confidence)
                sub_rows.append([t, w, res.satisfied, res.kappa_min, res.worst_n,
                                 res.var_to_mean, run_id])
                all_pass = all_pass and res.satisfied
                if mid_window is not None and box is mid_window:
                    var_to_mean = res.var_to_mean

        k1 = kappa_hat = float("nan")
        if len(edges) >= 2:
            ce = estimate_correlations(snaps, edges, geom)
            k1 = ce.k1
            diag = ruelle_check(ce, cfg.ruelle_budget(t))
            kappa_hat = diag.kappa_hat
            for lo, hi, k2, se in zip(edges[:-1], edges[1:], ce.k2, ce.k2_se):
                corr_rows.append([t, lo, hi, k2, se, run_id])

        ftheta_mean = gen_mean = float("nan")
        if thetas:
            theta = thetas[0]
            fvals = np.array([f_theta(s, theta) for s in snaps])
            ftheta_mean = float(fvals.mean())
            rng = np.random.default_rng(gen_rng_children[j])
            gvals = np.array([
                generator_on_f_theta(s, theta, kernels, geom, cfg.mc_samples, rng)[0]
                for s in snaps])
            gen_mean = float(gvals.mean())
        ts_rows.append([t, k1, kappa_hat, var_to_mean, ftheta_mean, gen_mean, run_id])

    residual_rows = []
    if cfg.residual_times and thetas:
        for ti, theta in enumerate(thetas):
            kol = kolmogorov_residual(results, theta, kernels, geom,
                                      cfg.residual_times, cfg.residual_h,
                                      mc_samples=cfg.mc_samples, seed=cfg.seed ^ 0xD1FF)
            for row in kol.rows:
                residual_rows.append([ti, row.t, row.ddt_mean, row.generator_mean,
                                      row.residual, row.residual_se, run_id])

    return ObserveOutput(counts_rows=counts_rows, subpoisson_rows=sub_rows,
                         correlation_rows=corr_rows, timeseries_rows=ts_rows,
                         residual_rows=residual_rows, all_subpoisson_pass=all_pass)


def write_observe(run_dir: Path, out: ObserveOutput) -> list[str]:
    write_csv(run_dir / "counts.csv", ["t", "window", "n", "freq", "se", "run_id"],
              out.counts_rows)
    write_csv(run_dir / "subpoisson.csv",
              ["t", "window", "satisfied", "kappa_min", "worst_n", "var_to_mean", "run_id"],
              out.subpoisson_rows)
    write_csv(run_dir / "correlations.csv", ["t", "r_lo", "r_hi", "k2", "se", "run_id"],
              out.correlation_rows)
    write_csv(run_dir / "timeseries.csv",
              ["t", "k1", "kappa_hat", "var_to_mean", "f_theta_mean", "generator_mean", "run_id"],
              out.timeseries_rows)
    write_csv(run_dir / "residual.csv",
              ["theta", "t", "ddt_mean", "generator_mean", "residual", "se", "run_id"],
              out.residual_rows)
    return ["counts.csv", "subpoisson.csv", "correlations.csv", "timeseries.csv", "residual.csv"]


# ---------------------------------------------------------------------------
# Hierarchy pipeline
# ---------------------------------------------------------------------------

def hierarchy_outputs(cfg: ExperimentConfig, run_id: str = "",
                      sim_results: list[RunResult] | None = None):
    """Mean-field and pair trajectories, optionally compared with a simulation."""
    kernels = cfg.kernels()
    try:
        params = MeanFieldParams.from_kernels(kernels)
    except ValueError as exc:
        raise ConfigError(f"mortality.m: {exc}") from exc
    horizon = cfg.hierarchy_horizon if cfg.hierarchy_horizon is not None else cfg.horizon
    if horizon <= 0:
        raise ConfigError("hierarchy.horizon: must be > 0")
    u0 = cfg.u0 if cfg.u0 is not None else cfg.kappa

    t_dense = np.linspace(0.0, horizon, 201)
    mf = solve_mean_field(u0, params, horizon, t_eval=t_dense)
    mf_rows = [[t, u, run_id] for t, u in zip(mf.t, mf.u)]

    pair_rows = []
    pair_g_rows = []
    pair_traj = None
    if kernels.fission.form == "delta-decomposition" and cfg.dim == 1:
        grid = PairGrid.build(cfg.pair_r_max, cfg.pair_h)
        try:
            pair_traj = solve_pair(PairState.poisson(u0, grid), kernels, horizon,
                                   t_eval=t_dense, closure=cfg.closure)
        except ValueError as exc:
            raise ConfigError(f"hierarchy.h/r_max: {exc}") from exc
        for i, t in enumerate(pair_traj.t):
            pair_rows.append([t, pair_traj.u[i], cfg.closure, run_id])
        stride = max(1, len(pair_traj.t) // 21)
        for i in range(0, len(pair_traj.t), stride):
            for r, g in zip(grid.r, pair_traj.g[i]):
                pair_g_rows.append([pair_traj.t[i], r, g, cfg.closure, run_id])

    comparison_rows = []
    if sim_results is not None and cfg.snapshots:
        geom = cfg.geometry()
        times = [t for t in cfg.snapshots if t <= horizon]
        mf_at = solve_mean_field(u0, params, horizon, t_eval=times)
        pair_at = None
        if pair_traj is not None:
            grid = PairGrid.build(cfg.pair_r_max, cfg.pair_h)
            pair_at = solve_pair(PairState.poisson(u0, grid), kernels, horizon,
                                 t_eval=times, closure=cfg.closure)
        for i, t in enumerate(times):
            snaps = snapshots_at(sim_results, t, geom)
            dens = np.array([s.n_points for s in snaps], dtype=float) / geom.volume
            u_sim = float(dens.mean())
            se = float(dens.std(ddof=1) / np.sqrt(len(dens))) if len(dens) > 1 else 0.0
            u_mf = float(mf_at.u[i])
            row = [t, u_sim, se, u_mf,
                   abs(u_sim - u_mf) / u_sim if u_sim > 0 else float("nan")]
            if pair_at is not None:
                u_pair = float(pair_at.u[i])
                row += [u_pair, abs(u_sim - u_pair) / u_sim if u_sim > 0 else float("nan")]
            else:
                row += [None, None]
            row.append(run_id)
            comparison_rows.append(row)
    return mf_rows, pair_rows, pair_g_rows, comparison_rows


def write_hierarchy(run_dir: Path, rows_tuple) -> list[str]:
    mf_rows, pair_rows, pair_g_rows, comparison_rows = rows_tuple
    write_csv(run_dir / "meanfield.csv", ["t", "u", "run_id"], mf_rows)
    write_csv(run_dir / "pair.csv", ["t", "u", "closure", "run_id"], pair_rows)
    write_csv(run_dir / "pair_g.csv", ["t", "r", "g", "closure", "run_id"], pair_g_rows)
    names = ["meanfield.csv", "pair.csv", "pair_g.csv"]
    if comparison_rows:
        write_csv(run_dir / "comparison.csv",
                  ["t", "u_sim", "u_sim_se", "u_meanfield", "rel_err_meanfield",
                   "u_pair", "rel_err_pair", "run_id"],
                  comparison_rows)
        names.append("comparison.csv")
    return names


# ---------------------------------------------------------------------------
# Command implementations (shared by the CLI and tests)
# ---------------------------------------------------------------------------

def prepare_run_dir(run_dir: Path, force: bool) -> None:
    if run_dir.exists() and any(run_dir.iterdir()):
        if not force:
            raise RunDirError(
                f"output directory {run_dir} already contains files (use --force to overwrite)")
        for item in run_dir.iterdir():
            if item.is_file():
                item.unlink()
    run_dir.mkdir(parents=True, exist_ok=True)


def cmd_simulate(cfg: ExperimentConfig, run_dir: Path, seed: int | None = None,
                 jobs: int = 1, force: bool = False) -> list[RunResult]:
    """Simulate all replicas and write snapshots plus the run manifest."""
    prepare_run_dir(run_dir, force)
    master = cfg.seed if seed is None else seed
    cfg = cfg if master == cfg.seed else replace(cfg, seed=master)
    started = time.perf_counter()
    results = simulate_replicas(cfg, jobs=jobs)
    write_simulation(run_dir, cfg, master, results, wall_time=time.perf_counter() - started)
    return results


def cmd_observe(cfg: ExperimentConfig, run_dir: Path,
                results: list[RunResult] | None = None) -> ObserveOutput:
    """Compute and write all observable tables for an existing run."""
    if results is None:
        results = load_runs(run_dir, cfg)
    manifest = read_manifest(run_dir)
    out = observe_runs(cfg, results, run_id=manifest.get("run_id", ""))
    names = write_observe(run_dir, out)
    register_files(run_dir, names)
    return out


def cmd_hierarchy(cfg: ExperimentConfig, run_dir: Path,
                  compare_dir: Path | None = None) -> None:
    """Solve the truncations and write trajectory (and comparison) tables."""
    run_dir.mkdir(parents=True, exist_ok=True)
    sim_results = None
    run_id = ""
    if compare_dir is not None:
        sim_results = load_runs(compare_dir, cfg)
        run_id = read_manifest(compare_dir).get("run_id", "")
    elif (run_dir / MANIFEST_FILE).exists():
        run_id = read_manifest(run_dir).get("run_id", "")
    rows = hierarchy_outputs(cfg, run_id=run_id, sim_results=sim_results)
    names = write_hierarchy(run_dir, rows)
    if (run_dir / MANIFEST_FILE).exists():
        register_files(run_dir, names)
