"""Experiment configuration: a diff-able plain-text key-value format.

One file per experiment, dotted section names, ``key = value`` lines, ``#``
comments.  Serialisation is canonical (fixed key order, shortest round-trip
float formatting), so ``parse(serialize(cfg)) == cfg`` and a config file plus
a seed fully determines every primary output.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

import numpy as np

from .kernels import (
    FISSION_FORMS,
    SHAPES,
    FissionKernel,
    KernelSet,
    MortalityField,
    RadialKernel,
)
from .observables import THETA_SHAPES, Box, ThetaFunction
from .simulator import TorusGeometry


class ConfigError(ValueError):
    """Invalid configuration; the message is field-qualified."""


@dataclass(frozen=True)
class ThetaSpec:
    shape: str
    lo: tuple[float, ...]
    hi: tuple[float, ...]
    depth: float

    def build(self) -> ThetaFunction:
        return ThetaFunction(shape=self.shape, support=Box(lo=self.lo, hi=self.hi),
                             depth=self.depth)


@dataclass(frozen=True)
class ExperimentConfig:
    # kernel.a.*: competition (amplitude 0 disables competition entirely)
    a_shape: str = "tophat"
    a_range: float = 1.0
    a_amplitude: float = 0.0
    # kernel.b.* / kernel.beta.*: fission
    b_form: str = "delta-decomposition"
    beta_shape: str = "tophat"
    beta_range: float = 1.0
    beta_amplitude: float = 0.5
    y1_shape: str = "tophat"
    y1_range: float = 1.0
    y1_amplitude: float = 0.0
    y2_shape: str = "tophat"
    y2_range: float = 1.0
    y2_amplitude: float = 0.0
    # mortality.m
    mortality: float = 0.0
    # geometry.* / init.*
    dim: int = 1
    side: float = 100.0
    kappa: float = 1.0
    # schedule.*
    horizon: float = 10.0
    snapshots: tuple[float, ...] = ()
    # run.*
    replicas: int = 1
    seed: int = 0
    # observables.*
    windows: tuple[float, ...] = (1.0, 2.0, 4.0)
    bin_edges: tuple[float, ...] = tuple(np.linspace(0.0, 5.0, 21).tolist())
    confidence: float = 0.9987
    mc_samples: int = 256
    thetas: tuple[ThetaSpec, ...] = ()
    residual_times: tuple[float, ...] = ()
    residual_h: float = 0.05
    ruelle_alpha0: float | None = None
    ruelle_c: float | None = None
    # hierarchy.*
    closure: str = "kirkwood"
    pair_r_max: float = 4.0
    pair_h: float = 0.05
    hierarchy_horizon: float | None = None
    u0: float | None = None
    # output.*
    output_dir: str = "runs/experiment"

    # -- builders -----------------------------------------------------------

    def geometry(self) -> TorusGeometry:
        return TorusGeometry(dim=self.dim, side=self.side)

    def kernels(self) -> KernelSet:
        comp = None
        if self.a_amplitude > 0:
            comp = RadialKernel(self.a_shape, self.a_range, self.a_amplitude, dim=self.dim)
        if self.b_form == "delta-decomposition":
            beta = RadialKernel(self.beta_shape, self.beta_range, self.beta_amplitude, dim=self.dim)
            fission = FissionKernel.delta(beta)
        else:
            fission = FissionKernel.product(
                RadialKernel(self.y1_shape, self.y1_range, self.y1_amplitude, dim=self.dim),
                RadialKernel(self.y2_shape, self.y2_range, self.y2_amplitude, dim=self.dim))
        return KernelSet(competition=comp, mortality=MortalityField(self.mortality),
                         fission=fission)

    def theta_functions(self) -> list[ThetaFunction]:
        return [spec.build() for spec in self.thetas]

    def ruelle_budget(self, t: float) -> float | None:
        if self.ruelle_alpha0 is None:
            return None
        c = self.ruelle_c if self.ruelle_c is not None else 0.0
        return float(np.exp(self.ruelle_alpha0 + c * t))


# Mapping: config-file key -> (dataclass field, value kind)
_KEYMAP: dict[str, tuple[str, str]] = {
    "kernel.a.shape": ("a_shape", "str"),
    "kernel.a.range": ("a_range", "float"),
    "kernel.a.amplitude": ("a_amplitude", "float"),
    "kernel.b.form": ("b_form", "str"),
    "kernel.beta.shape": ("beta_shape", "str"),
    "kernel.beta.range": ("beta_range", "float"),
    "kernel.beta.amplitude": ("beta_amplitude", "float"),
    "kernel.b.y1.shape": ("y1_shape", "str"),
    "kernel.b.y1.range": ("y1_range", "float"),
    "kernel.b.y1.amplitude": ("y1_amplitude", "float"),
    "kernel.b.y2.shape": ("y2_shape", "str"),
    "kernel.b.y2.range": ("y2_range", "float"),
    "kernel.b.y2.amplitude": ("y2_amplitude", "float"),
    "mortality.m": ("mortality", "float"),
    "geometry.d": ("dim", "int"),
    "geometry.L": ("side", "float"),
    "init.kappa": ("kappa", "float"),
    "schedule.horizon": ("horizon", "float"),
    "schedule.snapshots": ("snapshots", "floats"),
    "run.replicas": ("replicas", "int"),
    "run.seed": ("seed", "int"),
    "observables.windows": ("windows", "floats"),
    "observables.bin_edges": ("bin_edges", "floats"),
    "observables.confidence": ("confidence", "float"),
    "observables.mc_samples": ("mc_samples", "int"),
    "observables.residual_times": ("residual_times", "floats"),
    "observables.residual_h": ("residual_h", "float"),
    "observables.ruelle_alpha0": ("ruelle_alpha0", "opt_float"),
    "observables.ruelle_c": ("ruelle_c", "opt_float"),
    "hierarchy.closure": ("closure", "str"),
    "hierarchy.r_max": ("pair_r_max", "float"),
    "hierarchy.h": ("pair_h", "float"),
    "hierarchy.horizon": ("hierarchy_horizon", "opt_float"),
    "hierarchy.u0": ("u0", "opt_float"),
    "output.dir": ("output_dir", "str"),
}
_FIELD_TO_KEY = {f: k for k, (f, _) in _KEYMAP.items()}


def _format_value(value, kind: str) -> str:
    if kind == "floats":
        return ", ".join(repr(float(v)) for v in value)
    if kind in ("float", "opt_float"):
        return repr(float(value))
    return str(value)


def _parse_value(text: str, kind: str, key: str):
    text = text.strip()
    try:
        if kind == "floats":
            if not text:
                return ()
            return tuple(float(tok) for tok in text.split(","))
        if kind in ("float", "opt_float"):
            return float(text)
        if kind == "int":
            return int(text)
        return text
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {text!r} as {kind}") from exc


def serialize(cfg: ExperimentConfig) -> str:
    """Canonical text form; parse(serialize(cfg)) == cfg."""
    lines = []
    for key, (fname, kind) in _KEYMAP.items():
        value = getattr(cfg, fname)
        if value is None:
            continue
        lines.append(f"{key} = {_format_value(value, kind)}")
    for i, spec in enumerate(cfg.thetas):
        lines.append(f"observables.theta.{i}.shape = {spec.shape}")
        lines.append(f"observables.theta.{i}.lo = {', '.join(repr(float(v)) for v in spec.lo)}")
        lines.append(f"observables.theta.{i}.hi = {', '.join(repr(float(v)) for v in spec.hi)}")
        lines.append(f"observables.theta.{i}.depth = {repr(float(spec.depth))}")
    return "\n".join(lines) + "\n"


def parse(text: str) -> ExperimentConfig:
    """Parse the key-value format; unknown keys are errors."""
    values: dict[str, object] = {}
    theta_raw: dict[int, dict[str, str]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key.startswith("observables.theta."):
            parts = key.split(".")
            if len(parts) != 4:
                raise ConfigError(f"{key}: theta keys look like observables.theta.<i>.<field>")
            try:
                idx = int(parts[2])
            except ValueError as exc:
                raise ConfigError(f"{key}: theta index must be an integer") from exc
            theta_raw.setdefault(idx, {})[parts[3]] = val
            continue
        if key not in _KEYMAP:
            raise ConfigError(f"{key}: unknown configuration key")
        fname, kind = _KEYMAP[key]
        values[fname] = _parse_value(val, kind, key)

    thetas = []
    for idx in sorted(theta_raw):
        raw = theta_raw[idx]
        missing = {"shape", "lo", "hi", "depth"} - set(raw)
        if missing:
            raise ConfigError(f"observables.theta.{idx}: missing fields {sorted(missing)}")
        thetas.append(ThetaSpec(
            shape=raw["shape"],
            lo=tuple(float(t) for t in raw["lo"].split(",")),
            hi=tuple(float(t) for t in raw["hi"].split(",")),
            depth=float(raw["depth"]),
        ))
    if thetas:
        values["thetas"] = tuple(thetas)
    return ExperimentConfig(**values)


def load(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        cfg = parse(fh.read())
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    """Raise ConfigError naming the offending field on the first violation."""
    def err(key: str, msg: str):
        raise ConfigError(f"{key}: {msg}")

    if cfg.a_shape not in SHAPES:
        err("kernel.a.shape", f"must be one of {SHAPES}, got {cfg.a_shape!r}")
    if cfg.beta_shape not in SHAPES:
        err("kernel.beta.shape", f"must be one of {SHAPES}, got {cfg.beta_shape!r}")
    if cfg.b_form not in FISSION_FORMS:
        err("kernel.b.form", f"must be one of {FISSION_FORMS}, got {cfg.b_form!r}")
    for key, val in (("kernel.a.range", cfg.a_range), ("kernel.beta.range", cfg.beta_range)):
        if not val > 0:
            err(key, f"must be > 0, got {val}")
    for key, val in (("kernel.a.amplitude", cfg.a_amplitude),
                     ("kernel.beta.amplitude", cfg.beta_amplitude)):
        if val < 0:
            err(key, f"must be >= 0, got {val}")
    if cfg.b_form == "product-density":
        if cfg.y1_amplitude <= 0 or cfg.y2_amplitude <= 0:
            err("kernel.b.y1.amplitude", "product-density form needs positive factor amplitudes")
    elif cfg.beta_amplitude == 0 and cfg.mortality == 0 and cfg.a_amplitude == 0:
        err("kernel.beta.amplitude", "all rates are zero: nothing would ever happen")
    if cfg.mortality < 0:
        err("mortality.m", f"must be >= 0, got {cfg.mortality}")
    if cfg.dim not in (1, 2):
        err("geometry.d", f"must be 1 or 2, got {cfg.dim}")
    if not cfg.side > 0:
        err("geometry.L", f"must be > 0, got {cfg.side}")

    try:
        kernels = cfg.kernels()
    except ValueError as exc:
        raise ConfigError(f"kernel.*: {exc}") from exc
    min_side = 4.0 * kernels.max_range
    if cfg.side < min_side:
        err("geometry.L", f"must be >= 4 * max kernel range = {min_side}, got {cfg.side}")

    if not cfg.kappa > 0:
        err("init.kappa", f"must be > 0, got {cfg.kappa}")
    if cfg.horizon < 0:
        err("schedule.horizon", f"must be >= 0, got {cfg.horizon}")
    snaps = cfg.snapshots
    if any(b < a for a, b in zip(snaps, snaps[1:])):
        err("schedule.snapshots", "must be sorted ascending")
    if snaps and (snaps[0] < 0 or snaps[-1] > cfg.horizon):
        err("schedule.snapshots", f"must lie within [0, horizon={cfg.horizon}]")
    if cfg.replicas < 1:
        err("run.replicas", f"must be >= 1, got {cfg.replicas}")
    if not (0 <= cfg.seed < 2 ** 64):
        err("run.seed", "must fit in an unsigned 64-bit integer")

    for w in cfg.windows:
        if not 0 < w <= cfg.side:
            err("observables.windows", f"window sides must lie in (0, L], got {w}")
    edges = cfg.bin_edges
    if len(edges) >= 2:
        if any(b <= a for a, b in zip(edges, edges[1:])):
            err("observables.bin_edges", "must be strictly increasing")
        if edges[0] < 0 or edges[-1] > cfg.side / 2:
            err("observables.bin_edges", f"must lie within [0, L/2={cfg.side / 2}]")
    if not 0.5 < cfg.confidence < 1.0:
        err("observables.confidence", f"must lie in (0.5, 1), got {cfg.confidence}")
    if cfg.mc_samples < 2:
        err("observables.mc_samples", f"must be >= 2, got {cfg.mc_samples}")
    for i, spec in enumerate(cfg.thetas):
        key = f"observables.theta.{i}"
        if spec.shape not in THETA_SHAPES:
            err(f"{key}.shape", f"must be one of {THETA_SHAPES}, got {spec.shape!r}")
        if not (-1.0 < spec.depth <= 0.0):
            err(f"{key}.depth", f"must lie in (-1, 0], got {spec.depth}")
        if len(spec.lo) != cfg.dim or len(spec.hi) != cfg.dim:
            err(f"{key}.lo", f"support must have dimension {cfg.dim}")
        if any(h <= l for l, h in zip(spec.lo, spec.hi)):
            err(f"{key}.lo", "support needs lo < hi on every axis")
        if any(l < 0 for l in spec.lo) or any(h > cfg.side for h in spec.hi):
            err(f"{key}.lo", f"support must lie within [0, L={cfg.side}]")
    if cfg.residual_times:
        if not cfg.thetas:
            err("observables.residual_times", "residual evaluation needs at least one theta")
        if cfg.residual_h <= 0:
            err("observables.residual_h", f"must be > 0, got {cfg.residual_h}")
        worst = max(t + cfg.residual_h if t - cfg.residual_h >= 0 else t + 2 * cfg.residual_h
                    for t in cfg.residual_times)
        if worst > cfg.horizon:
            err("observables.residual_times", "difference stencils exceed the horizon")
    if cfg.closure not in ("kirkwood", "factorized"):
        err("hierarchy.closure", f"must be kirkwood or factorized, got {cfg.closure!r}")
    if cfg.pair_h <= 0:
        err("hierarchy.h", f"must be > 0, got {cfg.pair_h}")
    if cfg.pair_r_max <= 0:
        err("hierarchy.r_max", f"must be > 0, got {cfg.pair_r_max}")
