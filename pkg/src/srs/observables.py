"""Statistics over configuration snapshots.

Window-count distributions against the Poisson reference law, the
sub-Poissonian domination test, density and pair-correlation estimators with
their uniform-bound diagnostic, the bounded product functional
``prod_x (1 + theta(x))`` over a compactly supported well, a direct evaluator
of the process generator applied to that functional, and the forward-equation
residual that compares the empirical time derivative of the functional's mean
against the empirical mean of the generator.

All operations are pure functions of immutable snapshots; Monte Carlo pieces
take caller-owned rngs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.spatial import cKDTree

from .kernels import KernelSet
from .simulator import RunResult, Snapshot, TorusGeometry

THETA_SHAPES = ("tophat-well", "smooth-bump")


def _points_of(obj) -> np.ndarray:
    if isinstance(obj, Snapshot):
        return obj.points
    return np.asarray(obj, dtype=float)


@dataclass(frozen=True)
class Box:
    """Axis-aligned half-open box [lo, hi) inside the torus."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise ValueError("box lo/hi must have equal dimension")
        if any(h < l for l, h in zip(self.lo, self.hi)):
            raise ValueError(f"box needs hi >= lo, got lo={self.lo} hi={self.hi}")

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def volume(self) -> float:
        return float(np.prod([h - l for l, h in zip(self.lo, self.hi)]))

    @property
    def widths(self) -> np.ndarray:
        return np.array(self.hi) - np.array(self.lo)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (np.array(self.hi) + np.array(self.lo))

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        return np.all((pts >= lo) & (pts < hi), axis=1)

    def count(self, points: np.ndarray) -> int:
        if len(points) == 0:
            return 0
        return int(self.contains(points).sum())

    def torus_distance(self, points: np.ndarray, side: float) -> np.ndarray:
        """Minimal-image Euclidean distance from each point to the box."""
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        delta = pts - self.center
        delta -= side * np.round(delta / side)
        per_axis = np.maximum(np.abs(delta) - 0.5 * self.widths, 0.0)
        return np.linalg.norm(per_axis, axis=1)


@dataclass(frozen=True)
class ThetaFunction:
    """Compactly supported test function with values in (-1, 0].

    tophat-well : constant ``depth`` on the support box.
    smooth-bump : ``depth`` times a separable raised-cosine bump, vanishing
                  smoothly at the box boundary.
    """

    shape: str
    support: Box
    depth: float

    def __post_init__(self):
        if self.shape not in THETA_SHAPES:
            raise ValueError(f"unknown theta shape {self.shape!r}; expected one of {THETA_SHAPES}")
        if not (-1.0 < self.depth <= 0.0):
            raise ValueError(f"theta depth must lie in (-1, 0], got {self.depth}")

    @property
    def dim(self) -> int:
        return self.support.dim

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        vals = np.zeros(len(pts))
        if self.depth == 0.0 or self.support.volume == 0.0:
            return vals
        inside = self.support.contains(pts)
        if not inside.any():
            return vals
        if self.shape == "tophat-well":
            vals[inside] = self.depth
            return vals
        u = (pts[inside] - self.support.center) / self.support.widths  # in [-1/2, 1/2)
        vals[inside] = self.depth * np.prod(np.cos(np.pi * u) ** 2, axis=1)
        return vals

    def integral(self) -> float:
        if self.shape == "tophat-well":
            return self.depth * self.support.volume
        return self.depth * self.support.volume / 2.0 ** self.dim


@dataclass(frozen=True)
class CountDistribution:
    """Empirical law of the number of points in a fixed window."""

    window: Box
    volume: float
    histogram: dict[int, float]
    replicas: int

    @property
    def mean(self) -> float:
        return sum(n * p for n, p in self.histogram.items())

    @property
    def variance(self) -> float:
        mu = self.mean
        second = sum(n * n * p for n, p in self.histogram.items())
        pop = second - mu * mu
        if self.replicas > 1:
            pop *= self.replicas / (self.replicas - 1)
        return pop

    @property
    def var_to_mean(self) -> float:
        mu = self.mean
        return self.variance / mu if mu > 0 else float("nan")


@dataclass(frozen=True)
class SubPoissonResult:
    satisfied: bool
    kappa_min: float | None
    worst_n: int | None
    var_to_mean: float
    confidence: float


@dataclass(frozen=True)
class CorrelationEstimate:
    """Density and binned radial pair-density estimates with replica SEs."""

    k1: float
    k1_se: float
    bin_edges: np.ndarray
    k2: np.ndarray
    k2_se: np.ndarray

    @property
    def n_bins(self) -> int:
        return len(self.k2)


@dataclass(frozen=True)
class RuelleDiagnostic:
    """Smallest uniform bound consistent with the first two orders."""

    kappa_hat: float
    satisfied: bool | None
    k1: float
    k2_sup_sqrt: float
    budget: float | None = None


# ---------------------------------------------------------------------------
# Window counts and the sub-Poissonian test
# ---------------------------------------------------------------------------

def count_distribution(snapshots, window: Box) -> CountDistribution:
    """Empirical window-count law across replica snapshots at a fixed time."""
    snaps = list(snapshots)
    if not snaps:
        raise ValueError("count_distribution needs at least one snapshot")
    counts = np.array([window.count(_points_of(s)) for s in snaps])
    hist: dict[int, float] = {}
    for n, c in zip(*np.unique(counts, return_counts=True)):
        hist[int(n)] = float(c) / len(counts)
    return CountDistribution(window=window, volume=window.volume,
                             histogram=hist, replicas=len(counts))


def suggest_kappa_grid(cd: CountDistribution, size: int = 25) -> np.ndarray:
    """Intensity grid spanning [k1, 4 k1] for the domination search."""
    k1 = max(cd.mean / cd.volume, 1e-9) if cd.volume > 0 else 1e-9
    return np.linspace(k1, 4.0 * k1, size)


def sub_poisson_test(cd: CountDistribution, kappa_grid, confidence: float = 0.9987) -> SubPoissonResult:
    """Search the grid for an intensity whose Poisson law dominates the data.

    A grid intensity passes when, for every occupied count n >= 1, the
    empirical frequency does not exceed the Poisson probability by more than
    the one-sided normal quantile of ``confidence`` times its standard error.
    n = 0 is excluded: the empty-count inequality constrains only the void
    probability, which is reported separately via the histogram itself.
    """
    if cd.replicas < 2:
        raise ValueError("sub_poisson_test needs at least two replicas")
    z = float(stats.norm.ppf(confidence))
    ns = np.array(sorted(n for n in cd.histogram if n >= 1), dtype=int)
    vtm = cd.var_to_mean
    if len(ns) == 0:
        return SubPoissonResult(True, float(np.min(kappa_grid)), None, vtm, confidence)
    freqs = np.array([cd.histogram[int(n)] for n in ns])
    ses = np.sqrt(freqs * (1.0 - freqs) / cd.replicas)
    lower = freqs - z * ses

    best_kappa = None
    best_excess = math.inf
    best_n = None
    for kappa in np.sort(np.asarray(kappa_grid, dtype=float)):
        pmf = stats.poisson.pmf(ns, kappa * cd.volume)
        excess = lower - pmf
        worst = float(excess.max())
        if worst <= 0.0:
            return SubPoissonResult(True, float(kappa), None, vtm, confidence)
        if worst < best_excess:
            best_excess = worst
            best_kappa = float(kappa)
            best_n = int(ns[int(np.argmax(excess))])
    return SubPoissonResult(False, None, best_n, vtm, confidence)


# ---------------------------------------------------------------------------
# Correlation estimators and the uniform-bound diagnostic
# ---------------------------------------------------------------------------

def _shell_volumes(edges: np.ndarray, dim: int) -> np.ndarray:
    lo, hi = edges[:-1], edges[1:]
    if dim == 1:
        return 2.0 * (hi - lo)
    return math.pi * (hi ** 2 - lo ** 2)


def _pair_counts(points: np.ndarray, edges: np.ndarray, geom: TorusGeometry) -> np.ndarray:
    """Ordered pairs with minimal-image separation in (lo, hi] per bin.

    Differencing cumulative neighbour counts cancels the zero-distance self
    pairs, so no explicit correction is needed.
    """
    if len(points) < 2:
        return np.zeros(len(edges) - 1)
    tree = cKDTree(points, boxsize=[geom.side] * geom.dim)
    return np.diff(tree.count_neighbors(tree, edges).astype(float))


def estimate_correlations(snapshots, bin_edges, geom: TorusGeometry) -> CorrelationEstimate:
    """Density and radial pair-density estimates from replica snapshots.

    The pair estimator counts ordered pairs at minimal-image separation and
    normalises by volume times the exact shell volume, which is unbiased on
    the torus for separations up to half the side.
    """
    edges = np.asarray(bin_edges, dtype=float)
    if len(edges) < 2 or np.any(np.diff(edges) <= 0):
        raise ValueError("bin_edges must be strictly increasing")
    if edges[0] < 0:
        raise ValueError("bin_edges must be nonnegative")
    if edges[-1] > geom.side / 2.0:
        raise ValueError(f"max bin edge {edges[-1]} exceeds half the torus side {geom.side / 2.0}")
    snaps = list(snapshots)
    if not snaps:
        raise ValueError("estimate_correlations needs at least one snapshot")

    vol = geom.volume
    shells = _shell_volumes(edges, geom.dim)
    k1s = np.empty(len(snaps))
    k2s = np.empty((len(snaps), len(shells)))
    for i, s in enumerate(snaps):
        pts = _points_of(s)
        k1s[i] = len(pts) / vol
        k2s[i] = _pair_counts(pts, edges, geom) / (vol * shells)
    nrep = len(snaps)
    k1 = float(k1s.mean())
    k1_se = float(k1s.std(ddof=1) / math.sqrt(nrep)) if nrep > 1 else 0.0
    k2 = k2s.mean(axis=0)
    k2_se = k2s.std(axis=0, ddof=1) / math.sqrt(nrep) if nrep > 1 else np.zeros_like(k2)
    return CorrelationEstimate(k1=k1, k1_se=k1_se, bin_edges=edges, k2=k2, k2_se=k2_se)


def ruelle_check(ce: CorrelationEstimate, kappa_budget: float | None = None) -> RuelleDiagnostic:
    """Smallest intensity bounding k1 and sqrt(k2) over all bins."""
    k2_sup_sqrt = float(np.sqrt(max(ce.k2.max(initial=0.0), 0.0)))
    kappa_hat = max(ce.k1, k2_sup_sqrt)
    satisfied = None if kappa_budget is None else bool(kappa_hat <= kappa_budget)
    return RuelleDiagnostic(kappa_hat=kappa_hat, satisfied=satisfied,
                            k1=ce.k1, k2_sup_sqrt=k2_sup_sqrt, budget=kappa_budget)


# ---------------------------------------------------------------------------
# Product functional and the generator applied to it
# ---------------------------------------------------------------------------

def f_theta(config, theta: ThetaFunction) -> float:
    """Product of (1 + theta(x)) over the configuration; in (0, 1]."""
    pts = _points_of(config)
    if len(pts) == 0:
        return 1.0
    vals = theta.evaluate(pts)
    nz = vals[vals != 0.0]
    if len(nz) == 0:
        return 1.0
    return float(np.prod(1.0 + nz))


def poisson_f_theta_mean(kappa: float, theta: ThetaFunction) -> float:
    """Mean of the product functional under a homogeneous Poisson state."""
    return math.exp(kappa * theta.integral())


def generator_on_f_theta(config, theta: ThetaFunction, kernels: KernelSet,
                         geom: TorusGeometry, mc_samples: int,
                         rng: np.random.Generator) -> tuple[float, float]:
    """The model generator applied to the product functional, at one configuration.

    The death/competition sum is computed exactly; only points inside the
    support of theta contribute to it.  The fission integral contributes only
    through points within the offspring range of the support; for the
    delta-decomposition kernel the inner bracket collapses to
    ``F * theta(parent + displacement)``, a single expectation over the
    sibling displacement, estimated with ``mc_samples`` draws per point.
    Returns ``(value, monte_carlo_se)``.
    """
    if mc_samples < 2:
        raise ValueError("mc_samples must be >= 2")
    pts = _points_of(config)
    fission = kernels.fission
    if len(pts) == 0:
        return 0.0, 0.0
    tvals = theta.evaluate(pts)
    fval = float(np.prod(1.0 + tvals[tvals != 0.0])) if np.any(tvals != 0.0) else 1.0

    # death and competition: only x with theta(x) != 0 give a nonzero bracket
    total = 0.0
    comp = kernels.competition
    for i in np.nonzero(tvals != 0.0)[0]:
        rate = float(kernels.mortality.at(pts[i]))
        if comp is not None:
            delta = pts - pts[i]
            delta -= geom.side * np.round(delta / geom.side)
            dist = np.abs(delta[:, 0]) if geom.dim == 1 else np.linalg.norm(delta, axis=1)
            dist[i] = comp.range_ + 1.0  # exclude self
            rate += float(comp.profile(dist[dist <= comp.range_]).sum())
        total += rate * fval * (-tvals[i] / (1.0 + tvals[i]))

    # fission: points within the offspring range of the support
    b_total = fission.total_rate
    if b_total == 0.0 or theta.depth == 0.0:
        return total, 0.0
    near = np.nonzero(theta.support.torus_distance(pts, geom.side)
                      <= fission.offspring_range + 1e-12)[0]
    if len(near) == 0:
        return total, 0.0
    var_sum = 0.0
    if fission.form == "delta-decomposition":
        for i in near:
            draws = pts[i] + fission.beta.sample(rng, mc_samples)
            draws = geom.wrap(draws)
            samples = fval * theta.evaluate(draws)
            total += b_total * float(samples.mean())
            var_sum += samples.var(ddof=1) / mc_samples * b_total ** 2
    else:
        for i in near:
            d1 = geom.wrap(pts[i] + fission.factors[0].sample(rng, mc_samples))
            d2 = geom.wrap(pts[i] + fission.factors[1].sample(rng, mc_samples))
            bracket = fval * ((1.0 + theta.evaluate(d1)) * (1.0 + theta.evaluate(d2))
                              / (1.0 + tvals[i]) - 1.0)
            total += b_total * float(bracket.mean())
            var_sum += bracket.var(ddof=1) / mc_samples * b_total ** 2
    return total, math.sqrt(var_sum)


# ---------------------------------------------------------------------------
# Forward-equation residual
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KolmogorovRow:
    t: float
    ddt_mean: float
    generator_mean: float
    residual: float
    residual_se: float

    @property
    def z(self) -> float:
        return self.residual / self.residual_se if self.residual_se > 0 else 0.0


@dataclass(frozen=True)
class KolmogorovResult:
    rows: list[KolmogorovRow]
    h: float

    @property
    def max_abs_residual(self) -> float:
        return max(abs(r.residual) for r in self.rows)

    def consistent_with_zero(self, z_crit: float = 1.96) -> bool:
        return all(abs(r.z) <= z_crit for r in self.rows)


def stencil_times(t_grid, h: float) -> list[float]:
    """Snapshot times required to difference the functional mean at t_grid."""
    times = set()
    for t in t_grid:
        times.add(t)
        if t - h >= 0.0:
            times.update((t - h, t + h))
        else:
            times.update((t + h, t + 2.0 * h))
    return sorted(times)


def _snapshot_map(result: RunResult) -> dict[float, Snapshot]:
    return {round(s.time, 9): s for s in result.snapshots}


def snapshots_at(runs, time: float, geom: TorusGeometry) -> list[Snapshot]:
    """Per-replica snapshots at a common time; extinct runs yield empty ones."""
    key = round(time, 9)
    out = []
    for r in runs:
        smap = _snapshot_map(r)
        if key in smap:
            out.append(smap[key])
        elif r.extinct and r.extinction_time is not None and time >= r.extinction_time - 1e-12:
            out.append(Snapshot(time=time, points=np.zeros((0, geom.dim)), replica=r.replica))
        else:
            raise KeyError(f"replica {r.replica} has no snapshot at t={time}")
    return out


def kolmogorov_residual(runs, theta: ThetaFunction, kernels: KernelSet,
                        geom: TorusGeometry, t_grid, h: float,
                        mc_samples: int = 256, seed: int = 0) -> KolmogorovResult:
    """Residual between the differenced functional mean and the generator mean.

    Per replica, the time derivative of the functional is estimated by a
    second-order difference (central where t - h >= 0, one-sided at the left
    boundary) and paired with a Monte Carlo evaluation of the generator at t;
    the replica mean of the paired difference and its standard error give the
    per-time residual and confidence band.
    """
    runs = list(runs)
    if len(runs) < 2:
        raise ValueError("kolmogorov_residual needs at least two replicas")
    t_grid = list(t_grid)
    children = np.random.SeedSequence(seed).spawn(len(runs))

    rows = []
    n = len(runs)
    diffs = np.empty((n, len(t_grid)))
    gens = np.empty((n, len(t_grid)))
    for i, r in enumerate(runs):
        smap = _snapshot_map(r)
        rng = np.random.default_rng(children[i])

        def value_at(time):
            key = round(time, 9)
            if key in smap:
                return f_theta(smap[key], theta), smap[key]
            if r.extinct and r.extinction_time is not None and time >= r.extinction_time - 1e-12:
                empty = Snapshot(time=time, points=np.zeros((0, geom.dim)), replica=r.replica)
                return 1.0, empty
            raise KeyError(f"replica {r.replica} has no snapshot at t={time}")

        for j, t in enumerate(t_grid):
            f_t, snap_t = value_at(t)
            if t - h >= 0.0:
                f_lo, _ = value_at(t - h)
                f_hi, _ = value_at(t + h)
                diffs[i, j] = (f_hi - f_lo) / (2.0 * h)
            else:
                f1, _ = value_at(t + h)
                f2, _ = value_at(t + 2.0 * h)
                diffs[i, j] = (-3.0 * f_t + 4.0 * f1 - f2) / (2.0 * h)
            gens[i, j], _ = generator_on_f_theta(snap_t, theta, kernels, geom, mc_samples, rng)

    for j, t in enumerate(t_grid):
        paired = diffs[:, j] - gens[:, j]
        se = float(paired.std(ddof=1) / math.sqrt(n))
        rows.append(KolmogorovRow(t=float(t), ddt_mean=float(diffs[:, j].mean()),
                                  generator_mean=float(gens[:, j].mean()),
                                  residual=float(paired.mean()), residual_se=se))
    return KolmogorovResult(rows=rows, h=h)
