"""Parametric interaction kernels for the spatial birth-death model.

All kernels are nonnegative radial functions with bounded support, drawn
from a small family (tophat, triangle, truncated-bell) whose integrals are
closed-form in one and two dimensions and whose normalised densities are
cheap to sample.  The fission mechanism is represented either in the
delta-decomposition form (one offspring at the parent position, the other
displaced by the dispersal kernel) or as a product of two displacement
densities.  The delta form is kept symbolic: it is never evaluated as a
numeric density.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

SHAPES = ("tophat", "triangle", "truncated-bell")
FISSION_FORMS = ("delta-decomposition", "product-density")

# Rejection sampling draws in batches; this caps the number of batches
# before the density is declared malformed.
_MAX_REJECTION_ROUNDS = 64


class SamplingError(RuntimeError):
    """Rejection sampling exceeded its iteration cap."""


@dataclass(frozen=True)
class RadialKernel:
    """Radial function  k(x) = amplitude * profile(|x| / range)  with k = 0
    for |x| > range.

    Shapes
    ------
    tophat         : profile = 1 on [0, 1]            (jump at |x| = range)
    triangle       : profile = 1 - u                  (continuous)
    truncated-bell : profile = (1 + cos(pi u)) / 2    (C^1, flat at both ends)
    """

    shape: str
    range_: float
    amplitude: float
    dim: int = 1

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown kernel shape {self.shape!r}; expected one of {SHAPES}")
        if not self.range_ > 0:
            raise ValueError(f"kernel range must be > 0, got {self.range_}")
        if self.amplitude < 0:
            raise ValueError(f"kernel amplitude must be >= 0, got {self.amplitude}")
        if self.dim not in (1, 2):
            raise ValueError(f"supported dimensions are 1 and 2, got {self.dim}")

    # -- evaluation ---------------------------------------------------------

    def profile(self, dist):
        """Kernel value at radial distance(s) ``dist`` (scalar or array)."""
        u = np.asarray(dist, dtype=float) / self.range_
        inside = u <= 1.0
        if self.shape == "tophat":
            vals = np.where(inside, self.amplitude, 0.0)
        elif self.shape == "triangle":
            vals = np.where(inside, self.amplitude * (1.0 - u), 0.0)
        else:  # truncated-bell
            vals = np.where(inside, 0.5 * self.amplitude * (1.0 + np.cos(np.pi * np.minimum(u, 1.0))), 0.0)
        return float(vals) if vals.ndim == 0 else vals

    def evaluate(self, x):
        """Kernel value at displacement(s) ``x``.

        dim 1: scalar or array of signed displacements (elementwise).
        dim 2: a length-2 vector or an (n, 2) array of displacement vectors.
        """
        arr = np.asarray(x, dtype=float)
        if self.dim == 1:
            return self.profile(np.abs(arr))
        if arr.ndim == 1:
            return self.profile(float(np.linalg.norm(arr)))
        return self.profile(np.linalg.norm(arr, axis=-1))

    # -- integrals ----------------------------------------------------------

    def integral(self) -> float:
        """Exact integral over R^dim (closed form for every shape)."""
        c, rho = self.amplitude, self.range_
        if self.dim == 1:
            if self.shape == "tophat":
                return 2.0 * rho * c
            if self.shape == "triangle":
                return rho * c
            return rho * c  # truncated-bell: mean profile over [-rho, rho] is 1/2
        # dim == 2
        if self.shape == "tophat":
            return math.pi * rho * rho * c
        if self.shape == "triangle":
            return math.pi * rho * rho * c / 3.0
        return math.pi * rho * rho * c * (0.5 - 2.0 / math.pi**2)

    def line_integral(self, lo: float, hi: float) -> float:
        """Exact integral of the 1-d cross-section ``k(|s|)`` over [lo, hi].

        Used to turn kernels into cell averages on uniform grids without
        losing mass (the antiderivative is exact per shape).
        """
        return self._antideriv(hi) - self._antideriv(lo)

    def _antideriv(self, s: float) -> float:
        c, rho = self.amplitude, self.range_
        s = min(max(s, -rho), rho)
        if self.shape == "tophat":
            return c * s
        if self.shape == "triangle":
            return c * (s - 0.5 * s * abs(s) / rho)
        return 0.5 * c * (s + (rho / math.pi) * math.sin(math.pi * s / rho))

    # -- sampling -----------------------------------------------------------

    def sample(self, rng: np.random.Generator, size: int = 1) -> np.ndarray:
        """Draw ``size`` displacements from the normalised density k / int k.

        Returns an ``(size, dim)`` array.  Rejection steps are capped; a cap
        hit raises :class:`SamplingError`.
        """
        if self.amplitude <= 0:
            raise SamplingError("cannot sample from a kernel with zero amplitude")
        if self.dim == 1:
            return self._sample_1d(rng, size).reshape(size, 1)
        radii = self._sample_radius_2d(rng, size)
        angles = rng.uniform(0.0, 2.0 * math.pi, size)
        return np.column_stack((radii * np.cos(angles), radii * np.sin(angles)))

    def _sample_1d(self, rng, size):
        rho = self.range_
        if self.shape == "tophat":
            return rng.uniform(-rho, rho, size)
        if self.shape == "triangle":
            mag = rho * np.minimum(rng.random(size), rng.random(size))
            return np.where(rng.random(size) < 0.5, -mag, mag)
        # truncated-bell: rejection from the uniform proposal on [-rho, rho]
        return self._rejection(rng, size, lambda n: rng.uniform(-rho, rho, n),
                               lambda x: 0.5 * (1.0 + np.cos(np.pi * x / rho)))

    def _sample_radius_2d(self, rng, size):
        rho = self.range_
        if self.shape == "tophat":
            return rho * np.sqrt(rng.random(size))
        propose = lambda n: rho * np.sqrt(rng.random(n))  # uniform over the disk
        if self.shape == "triangle":
            accept = lambda r: 1.0 - r / rho
        else:
            accept = lambda r: 0.5 * (1.0 + np.cos(np.pi * r / rho))
        return self._rejection(rng, size, propose, accept)

    @staticmethod
    def _rejection(rng, size, propose, accept_prob):
        out = np.empty(size)
        filled = 0
        for _ in range(_MAX_REJECTION_ROUNDS):
            need = size - filled
            cand = propose(need)
            keep = rng.random(need) < accept_prob(cand)
            k = int(keep.sum())
            out[filled:filled + k] = cand[keep]
            filled += k
            if filled == size:
                return out
        raise SamplingError(f"rejection sampling did not converge after {_MAX_REJECTION_ROUNDS} rounds")

    def sample_one(self, rng: np.random.Generator) -> np.ndarray:
        """Single displacement draw with scalar arithmetic (hot-loop path)."""
        if self.amplitude <= 0:
            raise SamplingError("cannot sample from a kernel with zero amplitude")
        rho = self.range_
        if self.dim == 1:
            if self.shape == "tophat":
                return np.array([rng.uniform(-rho, rho)])
            if self.shape == "triangle":
                mag = rho * min(rng.random(), rng.random())
                return np.array([-mag if rng.random() < 0.5 else mag])
            for _ in range(_MAX_REJECTION_ROUNDS * 8):
                c = rng.uniform(-rho, rho)
                if rng.random() < 0.5 * (1.0 + math.cos(math.pi * c / rho)):
                    return np.array([c])
            raise SamplingError("rejection sampling did not converge")
        if self.shape == "tophat":
            r = rho * math.sqrt(rng.random())
        else:
            accept = ((lambda s: 1.0 - s / rho) if self.shape == "triangle"
                      else (lambda s: 0.5 * (1.0 + math.cos(math.pi * s / rho))))
            for _ in range(_MAX_REJECTION_ROUNDS * 8):
                r = rho * math.sqrt(rng.random())
                if rng.random() < accept(r):
                    break
            else:
                raise SamplingError("rejection sampling did not converge")
        phi = rng.uniform(0.0, 2.0 * math.pi)
        return np.array([r * math.cos(phi), r * math.sin(phi)])


# Role aliases: the competition kernel adds to death rates (units: rate per
# neighbour), the dispersal kernel is the sibling-separation density.
CompetitionKernel = RadialKernel
DispersalKernel = RadialKernel


@dataclass(frozen=True)
class MortalityField:
    """Intrinsic (density-independent) death rate.

    Constant mode stores a single rate; the bounded-function mode is a hook
    for spatially varying mortality and must come with an explicit essential
    infimum ``floor``.
    """

    value: float | Callable[[np.ndarray], np.ndarray] = 0.0
    floor: float | None = None

    def __post_init__(self):
        if self.is_constant:
            if self.value < 0:
                raise ValueError(f"mortality rate must be >= 0, got {self.value}")
            if self.floor is None:
                object.__setattr__(self, "floor", float(self.value))
        elif self.floor is None:
            raise ValueError("bounded-function mortality requires an explicit floor (essential infimum)")

    @property
    def is_constant(self) -> bool:
        return not callable(self.value)

    @property
    def mode(self) -> str:
        return "constant" if self.is_constant else "bounded-function"

    @property
    def m_star(self) -> float:
        return float(self.floor)

    def at(self, points: np.ndarray):
        """Mortality rate at one point (vector) or an (n, d) array of points."""
        if self.is_constant:
            if points.ndim <= 1:
                return float(self.value)
            return np.full(points.shape[0], float(self.value))
        return self.value(points)


@dataclass(frozen=True)
class FissionKernel:
    """Joint law of the two offspring positions relative to the parent.

    delta-decomposition  : one offspring keeps the parent position, the other
                           is displaced by a draw from ``beta`` (Dirac parts
                           kept symbolic, never as a density).
    product-density      : offspring displacements are independent draws from
                           the two ``factors``.
    """

    form: str
    beta: RadialKernel | None = None
    factors: tuple[RadialKernel, RadialKernel] | None = None

    def __post_init__(self):
        if self.form not in FISSION_FORMS:
            raise ValueError(f"unknown fission form {self.form!r}; expected one of {FISSION_FORMS}")
        if self.form == "delta-decomposition":
            if self.beta is None:
                raise ValueError("delta-decomposition form requires a dispersal kernel beta")
        else:
            if self.factors is None or len(self.factors) != 2:
                raise ValueError("product-density form requires exactly two factor kernels")
            if self.factors[0].dim != self.factors[1].dim:
                raise ValueError("product-density factors must share a dimension")

    @classmethod
    def delta(cls, beta: RadialKernel) -> "FissionKernel":
        return cls(form="delta-decomposition", beta=beta)

    @classmethod
    def product(cls, first: RadialKernel, second: RadialKernel) -> "FissionKernel":
        return cls(form="product-density", factors=(first, second))

    @property
    def dim(self) -> int:
        return self.beta.dim if self.form == "delta-decomposition" else self.factors[0].dim

    @property
    def total_rate(self) -> float:
        """Total fission rate per entity: the full integral of the kernel."""
        if self.form == "delta-decomposition":
            return self.beta.integral()
        return self.factors[0].integral() * self.factors[1].integral()

    @property
    def offspring_range(self) -> float:
        """Largest possible displacement of an offspring from its parent."""
        if self.form == "delta-decomposition":
            return self.beta.range_
        return max(self.factors[0].range_, self.factors[1].range_)

    @property
    def separation_range(self) -> float:
        """Largest possible separation between the two offspring."""
        if self.form == "delta-decomposition":
            return self.beta.range_
        return self.factors[0].range_ + self.factors[1].range_


@dataclass(frozen=True)
class DispersalClass:
    """Outcome of the pointwise competition-vs-dispersal comparison."""

    tag: str  # "short" or "long"
    omega: float | None = None  # best uniform ratio a/beta (short only)


@dataclass(frozen=True)
class KernelSet:
    """Model ingredients: competition, intrinsic mortality, fission.

    ``competition=None`` means no competition at all (pure branching).
    """

    competition: RadialKernel | None
    mortality: MortalityField
    fission: FissionKernel

    def __post_init__(self):
        if self.competition is not None and self.competition.dim != self.fission.dim:
            raise ValueError("competition and fission kernels must share a dimension")

    @property
    def dim(self) -> int:
        return self.fission.dim

    @property
    def b_total(self) -> float:
        return self.fission.total_rate

    @property
    def competition_range(self) -> float:
        return 0.0 if self.competition is None else self.competition.range_

    @property
    def competition_integral(self) -> float:
        return 0.0 if self.competition is None else self.competition.integral()

    @property
    def max_range(self) -> float:
        return max(self.competition_range, self.fission.offspring_range)


# ---------------------------------------------------------------------------
# Module operations
# ---------------------------------------------------------------------------

def eval_competition(kernel: RadialKernel, x) -> float:
    """Competition rate increment for a neighbour at displacement ``x``."""
    return float(kernel.evaluate(x))


def competition_integral(kernel: RadialKernel) -> float:
    """Integral of the competition kernel over all displacements."""
    return kernel.integral()


def fission_total_rate(fission: FissionKernel) -> float:
    """Per-entity fission rate (integral of the fission kernel)."""
    return fission.total_rate


def sample_offspring(fission: FissionKernel, x, rng: np.random.Generator):
    """Draw the two offspring positions for a parent at ``x``.

    For the delta-decomposition form exactly one of the returned positions is
    the parent position, bit for bit; a fair coin decides which slot it
    occupies.  Positions are returned unwrapped (callers on a torus wrap).
    """
    parent = np.asarray(x, dtype=float).reshape(-1)
    if fission.form == "delta-decomposition":
        displaced = parent + fission.beta.sample_one(rng)
        if rng.random() < 0.5:
            return parent.copy(), displaced
        return displaced, parent.copy()
    first = parent + fission.factors[0].sample_one(rng)
    second = parent + fission.factors[1].sample_one(rng)
    return first, second


def classify_dispersal(competition: RadialKernel, dispersal: RadialKernel,
                       grid_step: float, tol: float = 1e-9) -> DispersalClass:
    """Decide whether competition dominates dispersal pointwise.

    Probes ``a(x) / beta(x)`` on a regular grid over the dispersal support,
    restricted to probe points where beta exceeds ``tol`` times its maximum.
    Returns the short tag with the minimal ratio when that ratio is positive,
    and the long tag otherwise.
    """
    if grid_step <= 0:
        raise ValueError("grid_step must be > 0")
    for rng_ in (competition.range_, dispersal.range_):
        if 2.0 * rng_ / grid_step < 9:
            raise ValueError(
                f"grid_step {grid_step} too coarse: supports need >= 10 probe points per axis")
    r_probe = dispersal.range_
    axis = np.arange(-r_probe, r_probe + 0.5 * grid_step, grid_step)
    if dispersal.dim == 1:
        points = axis.reshape(-1, 1)
    else:
        gx, gy = np.meshgrid(axis, axis, indexing="ij")
        points = np.column_stack((gx.ravel(), gy.ravel()))
    dist = np.abs(points[:, 0]) if dispersal.dim == 1 else np.linalg.norm(points, axis=1)
    beta_vals = dispersal.profile(dist)
    mask = beta_vals > tol * dispersal.amplitude
    comp_vals = competition.profile(dist[mask])
    ratios = comp_vals / beta_vals[mask]
    omega = float(ratios.min())
    if omega > 0.0:
        return DispersalClass(tag="short", omega=omega)
    return DispersalClass(tag="long", omega=None)
