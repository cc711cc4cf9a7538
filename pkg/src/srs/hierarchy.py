"""Truncated moment dynamics for the birth-death process with competition.

First-order truncation (mean field): replacing the pair density by the
squared density turns the density equation into the logistic form
``du/dt = (birth - death) u - A u^2`` with A the competition kernel's mass.

Second-order truncation (pair dynamics, delta-form fission, one dimension):
the density equation keeps the exact competition integral over the pair
function, and the pair function gains

  +2 (beta * g)(x)        a new point pairs with a survivor via the parent
  +2 beta(x) u            sibling pairs created at the dispersal separation
  -2 (death + a(x)) g(x)  intrinsic loss and in-pair competition
  -(third-order competition term, closed by Kirkwood or plain factorisation)

All spatial terms are one-dimensional convolutions on a uniform radial grid;
kernels enter as exact cell averages so the discrete masses match the
analytic integrals and the mean-field reduction is exact when g = u^2.
Beyond the grid end the pair function is pinned to u^2 (decay of
correlations), which also supplies the convolution padding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .kernels import KernelSet, RadialKernel

CLOSURES = ("kirkwood", "factorized")


class BlowUpError(RuntimeError):
    """Pair dynamics exceeded the blow-up guard."""

    def __init__(self, time: float, scale: float):
        super().__init__(f"pair dynamics blew up at t={time:.6g} (value scale {scale:.3g})")
        self.time = time
        self.scale = scale


# ---------------------------------------------------------------------------
# Mean field
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MeanFieldParams:
    """Per-entity fission rate, intrinsic death rate, competition mass."""

    birth: float
    death: float
    comp: float

    @property
    def carrying_capacity(self) -> float:
        """Stationary density (birth - death) / comp of the logistic flow."""
        return (self.birth - self.death) / self.comp

    @classmethod
    def from_kernels(cls, kernels: KernelSet) -> "MeanFieldParams":
        if not kernels.mortality.is_constant:
            raise ValueError("mean-field parameters need a constant mortality rate")
        return cls(birth=kernels.b_total, death=kernels.mortality.m_star,
                   comp=kernels.competition_integral)


@dataclass(frozen=True)
class MeanFieldTrajectory:
    t: np.ndarray
    u: np.ndarray

    @property
    def final(self) -> float:
        return float(self.u[-1])


def mean_field_rhs(u: float, params: MeanFieldParams) -> float:
    """Logistic drift: (birth - death) u - comp u^2."""
    return (params.birth - params.death) * u - params.comp * u * u


def solve_mean_field(u0: float, params: MeanFieldParams, horizon: float,
                     t_eval=None, abs_tol: float = 1e-10) -> MeanFieldTrajectory:
    if u0 < 0:
        raise ValueError(f"initial density must be >= 0, got {u0}")
    if horizon <= 0:
        raise ValueError(f"horizon must be > 0, got {horizon}")
    if t_eval is None:
        t_eval = np.linspace(0.0, horizon, 101)
    t_eval = np.asarray(t_eval, dtype=float)
    sol = solve_ivp(lambda _, y: [mean_field_rhs(y[0], params)], (0.0, horizon), [u0],
                    method="DOP853", t_eval=t_eval, rtol=1e-10, atol=abs_tol)
    if not sol.success:
        raise RuntimeError(f"mean-field integration failed: {sol.message}")
    return MeanFieldTrajectory(t=sol.t, u=sol.y[0])


# ---------------------------------------------------------------------------
# Pair dynamics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PairGrid:
    """Uniform radial grid 0, h, ..., n h covering separations up to r_max."""

    h: float
    n: int

    @classmethod
    def build(cls, r_max: float, h: float) -> "PairGrid":
        if h <= 0 or r_max <= 0:
            raise ValueError("grid step and extent must be > 0")
        return cls(h=h, n=int(math.ceil(r_max / h - 1e-12)))

    @property
    def r_max(self) -> float:
        return self.n * self.h

    @property
    def r(self) -> np.ndarray:
        return self.h * np.arange(self.n + 1)


@dataclass
class PairState:
    """Density plus the radial pair function on the grid."""

    u: float
    g: np.ndarray
    grid: PairGrid

    @classmethod
    def poisson(cls, u0: float, grid: PairGrid) -> "PairState":
        return cls(u=u0, g=np.full(grid.n + 1, u0 * u0), grid=grid)


@dataclass(frozen=True)
class PairTrajectory:
    t: np.ndarray
    u: np.ndarray
    g: np.ndarray  # shape (len(t), grid.n + 1)
    grid: PairGrid
    closure: str

    @property
    def final(self) -> PairState:
        return PairState(u=float(self.u[-1]), g=self.g[-1].copy(), grid=self.grid)


def _cell_averages(kernel: RadialKernel, h: float) -> np.ndarray:
    """Kernel cell averages on offsets -K h .. K h; discrete mass is exact."""
    k_max = int(math.ceil(kernel.range_ / h + 0.5))
    offsets = h * np.arange(-k_max, k_max + 1)
    return np.array([kernel.line_integral(o - 0.5 * h, o + 0.5 * h) / h for o in offsets])


class _PairOperator:
    """Precomputed discretisation of the second-order truncation (dim 1)."""

    def __init__(self, kernels: KernelSet, grid: PairGrid, closure: str):
        if closure not in CLOSURES:
            raise ValueError(f"unknown closure {closure!r}; expected one of {CLOSURES}")
        if kernels.fission.form != "delta-decomposition":
            raise ValueError("pair dynamics supports only the delta-decomposition fission form")
        if kernels.dim != 1:
            raise NotImplementedError("pair dynamics is implemented for dimension 1 only")
        if not kernels.mortality.is_constant:
            raise ValueError("pair dynamics needs a constant mortality rate")
        beta = kernels.fission.beta
        comp = kernels.competition
        finest = beta.range_ if comp is None else min(beta.range_, comp.range_)
        if grid.h > finest / 20.0 + 1e-12:
            raise ValueError(
                f"grid step {grid.h} too coarse: need h <= min(kernel ranges)/20 = {finest / 20.0}")
        needed = 2.0 * (beta.range_ + (comp.range_ if comp is not None else 0.0))
        if grid.r_max < needed - 1e-12:
            raise ValueError(
                f"grid extent {grid.r_max} too short: need r_max >= 2 (r + R) = {needed}")

        self.grid = grid
        self.closure = closure
        self.birth = kernels.b_total
        self.death = kernels.mortality.m_star
        self.comp_mass = kernels.competition_integral

        n = grid.n
        self.beta_off = _cell_averages(beta, grid.h)  # offsets -Kb .. Kb
        self.k_beta = (len(self.beta_off) - 1) // 2
        if comp is not None:
            self.a_off = _cell_averages(comp, grid.h)
            self.k_a = (len(self.a_off) - 1) // 2
        else:
            self.a_off = np.zeros(1)
            self.k_a = 0
        self.pad = max(self.k_beta, self.k_a)
        self.beta_grid = np.zeros(n + 1)
        m = min(self.k_beta, n)
        self.beta_grid[:m + 1] = self.beta_off[self.k_beta:self.k_beta + m + 1]
        self.a_grid = np.zeros(n + 1)
        m = min(self.k_a, n)
        self.a_grid[:m + 1] = self.a_off[self.k_a:self.k_a + m + 1]

    def _extend(self, g: np.ndarray, u: float) -> np.ndarray:
        """Even reflection at 0, pinned to u^2 beyond the grid end."""
        pad = self.pad
        left = g[pad:0:-1]
        right = np.full(pad, u * u)
        return np.concatenate((left, g, right))

    def _correlate(self, ext: np.ndarray, weights: np.ndarray, k: int) -> np.ndarray:
        out = np.correlate(ext, weights, mode="valid") * self.grid.h
        start = self.pad - k
        return out[start:start + self.grid.n + 1]

    def rhs(self, u: float, g: np.ndarray):
        """Time derivatives (du, dg) of density and pair function."""
        h = self.grid.h
        a_dot_g = float(np.dot(self.a_off, self._g_at_offsets(g))) * h
        du = (self.birth - self.death) * u - a_dot_g

        ext = self._extend(g, u)
        conv_beta = self._correlate(ext, self.beta_off, self.k_beta)
        gains = 2.0 * (conv_beta + self.beta_grid * u)
        losses = 2.0 * (self.death + self.a_grid) * g
        if self.closure == "kirkwood":
            if u > 1e-12:
                w = self.a_off * self._g_at_offsets(g)
                conv_ag = self._correlate(ext, w, self.k_a)
                third = 2.0 * g / u ** 3 * conv_ag
            else:
                third = np.zeros_like(g)
        else:  # factorized: third order ~ u g(x1 - x2)
            third = 2.0 * self.comp_mass * u * g
        dg = gains - losses - third
        dg[-1] = 2.0 * u * du  # boundary pinned to u^2
        return du, dg

    def _g_at_offsets(self, g: np.ndarray) -> np.ndarray:
        """g(|k h|) for k = -K .. K (even extension, no padding needed: K << n)."""
        k = (len(self.a_off) - 1) // 2 if len(self.a_off) > 1 else 0
        idx = np.abs(np.arange(-k, k + 1))
        return g[idx]


def pair_rhs(state: PairState, kernels: KernelSet, closure: str = "kirkwood"):
    """Time derivative of (u, g) under the second-order truncation."""
    op = _PairOperator(kernels, state.grid, closure)
    return op.rhs(state.u, state.g)


def solve_pair(state0: PairState, kernels: KernelSet, horizon: float, t_eval=None,
               closure: str = "kirkwood", abs_tol: float = 1e-8) -> PairTrajectory:
    """Method-of-lines integration of the pair truncation.

    Aborts with :class:`BlowUpError` when any component exceeds one million
    times the initial scale.
    """
    if horizon <= 0:
        raise ValueError(f"horizon must be > 0, got {horizon}")
    op = _PairOperator(kernels, state0.grid, closure)
    if t_eval is None:
        t_eval = np.linspace(0.0, horizon, 101)
    t_eval = np.asarray(t_eval, dtype=float)

    scale0 = max(abs(state0.u), float(np.max(np.abs(state0.g), initial=0.0)), 1e-9)
    guard = 1e6 * scale0

    def rhs(_, y):
        du, dg = op.rhs(y[0], y[1:])
        return np.concatenate(([du], dg))

    def blow_up(_, y):
        return guard - float(np.max(np.abs(y)))

    blow_up.terminal = True

    y0 = np.concatenate(([state0.u], state0.g))
    sol = solve_ivp(rhs, (0.0, horizon), y0, method="DOP853", t_eval=t_eval,
                    rtol=1e-8, atol=abs_tol, events=blow_up)
    if sol.status == 1:  # terminated by the guard
        raise BlowUpError(float(sol.t_events[0][0]), guard)
    if not sol.success:
        raise RuntimeError(f"pair integration failed: {sol.message}")
    return PairTrajectory(t=sol.t, u=sol.y[0], g=sol.y[1:].T.copy(),
                          grid=state0.grid, closure=closure)
