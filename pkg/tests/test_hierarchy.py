import math

import numpy as np
import pytest

from srs.hierarchy import (
    BlowUpError,
    MeanFieldParams,
    PairGrid,
    PairState,
    mean_field_rhs,
    pair_rhs,
    solve_mean_field,
    solve_pair,
)
from srs.kernels import FissionKernel, KernelSet, MortalityField, RadialKernel

PARAMS = MeanFieldParams(birth=1.0, death=0.2, comp=0.08)


def logistic_closed_form(t, u0, params):
    # independent oracle: du/dt = r u - A u^2 solved in closed form
    r = params.birth - params.death
    a = params.comp
    if a == 0.0:
        return u0 * math.exp(r * t)
    if u0 == 0.0:
        return 0.0
    return r / (a + (r / u0 - a) * math.exp(-r * t))


def make_kernels(a_amp=0.05, a_range=1.0, m=0.2, beta_amp=0.5, beta_range=1.0):
    comp = None if a_amp == 0 else RadialKernel("tophat", a_range, a_amp, dim=1)
    return KernelSet(comp, MortalityField(m),
                     FissionKernel.delta(RadialKernel("tophat", beta_range, beta_amp, dim=1)))


# -- mean field ----------------------------------------------------------------

def test_rhs_extinction_fixed_point():
    assert mean_field_rhs(0.0, PARAMS) == 0.0


def test_rhs_carrying_capacity_root():
    ustar = PARAMS.carrying_capacity
    assert ustar == pytest.approx(10.0, rel=1e-12)
    assert abs(mean_field_rhs(ustar, PARAMS)) < 1e-12


def test_rhs_arithmetic_example():
    assert mean_field_rhs(5.0, PARAMS) == pytest.approx(2.0, abs=1e-12)


def test_rhs_stability_at_capacity():
    ustar = PARAMS.carrying_capacity
    eps = 1e-7
    slope = (mean_field_rhs(ustar + eps, PARAMS) - mean_field_rhs(ustar - eps, PARAMS)) / (2 * eps)
    assert slope < 0
    assert slope == pytest.approx(-(PARAMS.birth - PARAMS.death), rel=1e-5)


def test_solve_constant_at_capacity():
    ustar = PARAMS.carrying_capacity
    traj = solve_mean_field(ustar, PARAMS, horizon=25.0)
    assert np.max(np.abs(traj.u - ustar)) < 1e-8


def test_solve_matches_logistic_closed_form():
    traj = solve_mean_field(5.0, PARAMS, horizon=30.0, t_eval=np.linspace(0, 30, 61))
    oracle = np.array([logistic_closed_form(t, 5.0, PARAMS) for t in traj.t])
    assert np.max(np.abs(traj.u - oracle)) <= 1e-8


def test_solve_exponential_decay():
    params = MeanFieldParams(birth=0.3, death=0.9, comp=0.0)
    traj = solve_mean_field(4.0, params, horizon=10.0)
    oracle = 4.0 * np.exp(-0.6 * traj.t)
    assert np.max(np.abs(traj.u - oracle) / oracle) <= 1e-8


def test_solve_preserves_sign():
    for u0 in (0.0, 1e-8, 0.3):
        traj = solve_mean_field(u0, PARAMS, horizon=40.0)
        assert np.all(traj.u >= -1e-12)


def test_solve_rejects_bad_inputs():
    with pytest.raises(ValueError):
        solve_mean_field(-1.0, PARAMS, horizon=1.0)
    with pytest.raises(ValueError):
        solve_mean_field(1.0, PARAMS, horizon=0.0)


# -- pair rhs -------------------------------------------------------------------

def test_pair_rhs_all_rates_zero():
    kernels = KernelSet(None, MortalityField(0.0),
                        FissionKernel.delta(RadialKernel("tophat", 1.0, 0.0, dim=1)))
    grid = PairGrid.build(4.0, 0.05)
    state = PairState.poisson(2.0, grid)
    du, dg = pair_rhs(state, kernels)
    assert du == 0.0
    assert np.allclose(dg, 0.0, atol=1e-15)


@pytest.mark.parametrize("closure", ["kirkwood", "factorized"])
def test_pair_density_component_reduces_to_mean_field(closure):
    kernels = make_kernels()
    grid = PairGrid.build(4.0, 0.05)
    params = MeanFieldParams.from_kernels(kernels)
    for u in (0.5, 3.0, 8.0):
        state = PairState.poisson(u, grid)
        du, _ = pair_rhs(state, kernels, closure=closure)
        assert du == pytest.approx(mean_field_rhs(u, params), rel=1e-12, abs=1e-13)


def test_pair_rhs_pure_growth_density():
    kernels = make_kernels(a_amp=0.0, m=0.0)
    grid = PairGrid.build(4.0, 0.05)
    state = PairState.poisson(1.5, grid)
    du, _ = pair_rhs(state, kernels)
    assert du == pytest.approx(kernels.b_total * 1.5, rel=1e-12)


def test_pair_rhs_sibling_excess_at_small_separation():
    # from Poisson data with no competition the pair gain at small separation
    # exceeds the value consistent with g staying u^2: the excess is the
    # sibling creation term 2 beta(x) u
    kernels = make_kernels(a_amp=0.0, m=0.0)
    grid = PairGrid.build(4.0, 0.05)
    u = 1.5
    state = PairState.poisson(u, grid)
    _, dg = pair_rhs(state, kernels)
    consistent = 2.0 * kernels.b_total * u * u
    inside = grid.r < 1.0 - 0.05
    outside = (grid.r > 1.0 + 0.05) & (grid.r < grid.r_max - 0.1)
    assert np.all(dg[inside] > consistent + 1e-6)
    expected_excess = 2.0 * kernels.fission.beta.amplitude * u
    assert np.allclose(dg[inside] - consistent, expected_excess, rtol=1e-9)
    assert np.allclose(dg[outside], consistent, rtol=1e-9)


def test_pair_rhs_validation():
    kernels = make_kernels()
    with pytest.raises(ValueError):
        pair_rhs(PairState.poisson(1.0, PairGrid.build(4.0, 0.2)), kernels)  # h too coarse
    with pytest.raises(ValueError):
        pair_rhs(PairState.poisson(1.0, PairGrid.build(2.0, 0.05)), kernels)  # r_max short
    with pytest.raises(ValueError):
        pair_rhs(PairState.poisson(1.0, PairGrid.build(4.0, 0.05)), kernels, closure="magic")
    two_d = KernelSet(None, MortalityField(0.1),
                      FissionKernel.delta(RadialKernel("tophat", 1.0, 0.5, dim=2)))
    with pytest.raises(NotImplementedError):
        pair_rhs(PairState.poisson(1.0, PairGrid.build(4.0, 0.05)), two_d)
    product = KernelSet(None, MortalityField(0.1),
                        FissionKernel.product(RadialKernel("tophat", 1.0, 0.5, dim=1),
                                              RadialKernel("tophat", 1.0, 0.5, dim=1)))
    with pytest.raises(ValueError):
        pair_rhs(PairState.poisson(1.0, PairGrid.build(4.0, 0.05)), product)


# -- pair solve -----------------------------------------------------------------

def test_solve_pair_zero_kernels_constant():
    kernels = KernelSet(None, MortalityField(0.0),
                        FissionKernel.delta(RadialKernel("tophat", 1.0, 0.0, dim=1)))
    grid = PairGrid.build(4.0, 0.05)
    traj = solve_pair(PairState.poisson(2.0, grid), kernels, horizon=5.0)
    assert np.allclose(traj.u, 2.0, atol=1e-10)
    assert np.allclose(traj.g, 4.0, atol=1e-10)


def test_solve_pair_mean_field_limit_long_range():
    # weak long-range competition: pair correlations stay negligible and the
    # density follows the logistic flow
    kernels = make_kernels(a_amp=0.005, a_range=10.0, m=0.2)  # comp mass 0.1
    grid = PairGrid.build(22.0, 0.05)
    params = MeanFieldParams.from_kernels(kernels)
    t_eval = np.linspace(0.0, 12.0, 13)
    traj = solve_pair(PairState.poisson(1.0, grid), kernels, horizon=12.0, t_eval=t_eval)
    mf = solve_mean_field(1.0, params, horizon=12.0, t_eval=t_eval)
    rel = np.abs(traj.u[1:] - mf.u[1:]) / mf.u[1:]
    assert np.max(rel) < 0.05


def test_solve_pair_boundary_tracks_density_squared():
    kernels = make_kernels()
    grid = PairGrid.build(4.0, 0.05)
    traj = solve_pair(PairState.poisson(1.0, grid), kernels, horizon=10.0)
    assert np.allclose(traj.g[:, -1], traj.u ** 2, rtol=1e-5)


def test_solve_pair_grid_refinement():
    kernels = make_kernels()
    final = {}
    for h in (0.05, 0.025):
        grid = PairGrid.build(4.0, h)
        traj = solve_pair(PairState.poisson(1.0, grid), kernels, horizon=10.0,
                          t_eval=[0.0, 5.0, 10.0])
        final[h] = traj.u[-1]
    assert abs(final[0.05] - final[0.025]) / final[0.025] < 0.01


def test_solve_pair_kirkwood_reaches_plateau():
    kernels = make_kernels()
    grid = PairGrid.build(4.0, 0.05)
    traj = solve_pair(PairState.poisson(1.0, grid), kernels, horizon=40.0,
                      t_eval=np.linspace(0, 40, 41))
    assert traj.u[-1] > 0
    # plateau: relative drift over the last quarter is tiny
    assert abs(traj.u[-1] - traj.u[-10]) / traj.u[-1] < 1e-3


def test_closures_agree_early_then_factorized_destabilises():
    # both closures are exact at Poisson initial data, so they track each
    # other early on; the factorized pair loss (linear in g) cannot drain the
    # sibling source for long and the blow-up guard eventually reports it
    kernels = make_kernels()
    grid = PairGrid.build(4.0, 0.05)
    t_eval = [0.0, 0.25, 0.5, 1.0]
    kirk = solve_pair(PairState.poisson(1.0, grid), kernels, horizon=1.0,
                      t_eval=t_eval, closure="kirkwood")
    fact = solve_pair(PairState.poisson(1.0, grid), kernels, horizon=1.0,
                      t_eval=t_eval, closure="factorized")
    assert np.max(np.abs(kirk.u - fact.u) / kirk.u) < 0.02
    with pytest.raises(BlowUpError):
        solve_pair(PairState.poisson(1.0, grid), kernels, horizon=60.0,
                   closure="factorized")


def test_solve_pair_blow_up_detection():
    beta = RadialKernel("tophat", 1.0, 10.0, dim=1)  # birth rate 20, no death
    kernels = KernelSet(None, MortalityField(0.0), FissionKernel.delta(beta))
    grid = PairGrid.build(2.0, 0.05)
    with pytest.raises(BlowUpError):
        solve_pair(PairState.poisson(1.0, grid), kernels, horizon=2.0)
