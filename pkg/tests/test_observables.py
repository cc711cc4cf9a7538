import math

import numpy as np
import pytest
from scipy import integrate, stats

from srs.kernels import FissionKernel, KernelSet, MortalityField, RadialKernel
from srs.observables import (
    Box,
    ThetaFunction,
    count_distribution,
    estimate_correlations,
    f_theta,
    generator_on_f_theta,
    kolmogorov_residual,
    poisson_f_theta_mean,
    ruelle_check,
    snapshots_at,
    stencil_times,
    sub_poisson_test,
    suggest_kappa_grid,
)
from srs.simulator import Snapshot, TorusGeometry, init_poisson, run


def poisson_snaps(kappa, geom, nrep, seed0=0):
    kernels = KernelSet(None, MortalityField(0.0),
                        FissionKernel.delta(RadialKernel("tophat", 1.0, 0.5, dim=geom.dim)))
    return [Snapshot(0.0, init_poisson(kappa, geom, kernels, s).config.positions(), replica=s)
            for s in range(seed0, seed0 + nrep)]


def clustered_snaps(geom, nrep, seed0=0):
    # Neyman-Scott with fixed cluster size: tight clumps concentrate window
    # counts on multiples of the cluster size, far off any Poisson law
    out = []
    for s in range(nrep):
        rng = np.random.default_rng(seed0 + s)
        nparents = rng.poisson(0.08 * geom.volume)
        parents = rng.uniform(0, geom.side, size=(nparents, geom.dim))
        pts = []
        for p in parents:
            pts.append(np.mod(p + 0.05 * rng.normal(size=(18, geom.dim)), geom.side))
        allpts = np.vstack(pts) if pts else np.zeros((0, geom.dim))
        out.append(Snapshot(0.0, allpts, replica=s))
    return out


# -- boxes / theta ------------------------------------------------------------

def test_box_basics():
    b = Box(lo=(1.0,), hi=(3.0,))
    assert b.volume == 2.0
    assert b.count(np.array([[1.0], [2.9], [3.0], [0.5]])) == 2
    with pytest.raises(ValueError):
        Box(lo=(1.0,), hi=(0.5,))


def test_box_torus_distance():
    b = Box(lo=(2.0,), hi=(4.0,))
    pts = np.array([[3.0], [4.5], [9.5]])
    d = b.torus_distance(pts, side=10.0)
    assert d[0] == 0.0
    assert d[1] == pytest.approx(0.5, abs=1e-12)
    assert d[2] == pytest.approx(2.5, abs=1e-12)  # reaches lo=2 across the seam


def test_theta_validation():
    with pytest.raises(ValueError):
        ThetaFunction("tophat-well", Box((0.0,), (1.0,)), depth=-1.0)
    with pytest.raises(ValueError):
        ThetaFunction("tophat-well", Box((0.0,), (1.0,)), depth=0.1)
    with pytest.raises(ValueError):
        ThetaFunction("spike", Box((0.0,), (1.0,)), depth=-0.5)


def test_theta_ranges_and_integrals():
    well = ThetaFunction("tophat-well", Box((2.0,), (5.0,)), depth=-0.5)
    bump = ThetaFunction("smooth-bump", Box((2.0,), (5.0,)), depth=-0.5)
    xs = np.linspace(0, 10, 2001).reshape(-1, 1)
    for theta in (well, bump):
        vals = theta.evaluate(xs)
        assert np.all(vals <= 0.0) and np.all(vals > -1.0)
        assert np.all(vals[(xs[:, 0] < 2.0) | (xs[:, 0] >= 5.0)] == 0.0)
        quad, _ = integrate.quad(lambda x: theta.evaluate(np.array([[x]]))[0], 2.0, 5.0)
        assert theta.integral() == pytest.approx(quad, abs=1e-9)


# -- count distribution --------------------------------------------------------

def test_count_distribution_poisson_void_probability():
    geom = TorusGeometry(dim=1, side=30.0)
    snaps = poisson_snaps(1.0, geom, 2000)
    cd = count_distribution(snaps, Box((0.0,), (1.0,)))
    freq0 = cd.histogram.get(0, 0.0)
    se = math.sqrt(freq0 * (1 - freq0) / cd.replicas)
    assert abs(freq0 - math.exp(-1.0)) < 3 * se
    assert sum(cd.histogram.values()) == pytest.approx(1.0, abs=1e-12)


def test_count_distribution_deterministic_cases():
    snaps = [Snapshot(0.0, np.array([[5.0]]), replica=i) for i in range(3)]
    cd = count_distribution(snaps, Box((4.0,), (6.0,)))
    assert cd.histogram == {1: 1.0}
    cd0 = count_distribution(snaps, Box((4.0,), (4.0,)))
    assert cd0.histogram == {0: 1.0}
    with pytest.raises(ValueError):
        count_distribution([], Box((0.0,), (1.0,)))


# -- sub-Poisson test ------------------------------------------------------------

def test_sub_poisson_accepts_exact_poisson():
    geom = TorusGeometry(dim=1, side=50.0)
    snaps = poisson_snaps(1.0, geom, 1500)
    cd = count_distribution(snaps, Box((0.0,), (2.0,)))
    res = sub_poisson_test(cd, suggest_kappa_grid(cd))
    assert res.satisfied
    assert res.kappa_min <= 1.35  # near the true intensity, up to grid + noise
    assert abs(res.var_to_mean - 1.0) < 0.15


def test_sub_poisson_rejects_clusters():
    geom = TorusGeometry(dim=1, side=50.0)
    snaps = clustered_snaps(geom, 600)
    cd = count_distribution(snaps, Box((0.0,), (2.0,)))
    res = sub_poisson_test(cd, suggest_kappa_grid(cd))
    assert not res.satisfied
    assert res.worst_n is not None and res.worst_n >= 1
    assert res.var_to_mean > 1.5


def test_sub_poisson_all_empty_satisfied():
    snaps = [Snapshot(0.0, np.zeros((0, 1)), replica=i) for i in range(50)]
    cd = count_distribution(snaps, Box((0.0,), (2.0,)))
    res = sub_poisson_test(cd, np.linspace(0.5, 2.0, 5))
    assert res.satisfied
    assert res.kappa_min == 0.5


def test_sub_poisson_rejects_single_replica():
    snaps = [Snapshot(0.0, np.zeros((0, 1)), replica=0)]
    cd = count_distribution(snaps, Box((0.0,), (2.0,)))
    with pytest.raises(ValueError):
        sub_poisson_test(cd, np.linspace(0.5, 2.0, 5))


def test_sub_poisson_calibration_rate():
    # exact Poisson batches should almost always pass at the default band
    geom = TorusGeometry(dim=1, side=40.0)
    passed = 0
    trials = 60
    for trial in range(trials):
        snaps = poisson_snaps(1.0, geom, 300, seed0=1000 * trial)
        cd = count_distribution(snaps, Box((0.0,), (2.0,)))
        res = sub_poisson_test(cd, suggest_kappa_grid(cd))
        passed += int(res.satisfied)
    assert passed / trials >= 0.95


# -- correlations ------------------------------------------------------------------

def test_poisson_correlations_factorize():
    geom = TorusGeometry(dim=1, side=50.0)
    snaps = poisson_snaps(2.0, geom, 400)
    edges = np.linspace(0.0, 5.0, 11)
    ce = estimate_correlations(snaps, edges, geom)
    assert abs(ce.k1 - 2.0) < 3 * ce.k1_se
    for j in range(ce.n_bins):
        assert abs(ce.k2[j] - 4.0) < 3 * ce.k2_se[j] + 1e-9


def test_two_point_configuration_hits_single_bin():
    geom = TorusGeometry(dim=1, side=20.0)
    snaps = [Snapshot(0.0, np.array([[5.0], [5.7]]), replica=i) for i in range(4)]
    edges = np.array([0.0, 0.5, 1.0, 1.5])
    ce = estimate_correlations(snaps, edges, geom)
    assert ce.k2[1] > 0  # separation 0.7 in (0.5, 1.0]
    assert ce.k2[0] == 0 and ce.k2[2] == 0


def test_pair_counts_match_brute_force():
    geom = TorusGeometry(dim=2, side=12.0)
    rng = np.random.default_rng(8)
    pts = rng.uniform(0, 12, size=(150, 2))
    edges = np.array([0.0, 0.7, 1.5, 3.0, 6.0])
    ce = estimate_correlations([Snapshot(0.0, pts, replica=0)], edges, geom)
    brute = np.zeros(len(edges) - 1)
    for i in range(len(pts)):
        for j in range(len(pts)):
            if i == j:
                continue
            d = geom.distance(pts[i], pts[j])
            for b in range(len(edges) - 1):
                if edges[b] < d <= edges[b + 1]:
                    brute[b] += 1
    shells = np.array([math.pi * (hi**2 - lo**2) for lo, hi in zip(edges[:-1], edges[1:])])
    assert np.allclose(ce.k2, brute / (geom.volume * shells), rtol=1e-12)


def test_correlations_validation():
    geom = TorusGeometry(dim=1, side=20.0)
    snaps = [Snapshot(0.0, np.zeros((0, 1)), replica=0)]
    with pytest.raises(ValueError):
        estimate_correlations(snaps, [0.0, 11.0], geom)  # beyond L/2
    with pytest.raises(ValueError):
        estimate_correlations(snaps, [1.0, 0.5], geom)


def test_ruelle_poisson():
    geom = TorusGeometry(dim=1, side=50.0)
    snaps = poisson_snaps(1.5, geom, 400)
    ce = estimate_correlations(snaps, np.linspace(0.0, 4.0, 9), geom)
    diag = ruelle_check(ce)
    assert diag.kappa_hat == pytest.approx(1.5, rel=0.1)
    assert diag.satisfied is None
    assert ruelle_check(ce, kappa_budget=3.0).satisfied
    assert not ruelle_check(ce, kappa_budget=1.0).satisfied


# -- product functional -------------------------------------------------------------

def test_f_theta_trivial_values():
    theta0 = ThetaFunction("tophat-well", Box((0.0,), (4.0,)), depth=0.0)
    pts = np.array([[1.0], [2.0]])
    assert f_theta(pts, theta0) == 1.0
    theta = ThetaFunction("tophat-well", Box((0.0,), (4.0,)), depth=-0.5)
    assert f_theta(np.array([[1.0]]), theta) == 0.5
    assert f_theta(np.zeros((0, 1)), theta) == 1.0


def test_f_theta_poisson_mean():
    geom = TorusGeometry(dim=1, side=40.0)
    snaps = poisson_snaps(1.0, geom, 3000)
    theta = ThetaFunction("tophat-well", Box((5.0,), (9.0,)), depth=-0.4)
    vals = np.array([f_theta(s, theta) for s in snaps])
    se = vals.std(ddof=1) / math.sqrt(len(vals))
    assert abs(vals.mean() - poisson_f_theta_mean(1.0, theta)) < 3 * se


def test_f_theta_bounds_and_monotonicity():
    geom = TorusGeometry(dim=1, side=40.0)
    snaps = poisson_snaps(2.0, geom, 50)
    shallow = ThetaFunction("smooth-bump", Box((5.0,), (15.0,)), depth=-0.3)
    deep = ThetaFunction("smooth-bump", Box((5.0,), (15.0,)), depth=-0.7)
    for s in snaps:
        v1, v2 = f_theta(s, shallow), f_theta(s, deep)
        assert 0.0 < v2 <= v1 <= 1.0


def test_f_theta_locality():
    theta = ThetaFunction("tophat-well", Box((5.0,), (9.0,)), depth=-0.5)
    base = np.array([[6.0], [8.0]])
    far = np.vstack((base, [[20.0]]))
    assert f_theta(base, theta) == f_theta(far, theta)


# -- generator ------------------------------------------------------------------------

def make_kernels(a_amp=0.3, m=0.2, beta_amp=0.5, dim=1):
    comp = None if a_amp == 0 else RadialKernel("tophat", 1.0, a_amp, dim=dim)
    return KernelSet(comp, MortalityField(m),
                     FissionKernel.delta(RadialKernel("tophat", 1.0, beta_amp, dim=dim)))


def test_generator_zero_theta_is_exactly_zero():
    geom = TorusGeometry(dim=1, side=40.0)
    theta0 = ThetaFunction("tophat-well", Box((5.0,), (9.0,)), depth=0.0)
    pts = np.random.default_rng(3).uniform(0, 40, size=(30, 1))
    val, se = generator_on_f_theta(pts, theta0, make_kernels(), geom, 64, np.random.default_rng(0))
    assert val == 0.0 and se == 0.0


def test_generator_single_point_pure_death():
    geom = TorusGeometry(dim=1, side=40.0)
    kernels = make_kernels(a_amp=0.0, m=1.0, beta_amp=0.0)
    theta = ThetaFunction("tophat-well", Box((5.0,), (9.0,)), depth=-0.5)
    val, se = generator_on_f_theta(np.array([[6.0]]), theta, kernels, geom, 64,
                                   np.random.default_rng(0))
    # death bracket: 1 * (F without the point - F) = 1 - 0.5
    assert val == pytest.approx(0.5, abs=1e-12)
    assert se == 0.0


def test_generator_fission_against_quadrature():
    geom = TorusGeometry(dim=1, side=40.0)
    kernels = make_kernels(a_amp=0.0, m=0.0, beta_amp=0.5)
    beta = kernels.fission.beta
    theta = ThetaFunction("tophat-well", Box((10.0,), (14.0,)), depth=-0.5)
    x0 = 9.4  # inside dispersal reach of the support
    pts = np.array([[x0]])

    def integrand(xi):
        return beta.profile(abs(xi)) * theta.evaluate(np.array([[x0 + xi]]))[0]

    oracle, _ = integrate.quad(integrand, -1.0, 1.0, points=[-1.0, 1.0], limit=200)
    val, se = generator_on_f_theta(pts, theta, kernels, geom, 4_000_000,
                                   np.random.default_rng(42))
    assert abs(val - oracle) <= max(3 * se, 1e-3 * abs(oracle))
    assert abs(val - oracle) <= 1e-3 * abs(oracle) + 3e-5


def test_generator_linearity_in_mortality_and_amplitude():
    geom = TorusGeometry(dim=1, side=40.0)
    theta = ThetaFunction("smooth-bump", Box((5.0,), (12.0,)), depth=-0.6)
    pts = np.random.default_rng(5).uniform(3, 14, size=(25, 1))

    def gen(m, a_amp):
        kernels = make_kernels(a_amp=a_amp, m=m, beta_amp=0.0)
        # no fission: exact evaluation, rng unused
        return generator_on_f_theta(pts, theta, kernels, geom, 8, np.random.default_rng(0))[0]

    g1, g2, g3 = gen(0.5, 0.2), gen(1.0, 0.2), gen(1.5, 0.2)
    assert g3 - g2 == pytest.approx(g2 - g1, rel=1e-9)
    h1, h2, h3 = gen(0.3, 0.1), gen(0.3, 0.2), gen(0.3, 0.4)
    assert h3 - h1 == pytest.approx(3 * (h2 - h1), rel=1e-9)


def test_generator_locality_bitwise():
    geom = TorusGeometry(dim=1, side=40.0)
    kernels = make_kernels()
    theta = ThetaFunction("tophat-well", Box((5.0,), (9.0,)), depth=-0.5)
    base = np.random.default_rng(7).uniform(4, 10, size=(12, 1))
    reach = max(kernels.max_range, 1.0) + (9.0 - 5.0)
    far = np.vstack((base, [[9.0 + reach + 5.0]]))
    v1 = generator_on_f_theta(base, theta, kernels, geom, 128, np.random.default_rng(9))
    v2 = generator_on_f_theta(far, theta, kernels, geom, 128, np.random.default_rng(9))
    assert v1 == v2


def test_generator_product_form_runs():
    geom = TorusGeometry(dim=1, side=40.0)
    f1 = RadialKernel("triangle", 1.0, 0.8, dim=1)
    f2 = RadialKernel("tophat", 0.5, 0.9, dim=1)
    kernels = KernelSet(None, MortalityField(0.0), FissionKernel.product(f1, f2))
    theta = ThetaFunction("tophat-well", Box((10.0,), (12.0,)), depth=-0.5)
    val, se = generator_on_f_theta(np.array([[10.5]]), theta, kernels, geom, 20_000,
                                   np.random.default_rng(1))
    assert se > 0
    assert val < 0  # removing the parent from the well raises F; offspring may leave


# -- forward-equation residual -------------------------------------------------------

def test_stencil_times():
    assert stencil_times([0.0, 0.5], 0.05) == [0.0, 0.05, 0.1, 0.45, 0.5, 0.55]


def test_kolmogorov_residual_frozen_dynamics():
    geom = TorusGeometry(dim=1, side=40.0)
    kernels = make_kernels(a_amp=0.0, m=0.0, beta_amp=0.0)
    theta = ThetaFunction("tophat-well", Box((5.0,), (9.0,)), depth=-0.5)
    h = 0.05
    runs = []
    for seed in range(20):
        state = init_poisson(0.5, geom, kernels, seed)
        runs.append(run(state, horizon=1.2, snapshot_times=stencil_times([0.0, 1.0], h),
                        replica=seed))
    res = kolmogorov_residual(runs, theta, kernels, geom, [0.0, 1.0], h, mc_samples=16)
    assert res.max_abs_residual == 0.0
    assert res.consistent_with_zero()


def test_kolmogorov_residual_theta_zero():
    geom = TorusGeometry(dim=1, side=40.0)
    kernels = make_kernels()
    theta0 = ThetaFunction("tophat-well", Box((5.0,), (9.0,)), depth=0.0)
    h = 0.05
    runs = []
    for seed in range(10):
        state = init_poisson(0.5, geom, kernels, seed)
        runs.append(run(state, horizon=0.7, snapshot_times=stencil_times([0.5], h),
                        replica=seed))
    res = kolmogorov_residual(runs, theta0, kernels, geom, [0.5], h, mc_samples=16)
    assert res.rows[0].ddt_mean == 0.0
    assert res.rows[0].generator_mean == 0.0


def test_snapshots_at_synthesizes_empty_for_extinct():
    geom = TorusGeometry(dim=1, side=40.0)
    kernels = make_kernels(a_amp=0.0, m=5.0, beta_amp=0.0)  # rapid extinction
    runs = []
    for seed in range(5):
        state = init_poisson(0.1, geom, kernels, seed)
        runs.append(run(state, horizon=50.0, snapshot_times=[0.0, 50.0], replica=seed))
    snaps = snapshots_at(runs, 50.0, geom)
    assert len(snaps) == 5
    assert all(s.n_points == 0 for s in snaps)
