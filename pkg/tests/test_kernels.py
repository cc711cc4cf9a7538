import math

import numpy as np
import pytest
from scipy import integrate, stats

from srs.kernels import (
    DispersalClass,
    FissionKernel,
    MortalityField,
    RadialKernel,
    SamplingError,
    classify_dispersal,
    competition_integral,
    eval_competition,
    fission_total_rate,
    sample_offspring,
)

ALL_SHAPES = ["tophat", "triangle", "truncated-bell"]


# -- evaluation -------------------------------------------------------------

def test_eval_tophat_inside_and_outside():
    k = RadialKernel("tophat", range_=1.0, amplitude=0.3, dim=1)
    assert eval_competition(k, 0.5) == 0.3
    assert eval_competition(k, 1.5) == 0.0
    assert eval_competition(k, -0.5) == 0.3


def test_eval_triangle_midpoint():
    k = RadialKernel("triangle", range_=2.0, amplitude=1.0, dim=1)
    assert eval_competition(k, 1.0) == pytest.approx(0.5, abs=1e-15)


@pytest.mark.parametrize("shape", ALL_SHAPES)
@pytest.mark.parametrize("dim", [1, 2])
def test_zero_outside_support(shape, dim):
    k = RadialKernel(shape, range_=1.3, amplitude=0.7, dim=dim)
    rng = np.random.default_rng(7)
    radii = 1.3 + rng.uniform(1e-12, 10.0, 200)
    assert np.all(k.profile(radii) == 0.0)
    assert np.all(k.profile(radii[:5] * 1e6) == 0.0)


@pytest.mark.parametrize("shape", ALL_SHAPES)
def test_even_symmetry(shape):
    k = RadialKernel(shape, range_=2.0, amplitude=0.5, dim=1)
    xs = np.linspace(-3, 3, 401)
    assert np.array_equal(k.evaluate(xs), k.evaluate(-xs))


def test_invalid_kernel_parameters():
    with pytest.raises(ValueError):
        RadialKernel("box", 1.0, 1.0)
    with pytest.raises(ValueError):
        RadialKernel("tophat", 0.0, 1.0)
    with pytest.raises(ValueError):
        RadialKernel("tophat", 1.0, -0.1)
    with pytest.raises(ValueError):
        RadialKernel("tophat", 1.0, 1.0, dim=3)


# -- integrals --------------------------------------------------------------

def test_tophat_integrals():
    assert competition_integral(RadialKernel("tophat", 1.0, 0.3, dim=1)) == pytest.approx(0.6, rel=1e-15)
    assert competition_integral(RadialKernel("tophat", 1.0, 1.0, dim=2)) == pytest.approx(math.pi, rel=1e-15)


@pytest.mark.parametrize("shape", ALL_SHAPES)
@pytest.mark.parametrize("dim", [1, 2])
def test_integral_against_quadrature(shape, dim):
    k = RadialKernel(shape, range_=1.7, amplitude=0.83, dim=dim)
    if dim == 1:
        oracle, err = integrate.quad(lambda s: k.profile(abs(s)), -k.range_, k.range_)
    else:
        oracle, err = integrate.quad(lambda r: 2.0 * math.pi * r * k.profile(r), 0.0, k.range_)
    assert err < 1e-10
    assert k.integral() == pytest.approx(oracle, abs=1e-10)


@pytest.mark.parametrize("shape", ALL_SHAPES)
def test_line_integral_matches_quadrature(shape):
    k = RadialKernel(shape, range_=0.9, amplitude=1.4, dim=1)
    for lo, hi in [(-2.0, 2.0), (-0.3, 0.5), (0.85, 1.5), (-1.5, -0.85)]:
        brk = [p for p in (-0.9, 0.0, 0.9) if lo < p < hi]
        oracle, _ = integrate.quad(lambda s: k.profile(abs(s)), lo, hi, points=brk or None)
        assert k.line_integral(lo, hi) == pytest.approx(oracle, abs=1e-12)


# -- fission kernels --------------------------------------------------------

def test_fission_total_rate_delta_form():
    beta1 = RadialKernel("tophat", 1.0, 0.5, dim=1)
    assert fission_total_rate(FissionKernel.delta(beta1)) == pytest.approx(1.0, rel=1e-12)
    beta2 = RadialKernel("tophat", 1.0, 1.0, dim=2)
    assert fission_total_rate(FissionKernel.delta(beta2)) == pytest.approx(math.pi, rel=1e-12)


def test_fission_total_rate_product_form_nested_quadrature():
    f1 = RadialKernel("truncated-bell", 0.8, 1.1, dim=1)
    f2 = RadialKernel("truncated-bell", 1.2, 0.4, dim=1)
    b = FissionKernel.product(f1, f2)
    # independent oracle: nested quadrature of b(x | y1, y2) over both offspring
    oracle, err = integrate.dblquad(
        lambda y2, y1: f1.profile(abs(y1)) * f2.profile(abs(y2)),
        -f1.range_, f1.range_, lambda _: -f2.range_, lambda _: f2.range_)
    assert err < 1e-9
    assert fission_total_rate(b) == pytest.approx(oracle, rel=1e-8)


def test_delta_form_keeps_parent_position_bitwise():
    beta = RadialKernel("tophat", 1.0, 0.5, dim=1)
    b = FissionKernel.delta(beta)
    rng = np.random.default_rng(11)
    x = np.array([3.14159265358979])
    for _ in range(200):
        y1, y2 = sample_offspring(b, x, rng)
        assert (y1[0] == x[0]) != (y2[0] == x[0]) or (y1[0] == x[0] and y2[0] == x[0])
        assert y1[0] == x[0] or y2[0] == x[0]


def test_sibling_separation_uniform_ks():
    # |y1 - y2| under a tophat dispersal kernel is uniform on [0, R]
    beta = RadialKernel("tophat", 1.0, 0.5, dim=1)
    b = FissionKernel.delta(beta)
    rng = np.random.default_rng(5)
    n = 100_000
    x = np.zeros(1)
    seps = np.empty(n)
    for i in range(n):
        y1, y2 = sample_offspring(b, x, rng)
        seps[i] = abs(y1[0] - y2[0])
    stat = stats.kstest(seps, stats.uniform(loc=0.0, scale=1.0).cdf).statistic
    assert stat < 1.628 / math.sqrt(n)  # 1% critical value


@pytest.mark.parametrize("shape", ALL_SHAPES)
@pytest.mark.parametrize("dim", [1, 2])
def test_offspring_mean_displacement_symmetric(shape, dim):
    beta = RadialKernel(shape, 1.0, 0.5, dim=dim)
    b = FissionKernel.delta(beta)
    rng = np.random.default_rng(17)
    x = np.zeros(dim)
    sums = np.array([sample_offspring(b, x, rng)[0] + sample_offspring(b, x, rng)[1]
                     for _ in range(4000)])
    se = sums.std(axis=0, ddof=1) / math.sqrt(len(sums))
    assert np.all(np.abs(sums.mean(axis=0)) < 3.0 * se + 1e-12)


@pytest.mark.parametrize("shape", ALL_SHAPES)
@pytest.mark.parametrize("path", ["batch", "scalar"])
def test_displacement_marginal_chisquare_1d(shape, path):
    beta = RadialKernel(shape, 1.0, 0.5, dim=1)
    rng = np.random.default_rng(23)
    n = 100_000
    if path == "batch":
        draws = beta.sample(rng, n)[:, 0]
    else:
        draws = np.array([beta.sample_one(rng)[0] for _ in range(n)])
    edges = np.linspace(-1.0, 1.0, 65)
    observed, _ = np.histogram(draws, bins=edges)
    masses = np.array([beta.line_integral(lo, hi) for lo, hi in zip(edges[:-1], edges[1:])])
    expected = n * masses / beta.integral()
    keep = expected > 5
    stat, p = stats.chisquare(observed[keep], expected[keep] * observed[keep].sum() / expected[keep].sum())
    assert p > 0.01


@pytest.mark.parametrize("shape", ALL_SHAPES)
@pytest.mark.parametrize("path", ["batch", "scalar"])
def test_displacement_radial_law_2d(shape, path):
    beta = RadialKernel(shape, 1.0, 1.0, dim=2)
    rng = np.random.default_rng(29)
    n = 100_000
    if path == "batch":
        draws = beta.sample(rng, n)
    else:
        draws = np.array([beta.sample_one(rng) for _ in range(n)])
    radii = np.linalg.norm(draws, axis=1)
    edges = np.linspace(0.0, 1.0, 65)
    observed, _ = np.histogram(radii, bins=edges)
    mids = 0.5 * (edges[:-1] + edges[1:])
    masses = 2.0 * math.pi * mids * beta.profile(mids) * np.diff(edges)
    expected = n * masses / masses.sum()
    keep = expected > 5
    stat, p = stats.chisquare(observed[keep], expected[keep] * observed[keep].sum() / expected[keep].sum())
    assert p > 0.01


def test_sampling_zero_amplitude_fails():
    beta = RadialKernel("tophat", 1.0, 0.0, dim=1)
    with pytest.raises(SamplingError):
        beta.sample(np.random.default_rng(0), 4)


# -- mortality --------------------------------------------------------------

def test_mortality_constant():
    m = MortalityField(0.25)
    assert m.mode == "constant"
    assert m.m_star == 0.25
    assert m.at(np.zeros(1)) == 0.25
    assert np.all(m.at(np.zeros((5, 1))) == 0.25)


def test_mortality_bounded_function_needs_floor():
    with pytest.raises(ValueError):
        MortalityField(lambda pts: np.ones(len(pts)))
    m = MortalityField(lambda pts: 1.0 + 0.1 * np.sin(pts[:, 0]), floor=0.9)
    assert m.mode == "bounded-function"
    assert m.m_star == 0.9


# -- dispersal classification ------------------------------------------------

def test_classify_short_when_competition_covers():
    a = RadialKernel("tophat", 2.0, 1.0, dim=1)
    beta = RadialKernel("tophat", 1.0, 1.0, dim=1)
    cls = classify_dispersal(a, beta, grid_step=0.01)
    assert cls == DispersalClass(tag="short", omega=1.0)


def test_classify_long_when_dispersal_escapes():
    a = RadialKernel("tophat", 1.0, 1.0, dim=1)
    beta = RadialKernel("tophat", 2.0, 1.0, dim=1)
    cls = classify_dispersal(a, beta, grid_step=0.01)
    assert cls.tag == "long"
    assert cls.omega is None


def test_classify_constant_ratio():
    a = RadialKernel("tophat", 1.0, 0.25, dim=1)
    beta = RadialKernel("tophat", 1.0, 0.5, dim=1)
    cls = classify_dispersal(a, beta, grid_step=0.01)
    assert cls.tag == "short"
    assert cls.omega == pytest.approx(0.5, rel=1e-12)


@pytest.mark.parametrize("scale", [0.5, 2.0, 10.0])
def test_classify_invariant_under_common_rescaling(scale):
    a = RadialKernel("triangle", 1.5, 0.8, dim=1)
    beta = RadialKernel("triangle", 1.0, 0.4, dim=1)
    base = classify_dispersal(a, beta, grid_step=0.005)
    scaled = classify_dispersal(
        RadialKernel("triangle", 1.5, 0.8 * scale, dim=1),
        RadialKernel("triangle", 1.0, 0.4 * scale, dim=1),
        grid_step=0.005)
    assert scaled.tag == base.tag
    if base.tag == "short":
        assert scaled.omega == pytest.approx(base.omega, rel=1e-9)


def test_classify_2d_grid():
    a = RadialKernel("tophat", 2.0, 0.5, dim=2)
    beta = RadialKernel("tophat", 1.0, 1.0, dim=2)
    cls = classify_dispersal(a, beta, grid_step=0.05)
    assert cls.tag == "short"
    assert cls.omega == pytest.approx(0.5, rel=1e-12)


def test_classify_rejects_coarse_grid():
    a = RadialKernel("tophat", 1.0, 1.0, dim=1)
    beta = RadialKernel("tophat", 1.0, 1.0, dim=1)
    with pytest.raises(ValueError):
        classify_dispersal(a, beta, grid_step=0.5)
