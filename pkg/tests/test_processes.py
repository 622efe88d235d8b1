import numpy as np
import pytest
from scipy import integrate, stats

from fdaderiv.exceptions import UndefinedExponentError
from fdaderiv.processes import (
    BrownianMotion,
    FractionalBM,
    IteratedFBM,
    PathSample,
    RiemannLiouville,
    SmoothSine,
    covariance_matrix,
    empirical_holder_exponent,
    fbm_covariance,
    make_rng,
    parse_process,
    process_to_dict,
    rl_covariance,
    rl_covariance_closed_form,
    sample_fbm,
    sample_iterated_fbm,
    sample_paths,
    sample_rl_fbm,
    sample_smooth_sine,
    smooth_sine_covariance,
    smooth_sine_derivative_covariance,
)

GRID = np.linspace(0.0, 1.0, 9)


def test_spec_validation_and_roundtrip():
    with pytest.raises(ValueError):
        FractionalBM(1.0)
    with pytest.raises(ValueError):
        RiemannLiouville(0.0)
    with pytest.raises(ValueError):
        IteratedFBM(0.5, 0)
    for spec in (BrownianMotion(), FractionalBM(0.3), RiemannLiouville(0.7), SmoothSine(),
                 IteratedFBM(0.4, 2), None):
        assert parse_process(process_to_dict(spec)) == spec
    with pytest.raises(ValueError):
        parse_process({"kind": "levy"})


def test_fbm_covariance_reduces_to_min():
    assert fbm_covariance(0.5, 0.3, 0.5) == pytest.approx(0.3)
    s, t = np.meshgrid(GRID, GRID)
    np.testing.assert_allclose(fbm_covariance(0.5, s, t), np.minimum(s, t), atol=1e-15)


def test_rl_covariance():
    s, t = np.meshgrid(GRID, GRID)
    np.testing.assert_allclose(rl_covariance(0.5, s, t), np.minimum(s, t), atol=1e-10)
    for beta in (0.2, 0.35, 0.8, 1.4):
        for tt in (0.3, 1.0):
            assert rl_covariance(beta, tt, tt) == pytest.approx(tt ** (2 * beta) / (2 * beta), rel=1e-10)
        for a, b in ((0.2, 0.7), (0.5, 0.55), (0.9, 0.1)):
            direct = rl_covariance(beta, a, b)
            assert direct == pytest.approx(rl_covariance_closed_form(beta, a, b), rel=1e-8)
            ref, _ = integrate.quad(lambda u: ((a - u) * (b - u)) ** (beta - 0.5), 0, min(a, b),
                                    limit=400)
            assert direct == pytest.approx(ref, rel=1e-6)


def test_smooth_sine_moments():
    assert smooth_sine_covariance(0.0, 0.0) == pytest.approx(8 / 9)
    assert smooth_sine_covariance(0.5, 0.5) == pytest.approx(4 / 9)
    assert smooth_sine_derivative_covariance(0.5, 0.5) == pytest.approx(8 / 9 * np.pi**2)
    x = 0.3
    expected = np.pi**2 * (4 / 9 * np.cos(np.pi * x) ** 2 + 8 / 9 * np.sin(np.pi * x) ** 2)
    assert smooth_sine_derivative_covariance(x, x) == pytest.approx(expected)


def test_paths_start_at_zero_and_are_deterministic():
    for sampler, args in ((sample_fbm, (0.3,)), (sample_rl_fbm, (0.4,)),
                          (sample_iterated_fbm, (0.5, 1))):
        a = sampler(*args, GRID, 7)
        b = sampler(*args, GRID, 7)
        assert a.values[0] == 0.0
        np.testing.assert_array_equal(a.values, b.values)
    assert not np.array_equal(sample_fbm(0.3, GRID, 1).values, sample_fbm(0.3, GRID, 2).values)


def test_path_sample_csv_and_validation():
    path = sample_smooth_sine(GRID, 0)
    lines = path.to_csv().splitlines()
    assert lines[0] == "t,value" and len(lines) == GRID.size + 1
    with pytest.raises(ValueError):
        PathSample(GRID, np.zeros(3), SmoothSine())


def test_make_rng_keys_are_order_free():
    a = make_rng((5, "x", 3)).standard_normal(3)
    make_rng((5, "x", 2)).standard_normal(100)
    np.testing.assert_array_equal(a, make_rng((5, "x", 3)).standard_normal(3))
    assert not np.array_equal(a, make_rng((5, "y", 3)).standard_normal(3))


@pytest.mark.parametrize("spec", [BrownianMotion(), FractionalBM(0.3), FractionalBM(0.8),
                                  RiemannLiouville(0.3), SmoothSine()])
def test_empirical_covariance_within_four_se(spec):
    grid = np.linspace(0.1, 1.0, 6)
    n = 10_000
    Z = sample_paths(spec, grid, n, 11)
    C = covariance_matrix(spec, grid)
    E = Z.T @ Z / n
    se = np.sqrt((np.outer(np.diag(C), np.diag(C)) + C**2) / n)
    assert np.all(np.abs(E - C) <= 4 * se)


def test_fbm_variogram():
    H = 0.3
    grid = np.array([0.2, 0.25, 0.5, 0.9])
    Z = sample_paths(FractionalBM(H), grid, 10_000, 3)
    for i, j in ((0, 1), (0, 2), (1, 3)):
        sq = (Z[:, j] - Z[:, i]) ** 2
        target = abs(grid[j] - grid[i]) ** (2 * H)
        assert abs(sq.mean() - target) <= 3 * sq.std(ddof=1) / np.sqrt(sq.size)


def test_rl_half_agrees_with_bm_in_distribution():
    grid = np.linspace(0.05, 1.0, 20)
    a = sample_paths(RiemannLiouville(0.5), grid, 10_000, 101)[:, -1]
    b = sample_paths(FractionalBM(0.5), grid, 10_000, 202)[:, -1]
    assert stats.ks_2samp(a, b).pvalue > 0.01


def test_smooth_sine_variances():
    Z = sample_paths(SmoothSine(), np.array([0.0, 0.5]), 20_000, 0)
    assert Z[:, 0].var() == pytest.approx(8 / 9, rel=0.05)
    assert Z[:, 1].var() == pytest.approx(4 / 9, rel=0.05)


def test_iterated_fbm_is_integral():
    grid = np.linspace(0, 1, 401)
    w = sample_fbm(0.5, grid, 9).values
    iw = sample_iterated_fbm(0.5, 1, grid, 9).values
    np.testing.assert_allclose(iw, integrate.cumulative_trapezoid(w, grid, initial=0.0), atol=1e-14)


def test_iterated_increments_are_lipschitz_under_refinement():
    ratios = []
    for p in (257, 513, 1025):
        grid = np.linspace(0, 1, p)
        z = sample_iterated_fbm(0.5, 1, grid, 4).values
        ratios.append(np.max(np.abs(np.diff(z))) / (grid[1] - grid[0]))
    assert max(ratios) < 5.0


def test_holder_exponent_linear_and_constant():
    grid = np.linspace(0, 1, 256)
    slope, _ = empirical_holder_exponent(PathSample(grid, grid.copy(), BrownianMotion()))
    assert slope == pytest.approx(1.0, abs=1e-8)
    with pytest.raises(UndefinedExponentError):
        empirical_holder_exponent(PathSample(grid, np.ones(256), BrownianMotion()))
    with pytest.raises(ValueError):
        empirical_holder_exponent(PathSample(grid[:32], grid[:32], BrownianMotion()))


@pytest.mark.parametrize("spec,lo,hi", [
    (FractionalBM(0.5), 0.4, 0.6),
    (FractionalBM(0.8), 0.7, 0.9),
    (FractionalBM(0.3), 0.2, 0.4),
    # increment scaling saturates at 1 for differentiable paths
    (IteratedFBM(0.5, 1), 0.95, 1.05),
    (IteratedFBM(0.3, 1), 0.95, 1.05),
])
def test_holder_exponent_median_over_seeds(spec, lo, hi):
    grid = np.linspace(0, 1, 2048)
    paths = sample_paths(spec, grid, 50, 12)
    est = [empirical_holder_exponent(PathSample(grid, z, spec))[0] for z in paths]
    assert lo <= np.median(est) <= hi
