import json

import numpy as np
import pytest

from fdaderiv.design import (
    DesignDensity,
    DesignGrid,
    check_regularity,
    midpoint_grid,
    quantile_design,
    uniform_density,
)
from fdaderiv.exceptions import EmptyGridError, InvalidDensityError


def linear_density():
    # f(t) = 0.5 + t integrates to one on [0, 1]
    return DesignDensity((lambda t: 0.5 + t,), f_min=0.5, f_max=1.5, lipschitz=1.0)


def test_grid_invariants():
    with pytest.raises(ValueError):
        DesignGrid((np.array([0.1, 0.1, 0.2]),))
    with pytest.raises(ValueError):
        DesignGrid((np.array([0.1, 1.2]),))
    with pytest.raises(EmptyGridError):
        DesignGrid((np.array([]),))
    g = midpoint_grid((3, 4))
    assert g.p == (3, 4) and g.size == 12 and g.p_min == 3 and g.d == 2


def test_points_row_major():
    g = DesignGrid((np.array([0.1, 0.2]), np.array([0.5, 0.6, 0.7])))
    pts = g.points()
    np.testing.assert_array_equal(pts[:3], [[0.1, 0.5], [0.1, 0.6], [0.1, 0.7]])
    np.testing.assert_array_equal(pts[3], [0.2, 0.5])


def test_window_matches_brute_force():
    g = midpoint_grid((7, 9))
    x, h = np.array([0.4, 0.55]), 0.2
    pts = g.points()
    brute = np.flatnonzero(np.max(np.abs(pts - x), axis=1) <= h)
    np.testing.assert_array_equal(g.window(x, h), brute)


def test_grid_json_roundtrip():
    g = midpoint_grid((3, 2))
    back = DesignGrid.from_json(g.to_json())
    assert back == g
    assert json.loads(g.to_json())["axes"][1] == [0.25, 0.75]


def test_uniform_quantile_design():
    g = quantile_design(uniform_density(), 5)
    np.testing.assert_allclose(g.axes[0], [0.1, 0.3, 0.5, 0.7, 0.9], atol=1e-11)
    g = quantile_design(uniform_density(), 101)
    np.testing.assert_allclose(g.axes[0], midpoint_grid(101).axes[0], atol=1e-11)


def test_linear_density_quantiles_match_closed_form():
    p = 20
    g = quantile_design(linear_density(), p)
    # 0.5 x + x^2 / 2 = q  =>  x = -0.5 + sqrt(0.25 + 2 q)
    q = (np.arange(1, p + 1) - 0.5) / p
    np.testing.assert_allclose(g.axes[0], -0.5 + np.sqrt(0.25 + 2 * q), atol=1e-10)
    cdf = 0.5 * g.axes[0] + g.axes[0] ** 2 / 2
    np.testing.assert_allclose(cdf, q, atol=1e-10)


def test_quantile_spacing_bounds():
    p = 40
    dens = linear_density()
    gaps = np.diff(quantile_design(dens, p).axes[0])
    assert np.all(gaps >= 1 / (dens.f_max * p) - 1e-12)
    assert np.all(gaps <= 1 / (dens.f_min * p) + 1e-12)


def test_invalid_densities():
    with pytest.raises(InvalidDensityError):
        quantile_design(DesignDensity((lambda t: 2 * t,), 0.1, 2.0), 10)  # f(0) = 0 < f_min
    with pytest.raises(InvalidDensityError):
        quantile_design(DesignDensity((lambda t: np.full_like(t, 2.0),), 1.0, 2.0), 10)
    with pytest.raises(InvalidDensityError):
        DesignDensity((lambda t: t,), 0.0, 1.0).validate()


def test_regularity_examples():
    g = midpoint_grid(100)
    assert check_regularity(g, [0.1], [[0.5]]) == pytest.approx(2.0)
    assert check_regularity(g, [1.0], [[0.3]]) <= 2.0
    g2 = midpoint_grid((50, 50))
    pts = g2.points()
    count = np.sum(np.max(np.abs(pts - 0.5), axis=1) <= 0.05)
    assert check_regularity(g2, [0.05], [[0.5, 0.5]]) == pytest.approx(count / (0.05**2 * 2500))


def test_regularity_bounded_on_quantile_design():
    g = quantile_design(linear_density(), 200)
    c = check_regularity(g)
    assert 0 < c <= 2 * 2.0  # 2 f_max plus discretisation slack
