import itertools
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fdaderiv.basis import (
    basis_vector,
    derivative_selector,
    enumerate_basis,
    factorial,
    multi_factorial,
)
from fdaderiv.exceptions import OrderExceededError


def test_enumerate_small_layouts():
    assert enumerate_basis(2, 1).indices == ((0, 0), (1, 0), (0, 1))
    assert enumerate_basis(1, 3).indices == ((0,), (1,), (2,), (3,))
    assert len(enumerate_basis(3, 2)) == 10


@pytest.mark.parametrize("d", [1, 2, 3, 4])
@pytest.mark.parametrize("m", [0, 1, 2, 3, 4])
def test_enumeration_is_bijection(d, m):
    layout = enumerate_basis(d, m)
    brute = {k for k in itertools.product(range(m + 1), repeat=d) if sum(k) <= m}
    assert len(layout.indices) == len(set(layout.indices)) == comb(d + m, d)
    assert set(layout.indices) == brute
    assert layout.indices[0] == (0,) * d
    orders = [sum(k) for k in layout.indices]
    assert orders == sorted(orders)
    for l in range(m + 1):
        # size of each grade block is the number of compositions of l into d parts
        assert orders.count(l) == comb(l + d - 1, d - 1)


def test_enumeration_deterministic():
    assert enumerate_basis(3, 3).indices == enumerate_basis(3, 3).indices


def test_basis_vector_examples():
    np.testing.assert_array_equal(basis_vector(enumerate_basis(1, 2), 2.0), [1, 2, 2])
    np.testing.assert_array_equal(basis_vector(enumerate_basis(2, 1), [0, 0]), [1, 0, 0])
    layout = enumerate_basis(2, 2)
    v = basis_vector(layout, [1.0, 1.0])
    assert v[layout.position((1, 1))] == 1.0
    assert v[layout.position((2, 0))] == 0.5


@pytest.mark.parametrize("d,m", [(1, 4), (2, 3), (3, 2)])
def test_basis_vector_at_zero_is_unit(d, m):
    layout = enumerate_basis(d, m)
    e = np.zeros(len(layout))
    e[0] = 1
    np.testing.assert_array_equal(basis_vector(layout, np.zeros(d)), e)


def test_derivative_selector():
    np.testing.assert_array_equal(derivative_selector(enumerate_basis(1, 2), 1), [0, 1, 0])
    np.testing.assert_array_equal(derivative_selector(enumerate_basis(2, 1), (0, 0)), [1, 0, 0])
    layout = enumerate_basis(2, 2)
    e = derivative_selector(layout, (1, 1))
    assert e.sum() == 1 and e[layout.position((1, 1))] == 1
    with pytest.raises(OrderExceededError):
        derivative_selector(layout, (2, 1))


@pytest.mark.parametrize("d,m", [(1, 3), (2, 2), (3, 2)])
def test_selector_matches_finite_difference_partials(d, m):
    # d^s U_m(0) is the unit vector at s: check with central differences
    layout = enumerate_basis(d, m)
    step = 1e-2
    for s in layout.indices:
        # mixed central difference of the polynomial map, exact up to rounding for low order
        acc = np.zeros(len(layout))
        for signs in itertools.product(*[range(sk + 1) for sk in s]):
            u = np.array([(sk / 2.0 - j) * step for sk, j in zip(s, signs)])
            coef = np.prod([comb(sk, j) * (-1) ** j for sk, j in zip(s, signs)])
            acc += coef * basis_vector(layout, u)
        fd = acc / step ** sum(s)
        mask = np.array([sum(k) <= sum(s) for k in layout.indices])
        np.testing.assert_allclose(fd[mask], derivative_selector(layout, s)[mask], atol=1e-8)


def test_factorials():
    assert factorial(0) == 1 and factorial(5) == 120
    assert factorial(12) == 479001600
    assert multi_factorial((2, 3)) == 12


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 3), st.integers(0, 4),
       st.lists(st.floats(-2, 2), min_size=3, max_size=3))
def test_basis_entries_are_scaled_monomials(d, m, u):
    layout = enumerate_basis(d, m)
    u = np.array(u[:d])
    v = basis_vector(layout, u)
    for i, k in enumerate(layout.indices):
        assert v[i] == pytest.approx(np.prod(u ** np.array(k)) / multi_factorial(k), abs=1e-14)
