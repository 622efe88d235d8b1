"""Multi-indices and the scaled monomial basis of a local polynomial fit.

Multi-indices are plain tuples of non-negative ints. A :class:`BasisLayout`
fixes the order of the monomials ``u**k / k!`` with ``|k| <= m``: graded by
total order, then lexicographically descending within a grade so that in
two dimensions the first-order block reads ``(1, 0), (0, 1)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import comb

import numpy as np

from .exceptions import OrderExceededError

__all__ = [
    "BasisLayout",
    "as_multi_index",
    "enumerate_basis",
    "basis_vector",
    "basis_matrix",
    "derivative_selector",
    "factorial",
    "multi_factorial",
]


def factorial(k: int) -> float:
    out = 1.0
    for i in range(2, k + 1):
        out *= i
    return out


def multi_factorial(k) -> float:
    out = 1.0
    for entry in k:
        out *= factorial(entry)
    return out


def as_multi_index(s, d: int | None = None) -> tuple[int, ...]:
    """Normalise ``s`` (int or sequence) to a tuple multi-index of length ``d``."""
    if np.ndim(s) == 0:
        s = (int(s),) if d in (None, 1) else None
        if s is None:
            raise ValueError("scalar derivative index only allowed for d=1")
    s = tuple(int(v) for v in s)
    if any(v < 0 for v in s):
        raise ValueError(f"multi-index entries must be non-negative, got {s}")
    if d is not None and len(s) != d:
        raise ValueError(f"multi-index {s} has length {len(s)}, expected {d}")
    return s


def _compositions(total: int, d: int):
    # all k in N^d with |k| == total, lexicographically descending
    if d == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, d - 1):
            yield (first,) + rest


@dataclass(frozen=True)
class BasisLayout:
    d: int
    m: int
    indices: tuple[tuple[int, ...], ...] = field(repr=False)

    def __len__(self):
        return len(self.indices)

    @property
    def size(self) -> int:
        return len(self.indices)

    def position(self, k) -> int:
        k = as_multi_index(k, self.d)
        if sum(k) > self.m:
            raise OrderExceededError(
                f"|{k}| = {sum(k)} exceeds polynomial order m={self.m}"
            )
        return self._lookup[k]

    @property
    def _lookup(self):
        return _position_table(self)

    @property
    def exponents(self) -> np.ndarray:
        """``(N, d)`` integer array of the exponents."""
        return np.array(self.indices, dtype=int).reshape(len(self.indices), self.d)

    @property
    def factorials(self) -> np.ndarray:
        return np.array([multi_factorial(k) for k in self.indices])


@lru_cache(maxsize=None)
def _position_table(layout: BasisLayout) -> dict:
    return {k: i for i, k in enumerate(layout.indices)}


@lru_cache(maxsize=None)
def enumerate_basis(d: int, m: int) -> BasisLayout:
    """All multi-indices ``k`` with ``|k| <= m`` in graded order.

    >>> enumerate_basis(2, 1).indices
    ((0, 0), (1, 0), (0, 1))
    """
    if int(d) != d or d < 1:
        raise ValueError(f"dimension must be a positive integer, got {d}")
    if int(m) != m or m < 0:
        raise ValueError(f"order must be a non-negative integer, got {m}")
    d, m = int(d), int(m)
    indices = tuple(k for total in range(m + 1) for k in _compositions(total, d))
    assert len(indices) == comb(d + m, d)
    return BasisLayout(d, m, indices)


def basis_matrix(layout: BasisLayout, u) -> np.ndarray:
    """Rows ``U_m(u_i)`` for an ``(k, d)`` array of points.

    Entry ``[i, l]`` is ``u_i ** k_l / k_l!``.
    """
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = u.reshape(-1, layout.d) if layout.d > 1 else u[:, None]
    if u.shape[1] != layout.d:
        raise ValueError(f"points have dimension {u.shape[1]}, layout has {layout.d}")
    # powers[i, r, e] = u[i, r] ** e, built by repeated products for exactness
    powers = np.ones((u.shape[0], layout.d, layout.m + 1))
    for e in range(1, layout.m + 1):
        powers[:, :, e] = powers[:, :, e - 1] * u
    exps = layout.exponents
    out = np.ones((u.shape[0], layout.size))
    for r in range(layout.d):
        out *= powers[:, r, exps[:, r]]
    return out / layout.factorials


def basis_vector(layout: BasisLayout, u) -> np.ndarray:
    """``U_m(u)`` for a single point ``u`` in ``R^d``."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    return basis_matrix(layout, u.reshape(1, layout.d))[0]


def derivative_selector(layout: BasisLayout, s) -> np.ndarray:
    """Unit vector picking the coefficient of ``u**s / s!``.

    Raises :class:`OrderExceededError` when ``|s| > m``.
    """
    e = np.zeros(layout.size)
    e[layout.position(s)] = 1.0
    return e
