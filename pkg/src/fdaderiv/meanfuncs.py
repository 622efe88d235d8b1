"""Mean functions used by the simulation harness (univariate)."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.polynomial import Polynomial

__all__ = ["MeanFunction", "sine_gauss", "zero_mean", "polynomial_mean", "get_mean"]


@dataclass(frozen=True)
class MeanFunction:
    name: str
    _derivative: Callable[[np.ndarray, int], np.ndarray] = field(repr=False, compare=False)
    params: tuple = ()

    def __call__(self, x) -> np.ndarray:
        return self.derivative(x, 0)

    def derivative(self, x, order: int = 1) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self._derivative(x, int(order)), x.shape).astype(float)


@lru_cache(maxsize=None)
def _sine_gauss_derivative(order: int):
    import sympy as sp

    t = sp.Symbol("x", real=True)
    u = 2 * t - 1
    expr = sp.sin(3 * sp.pi * u) * sp.exp(-2 * u**2)
    return sp.lambdify(t, sp.diff(expr, t, order), "numpy")


def sine_gauss() -> MeanFunction:
    """``sin(3 pi (2x - 1)) exp(-2 (2x - 1)^2)``; derivatives by symbolic differentiation."""
    return MeanFunction("sine_gauss", lambda x, k: _sine_gauss_derivative(k)(x))


def zero_mean() -> MeanFunction:
    return MeanFunction("zero", lambda x, k: np.zeros_like(x))


def polynomial_mean(coeffs) -> MeanFunction:
    """Polynomial with coefficients in increasing degree."""
    poly = Polynomial(np.asarray(coeffs, dtype=float))
    return MeanFunction("polynomial", lambda x, k: poly.deriv(k)(x) if k else poly(x),
                        tuple(float(c) for c in coeffs))


def get_mean(name: str, coeffs=None) -> MeanFunction:
    if name == "sine_gauss":
        return sine_gauss()
    if name == "zero":
        return zero_mean()
    if name == "polynomial":
        if coeffs is None:
            raise ValueError("polynomial mean needs coefficients")
        return polynomial_mean(coeffs)
    raise ValueError(f"unknown mean function {name!r}")
