"""Fixed synchronous design grids on ``[0, 1]^d``."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .exceptions import EmptyGridError, InvalidDensityError

__all__ = [
    "DesignGrid",
    "DesignDensity",
    "uniform_density",
    "midpoint_grid",
    "quantile_design",
    "check_regularity",
    "default_regularity_samples",
]


@dataclass(frozen=True, eq=False)
class DesignGrid:
    """Cartesian product of strictly increasing per-axis point sets.

    Grid points are flattened row-major over axes (last axis fastest), so the
    flat index of ``(j_1, ..., j_d)`` is ``np.ravel_multi_index(j, p)``.
    """

    axes: tuple[np.ndarray, ...]
    domain: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        axes = tuple(np.asarray(a, dtype=float).ravel() for a in self.axes)
        if not axes:
            raise EmptyGridError("a design grid needs at least one axis")
        for k, a in enumerate(axes):
            if a.size == 0:
                raise EmptyGridError(f"axis {k} is empty")
            if not np.all(np.isfinite(a)):
                raise ValueError(f"axis {k} has non-finite points")
            if np.any(np.diff(a) <= 0):
                raise ValueError(f"axis {k} is not strictly increasing")
            if a[0] < self.domain[0] or a[-1] > self.domain[1]:
                raise ValueError(f"axis {k} leaves {list(self.domain)}")
            a.setflags(write=False)
        object.__setattr__(self, "axes", axes)

    @classmethod
    def from_axes(cls, *axes) -> "DesignGrid":
        return cls(tuple(axes))

    @property
    def d(self) -> int:
        return len(self.axes)

    @property
    def p(self) -> tuple[int, ...]:
        return tuple(a.size for a in self.axes)

    @property
    def size(self) -> int:
        """Total number of design points ``p^1``."""
        return int(np.prod(self.p))

    @property
    def p_min(self) -> int:
        return min(self.p)

    def points(self) -> np.ndarray:
        """``(p^1, d)`` array of all grid points in flat order."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=1)

    def window(self, x, h: float) -> np.ndarray:
        """Flat indices of grid points with ``|x_j - x|_inf <= h``, ascending."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        ranges = []
        for a, xk in zip(self.axes, x):
            lo = np.searchsorted(a, xk - h, side="left")
            hi = np.searchsorted(a, xk + h, side="right")
            # searchsorted on shifted values can be off by rounding; fix exactly
            while lo > 0 and abs(a[lo - 1] - xk) <= h:
                lo -= 1
            while lo < hi and abs(a[lo] - xk) > h:
                lo += 1
            while hi < a.size and abs(a[hi] - xk) <= h:
                hi += 1
            while hi > lo and abs(a[hi - 1] - xk) > h:
                hi -= 1
            if hi <= lo:
                return np.empty(0, dtype=np.intp)
            ranges.append(np.arange(lo, hi))
        if self.d == 1:
            return ranges[0]
        mesh = np.meshgrid(*ranges, indexing="ij")
        return np.ravel_multi_index(tuple(g.ravel() for g in mesh), self.p)

    def to_json(self) -> str:
        return json.dumps({"axes": [a.tolist() for a in self.axes]})

    @classmethod
    def from_json(cls, text: str) -> "DesignGrid":
        return cls(tuple(json.loads(text)["axes"]))

    def __eq__(self, other):
        if not isinstance(other, DesignGrid):
            return NotImplemented
        return self.p == other.p and all(
            np.array_equal(a, b) for a, b in zip(self.axes, other.axes)
        )

    def __hash__(self):
        return hash(tuple(a.tobytes() for a in self.axes))


@dataclass(frozen=True)
class DesignDensity:
    """Per-axis design densities on ``[0, 1]``.

    ``f_min``/``f_max`` are the claimed bounds; they are checked on a fine
    lattice together with the normalisation when the design is built.
    """

    densities: tuple[Callable[[np.ndarray], np.ndarray], ...]
    f_min: float
    f_max: float
    lipschitz: float = 0.0

    def validate(self, tol: float = 1e-6):
        if not (0 < self.f_min <= self.f_max < np.inf):
            raise InvalidDensityError(
                f"need 0 < f_min <= f_max < inf, got {self.f_min}, {self.f_max}"
            )
        t = np.linspace(0.0, 1.0, 2001)
        for k, f in enumerate(self.densities):
            vals = np.asarray(f(t), dtype=float)
            if np.any(vals < self.f_min - 1e-12) or np.any(vals > self.f_max + 1e-12):
                raise InvalidDensityError(f"density {k} leaves [f_min, f_max]")
            mass, _ = integrate.quad(lambda v: float(f(np.array(v))), 0.0, 1.0)
            if abs(mass - 1.0) > tol:
                raise InvalidDensityError(
                    f"density {k} integrates to {mass:.8f}, not 1"
                )


def uniform_density(d: int = 1) -> DesignDensity:
    return DesignDensity(tuple(lambda t: np.ones_like(t) for _ in range(d)), 1.0, 1.0, 0.0)


def midpoint_grid(p) -> DesignGrid:
    """Equidistant grid ``x_l = (l - 0.5) / p`` on every axis."""
    p = (int(p),) if np.ndim(p) == 0 else tuple(int(v) for v in p)
    return DesignGrid(tuple((np.arange(1, pk + 1) - 0.5) / pk for pk in p))


def _bisect(g: Callable[[float], float], target: float, tol: float) -> float:
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if g(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def quantile_design(density: DesignDensity, p: Sequence[int] | int, tol: float = 1e-12) -> DesignGrid:
    """Grid whose ``l``-th point on axis ``k`` solves ``F_k(x) = (l - 0.5)/p_k``.

    The CDFs are computed by adaptive quadrature and inverted by bisection,
    since the densities are only assumed Lipschitz.
    """
    density.validate()
    p = (int(p),) * len(density.densities) if np.ndim(p) == 0 else tuple(int(v) for v in p)
    if len(p) != len(density.densities):
        raise ValueError("need one count per density axis")
    if any(pk < 2 for pk in p):
        raise ValueError(f"need at least 2 points per axis, got {p}")
    axes = []
    for f, pk in zip(density.densities, p):
        # piecewise CDF: accumulate over a fixed lattice, then refine inside a cell
        knots = np.linspace(0.0, 1.0, 257)
        cell = [integrate.quad(lambda v: float(f(np.array(v))), a, b, epsabs=1e-14, epsrel=1e-13)[0]
                for a, b in zip(knots[:-1], knots[1:])]
        cum = np.concatenate([[0.0], np.cumsum(cell)])

        def cdf(x, f=f, cum=cum, knots=knots):
            i = min(int(np.searchsorted(knots, x, side="right")) - 1, knots.size - 2)
            part, _ = integrate.quad(lambda v: float(f(np.array(v))), knots[i], x,
                                     epsabs=1e-14, epsrel=1e-13)
            return cum[i] + part

        targets = (np.arange(1, pk + 1) - 0.5) / pk
        axes.append(np.array([_bisect(cdf, t, tol) for t in targets]))
    return DesignGrid(tuple(axes))


def default_regularity_samples(grid: DesignGrid):
    """21-point lattice of ``x`` per axis and ``h`` in ``{1, 2, ...}/p_min`` up to 0.5."""
    lattice = np.linspace(0.0, 1.0, 21)
    if grid.d == 1:
        xs = lattice[:, None]
    else:
        mesh = np.meshgrid(*([lattice] * grid.d), indexing="ij")
        xs = np.stack([g.ravel() for g in mesh], axis=1)
    hs = np.arange(1, int(np.floor(0.5 * grid.p_min)) + 1) / grid.p_min
    return hs, xs


def check_regularity(grid: DesignGrid, h_samples=None, x_samples=None) -> float:
    """Sampled estimate of the regular-design constant ``C_d``.

    Returns ``max card{j : |x_j - x|_inf <= h} / (h^d p^1)`` over the sample
    pairs.
    """
    if grid.size == 0:
        raise EmptyGridError("empty grid")
    if h_samples is None or x_samples is None:
        dh, dx = default_regularity_samples(grid)
        h_samples = dh if h_samples is None else h_samples
        x_samples = dx if x_samples is None else x_samples
    h_samples = np.atleast_1d(np.asarray(h_samples, dtype=float))
    x_samples = np.asarray(x_samples, dtype=float).reshape(-1, grid.d)
    if h_samples.size == 0 or x_samples.shape[0] == 0:
        raise ValueError("need non-empty bandwidth and point samples")
    if np.any(h_samples <= 0) or np.any(h_samples > 1):
        raise ValueError("bandwidths must lie in (0, 1]")
    ratio = 0.0
    for h in h_samples:
        for x in x_samples:
            count = 1
            for a, xk in zip(grid.axes, x):
                count *= int(np.count_nonzero(np.abs(a - xk) <= h))
            ratio = max(ratio, count / (h ** grid.d * grid.size))
    return ratio
