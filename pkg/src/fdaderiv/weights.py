"""Local polynomial weights of the linear mean-derivative estimator.

For an evaluation point ``x``, bandwidth ``h`` and derivative index ``s`` the
weights are

    w_j = (p^1 h^(d+|s|))^-1  e_s' B^-1 U_m((x_j - x)/h) K((x_j - x)/h)

with the normalised moment matrix

    B = (p^1 h^d)^-1 sum_j U_m((x_j - x)/h) U_m((x_j - x)/h)' K((x_j - x)/h).

Applying them to row means gives the ``s``-th coefficient of the kernel
weighted least-squares polynomial fit, rescaled by ``h^-|s|``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import linalg

from .basis import (
    BasisLayout,
    as_multi_index,
    basis_matrix,
    derivative_selector,
    enumerate_basis,
)
from .design import DesignGrid
from .exceptions import OrderExceededError, SingularDesignError

__all__ = [
    "Kernel",
    "epanechnikov_product_kernel",
    "MomentMatrix",
    "WeightSet",
    "WeightReport",
    "moment_matrix",
    "local_poly_weights",
    "scattered_weights",
    "weight_matrix",
    "verify_weight_properties",
    "check_bandwidth",
    "EIG_FLOOR_REL",
]

EIG_FLOOR_REL = 1e-10


@dataclass(frozen=True)
class Kernel:
    """Kernel supported on the sup-norm unit ball.

    ``k_min`` is a lower bound on ``[-delta, delta]^d`` and ``k_max`` a global
    upper bound.
    """

    name: str
    d: int
    func: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    delta: float
    k_min: float
    k_max: float
    lipschitz: float

    def __call__(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.ndim == 1:
            u = u[:, None] if self.d == 1 else u[None, :]
        out = self.func(u)
        out[np.max(np.abs(u), axis=1) > 1.0] = 0.0
        return out


def _epanechnikov(u: np.ndarray) -> np.ndarray:
    return np.prod(np.maximum(0.0, 0.75 * (1.0 - u * u)), axis=1)


def epanechnikov_product_kernel(d: int = 1) -> Kernel:
    """``K(u) = prod_r max(0, 0.75 (1 - u_r^2))``."""
    if d < 1:
        raise ValueError("dimension must be positive")
    return Kernel(
        name=f"epanechnikov{d}",
        d=d,
        func=_epanechnikov,
        delta=0.5,
        k_min=0.5625**d,
        k_max=0.75**d,
        lipschitz=1.5 * d * 0.75 ** (d - 1),
    )


def check_bandwidth(h: float, p_min: int, c: float | None = None, h0: float | None = None):
    """Raise ``ValueError`` unless ``h`` lies in ``(c / p_min, h0]``."""
    if not np.isfinite(h) or h <= 0:
        raise ValueError(f"bandwidth must be positive, got {h}")
    if c is not None and h <= c / p_min:
        raise ValueError(f"bandwidth {h:g} must exceed c/p_min = {c / p_min:g}")
    if h0 is not None and h > h0:
        raise ValueError(f"bandwidth {h:g} exceeds h0 = {h0:g}")


@dataclass(frozen=True)
class MomentMatrix:
    matrix: np.ndarray
    min_eigenvalue: float

    @property
    def floor(self) -> float:
        n = self.matrix.shape[0]
        return EIG_FLOOR_REL * float(np.trace(self.matrix)) / n


@dataclass(frozen=True, eq=False)
class WeightSet:
    """Sparse weights for one evaluation point.

    ``indices`` are flat grid indices (ascending); ``values`` the matching
    weights. Every grid point outside ``indices`` has weight exactly zero.
    """

    x: np.ndarray
    h: float
    s: tuple[int, ...]
    m: int
    indices: np.ndarray
    values: np.ndarray
    kernel: Kernel = field(repr=False)
    degenerate: bool = False
    min_eigenvalue: float = float("nan")

    def dense(self, size: int) -> np.ndarray:
        out = np.zeros(size)
        out[self.indices] = self.values
        return out

    def apply(self, values: np.ndarray) -> float:
        """``sum_j w_j values_j`` in grid order."""
        return float(np.dot(self.values, np.asarray(values)[self.indices]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["index", "weight"])
        for j, w in zip(self.indices, self.values):
            writer.writerow([int(j), repr(float(w))])
        return buf.getvalue()


def _moment(U: np.ndarray, kv: np.ndarray, norm: float) -> np.ndarray:
    B = (U * kv[:, None]).T @ U / norm
    return 0.5 * (B + B.T)


def moment_matrix(grid: DesignGrid, x, h: float, layout: BasisLayout, kernel: Kernel | None = None) -> MomentMatrix:
    """Normalised local moment matrix ``B_{p,h}(x)``."""
    if h <= 0:
        raise ValueError("bandwidth must be positive")
    if layout.d != grid.d:
        raise ValueError("layout and grid dimensions differ")
    kernel = kernel or epanechnikov_product_kernel(grid.d)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    idx = grid.window(x, h)
    N = layout.size
    if idx.size == 0:
        return MomentMatrix(np.zeros((N, N)), 0.0)
    D = (_points(grid, idx) - x) / h
    kv = kernel(D)
    B = _moment(basis_matrix(layout, D), kv, grid.size * h**grid.d)
    return MomentMatrix(B, float(linalg.eigvalsh(B)[0]))


def _points(grid: DesignGrid, idx: np.ndarray) -> np.ndarray:
    if grid.d == 1:
        return grid.axes[0][idx][:, None]
    sub = np.unravel_index(idx, grid.p)
    return np.stack([a[j] for a, j in zip(grid.axes, sub)], axis=1)


def _solve(D, kv, layout, s, h, norm, x, floor_rel):
    # returns (weights over the supplied points, degenerate, min eigenvalue)
    U = basis_matrix(layout, D)
    B = _moment(U, kv, norm)
    N = layout.size
    eig = linalg.eigvalsh(B)
    floor = floor_rel * float(np.trace(B)) / N
    if not eig[0] > floor:
        raise SingularDesignError(x, h, float(eig[0]), floor)
    e = derivative_selector(layout, s)
    degenerate = False
    try:
        v = linalg.cho_solve(linalg.cho_factor(B, lower=True, check_finite=False), e)
    except linalg.LinAlgError:
        vals, vecs = linalg.eigh(B)
        keep = vals > floor
        v = vecs[:, keep] @ ((vecs[:, keep].T @ e) / vals[keep])
        degenerate = True
    w = (U @ v) * kv / (norm * h ** sum(s))
    return w, degenerate, float(eig[0])


def local_poly_weights(
    grid: DesignGrid,
    x,
    h: float,
    s,
    m: int,
    kernel: Kernel | None = None,
    floor_rel: float = EIG_FLOOR_REL,
) -> WeightSet:
    """Weights of the order-``m`` local polynomial estimator of ``d^s mu(x)``.

    Raises
    ------
    OrderExceededError
        If ``|s| > m``.
    SingularDesignError
        If the smallest eigenvalue of the moment matrix is below
        ``floor_rel * trace(B) / N``.
    """
    if h <= 0:
        raise ValueError("bandwidth must be positive")
    s = as_multi_index(s, grid.d)
    if sum(s) > m:
        raise OrderExceededError(f"|s| = {sum(s)} exceeds order m = {m}")
    layout = enumerate_basis(grid.d, m)
    kernel = kernel or epanechnikov_product_kernel(grid.d)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    idx = grid.window(x, h)
    if idx.size == 0:
        raise SingularDesignError(tuple(x), h, 0.0, 0.0)
    D = (_points(grid, idx) - x) / h
    kv = kernel(D)
    w, degenerate, lam = _solve(D, kv, layout, s, h, grid.size * h**grid.d, tuple(x), floor_rel)
    return WeightSet(x, float(h), s, int(m), idx, w, kernel, degenerate, lam)


def scattered_weights(points, x, h: float, s, m: int, kernel: Kernel | None = None,
                      floor_rel: float = EIG_FLOOR_REL):
    """Local polynomial weights on an arbitrary point cloud.

    Returns ``(indices, weights)`` into ``points`` (an ``(k, d)`` array);
    only points with ``|x_j - x|_inf <= h`` receive a weight.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    d = points.shape[1]
    s = as_multi_index(s, d)
    if sum(s) > m:
        raise OrderExceededError(f"|s| = {sum(s)} exceeds order m = {m}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    kernel = kernel or epanechnikov_product_kernel(d)
    idx = np.flatnonzero(np.max(np.abs(points - x), axis=1) <= h)
    if idx.size == 0:
        raise SingularDesignError(tuple(x), h, 0.0, 0.0)
    D = (points[idx] - x) / h
    w, _, _ = _solve(D, kernel(D), enumerate_basis(d, m), s, h,
                     points.shape[0] * h**d, tuple(x), floor_rel)
    return idx, w


def weight_matrix(grid: DesignGrid, eval_points, h: float, s, m: int,
                  kernel: Kernel | None = None, floor_rel: float = EIG_FLOOR_REL):
    """Dense ``(n_eval, p^1)`` weight matrix and per-row degeneracy flags.

    Rows whose construction fails (singular moment matrix) are filled with
    NaN and flagged; Cholesky fallbacks are flagged but keep their weights.
    """
    eval_points = np.asarray(eval_points, dtype=float).reshape(-1, grid.d)
    W = np.zeros((eval_points.shape[0], grid.size))
    flags = np.zeros(eval_points.shape[0], dtype=bool)
    for i, x in enumerate(eval_points):
        try:
            ws = local_poly_weights(grid, x, h, s, m, kernel, floor_rel)
        except SingularDesignError:
            W[i] = np.nan
            flags[i] = True
            continue
        W[i, ws.indices] = ws.values
        flags[i] = ws.degenerate
    return W, flags


@dataclass
class WeightReport:
    reproduction_error: float
    reproduction_ok: bool
    locality_ok: bool
    c1: float
    c3: float
    c2: float
    abs_sum: float
    signed_sum: float

    @property
    def ok(self) -> bool:
        return self.reproduction_ok and self.locality_ok

    def lines(self):
        yield f"M1 reproduction  max err {self.reproduction_error:.2e}  {'pass' if self.reproduction_ok else 'FAIL'}"
        yield f"M2 locality      {'pass' if self.locality_ok else 'FAIL'}"
        yield f"M3 C1 = {self.c1:.4g}"
        yield f"M4 C2 (sampled) = {self.c2:.4g}"
        yield f"M5 C3 = {self.c3:.4g}"


def verify_weight_properties(ws: WeightSet, grid: DesignGrid, tol: float = 1e-8,
                             lipschitz_offsets=None) -> WeightReport:
    """Measure the weight properties of a single :class:`WeightSet`.

    ``c2`` is ``max |w(x) - w(y)| p^1 h^(d+|s|) / min(|x-y|_inf / h, 1)`` over
    ``y = x + offset`` for the given offsets (default: a few fractions of
    ``h`` along each axis); offsets that leave the grid's hull or hit a
    singular design are skipped.
    """
    d, h, s = grid.d, ws.h, ws.s
    pts = _points(grid, ws.indices)
    diff = pts - ws.x
    scale = grid.size * h ** (d + sum(s))

    # M1: sum_j (x_j - x)^r w_j = delta_{r,s} s!
    layout = enumerate_basis(d, ws.m)
    err = 0.0
    for r in layout.indices:
        mono = np.prod(diff ** np.array(r), axis=1)
        target = layout.factorials[layout.position(r)] if r == s else 0.0
        size = max(1.0, float(np.sum(np.abs(mono * ws.values))))
        err = max(err, abs(float(np.dot(mono, ws.values)) - target) / size)

    # M2: nothing outside the window carries weight
    dense = ws.dense(grid.size)
    inside = np.zeros(grid.size, dtype=bool)
    inside[grid.window(ws.x, h)] = True
    locality = bool(np.all(dense[~inside] == 0.0))

    c1 = float(np.max(np.abs(ws.values))) * scale if ws.values.size else 0.0
    abs_sum = float(np.sum(np.abs(ws.values)))
    c3 = abs_sum * h ** sum(s)

    if lipschitz_offsets is None:
        fr = np.array([0.05, 0.25, 1.0, 2.0]) * h
        lipschitz_offsets = [sign * f * np.eye(d)[k] for k in range(d) for f in fr for sign in (1, -1)]
    lo = np.array([a[0] for a in grid.axes])
    hi = np.array([a[-1] for a in grid.axes])
    c2 = 0.0
    for off in lipschitz_offsets:
        y = ws.x + np.asarray(off, dtype=float)
        if np.any(y < lo) or np.any(y > hi):
            continue
        try:
            other = local_poly_weights(grid, y, h, s, ws.m, ws.kernel)
        except SingularDesignError:
            continue
        dist = float(np.max(np.abs(y - ws.x)))
        if dist == 0:
            continue
        delta = np.max(np.abs(dense - other.dense(grid.size))) * scale
        c2 = max(c2, delta / min(dist / h, 1.0))
    return WeightReport(err, err <= tol, locality, c1, c3, c2, abs_sum,
                        abs(float(np.sum(ws.values))))
