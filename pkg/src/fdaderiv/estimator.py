"""Mean-derivative estimation from synchronously sampled curves."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .basis import as_multi_index
from .design import DesignGrid
from .exceptions import NoValidBandwidthError, SingularDesignError
from .weights import (
    EIG_FLOOR_REL,
    Kernel,
    check_bandwidth,
    epanechnikov_product_kernel,
    local_poly_weights,
    weight_matrix,
)

__all__ = [
    "FunctionalDataset",
    "DerivativeEstimate",
    "CVResult",
    "row_means",
    "trimmed_points",
    "estimate_derivative",
    "cv_bandwidth",
    "periodic_augment",
]


@dataclass(frozen=True, eq=False)
class FunctionalDataset:
    """``n`` curves observed on the same design grid (one row per curve)."""

    grid: DesignGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if values.shape[1] != self.grid.size:
            raise ValueError(
                f"dataset has {values.shape[1]} columns, grid has {self.grid.size} points"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("observations must be finite")
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class DerivativeEstimate:
    points: np.ndarray
    values: np.ndarray
    h: float
    s: tuple[int, ...]
    m: int
    kernel: str
    flags: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.flags is None:
            object.__setattr__(self, "flags", np.zeros(self.values.shape, dtype=bool))

    def __len__(self):
        return self.values.size


def row_means(data: FunctionalDataset) -> np.ndarray:
    """Pointwise mean over curves."""
    if data.n < 1:
        raise ValueError("need at least one curve")
    return data.values.mean(axis=0)


def trimmed_points(grid: DesignGrid, h: float, trim: bool | float = True) -> np.ndarray:
    """Design points restricted to an evaluation box on every axis.

    ``trim=True`` keeps ``[h, 1 - h]``, ``False`` keeps everything and a
    float ``a`` keeps ``[a, 1 - a]``.
    """
    pts = grid.points()
    if trim is False or trim is None:
        return pts
    a = h if trim is True else float(trim)
    if not 0 <= a < 0.5:
        raise ValueError(f"trim margin must lie in [0, 0.5), got {a}")
    keep = np.all((pts >= a) & (pts <= 1.0 - a), axis=1)
    return pts[keep]


def estimate_derivative(
    data: FunctionalDataset,
    s,
    m: int,
    h: float,
    eval_points=None,
    kernel: Kernel | None = None,
    trim: bool | float = True,
    floor_rel: float = EIG_FLOOR_REL,
) -> DerivativeEstimate:
    """Local polynomial estimate of ``d^s mu`` at ``eval_points``.

    Without ``eval_points`` the design points are used, restricted to
    ``[h, 1 - h]^d`` unless ``trim`` says otherwise (see
    :func:`trimmed_points`). Points where the local design
    is singular get NaN and a set flag.
    """
    grid = data.grid
    s = as_multi_index(s, grid.d)
    kernel = kernel or epanechnikov_product_kernel(grid.d)
    if eval_points is None:
        eval_points = trimmed_points(grid, h, trim)
    pts = np.asarray(eval_points, dtype=float).reshape(-1, grid.d)
    ybar = row_means(data)
    values = np.full(pts.shape[0], np.nan)
    flags = np.zeros(pts.shape[0], dtype=bool)
    for i, x in enumerate(pts):
        try:
            ws = local_poly_weights(grid, x, h, s, m, kernel, floor_rel)
        except SingularDesignError:
            flags[i] = True
            continue
        values[i] = ws.apply(ybar)
        flags[i] = ws.degenerate
    return DerivativeEstimate(pts, values, float(h), s, int(m), kernel.name, flags)


@dataclass
class CVResult:
    h: float
    bandwidths: np.ndarray
    scores: np.ndarray

    def table(self):
        return list(zip(self.bandwidths.tolist(), self.scores.tolist()))


def cv_bandwidth(
    data: FunctionalDataset,
    m: int,
    h_grid,
    kernel: Kernel | None = None,
    c: float | None = None,
    h0: float | None = None,
) -> CVResult:
    """Leave-one-curve-out cross-validation for the mean (``s = 0``) fit.

    The score of ``h`` is ``sum_i sum_j (Y_ij - mu_{-i}(x_j; h))^2`` where
    ``mu_{-i}`` smooths the mean of all curves but ``i``. The held-out mean
    is obtained by downdating the full row mean, so weights are built once
    per bandwidth. Bandwidths with any singular local fit score ``inf``;
    ties go to the smaller bandwidth.
    """
    n = data.n
    if n < 2:
        raise ValueError("cross-validation needs at least two curves")
    hs = np.sort(np.atleast_1d(np.asarray(h_grid, dtype=float)))
    if hs.size == 0:
        raise ValueError("empty bandwidth grid")
    for h in hs:
        check_bandwidth(h, data.grid.p_min, c, h0)
    grid = data.grid
    Y = data.values
    loo = (n * Y.mean(axis=0) - Y) / (n - 1)
    zero = (0,) * grid.d
    pts = grid.points()
    scores = np.full(hs.size, np.inf)
    for k, h in enumerate(hs):
        W, flags = weight_matrix(grid, pts, h, zero, m, kernel)
        if np.any(np.isnan(W)):
            continue
        scores[k] = float(np.sum((Y - loo @ W.T) ** 2))
    if not np.any(np.isfinite(scores)):
        raise NoValidBandwidthError("every bandwidth in the grid gives a singular local fit")
    if np.any(~np.isfinite(scores)):
        warnings.warn(f"{int(np.sum(~np.isfinite(scores)))} bandwidth(s) skipped as degenerate")
    best = int(np.argmin(scores))
    return CVResult(float(hs[best]), hs, scores)


def periodic_augment(data: FunctionalDataset, pad: int, period: float = 1.0) -> FunctionalDataset:
    """Extend each curve by the neighbouring curves' columns across the period.

    Curve ``i`` is prefixed by the last ``pad`` observations of curve ``i-1``
    (coordinates shifted by ``-period``) and suffixed by the first ``pad``
    observations of curve ``i+1`` (shifted by ``+period``). The first and
    last curves have no neighbour on one side and are dropped. Only for
    one-dimensional designs, e.g. consecutive days of a diurnal series.
    """
    grid = data.grid
    if grid.d != 1:
        raise ValueError("periodic augmentation needs a one-dimensional design")
    p = grid.size
    if not 0 < pad <= p:
        raise ValueError(f"pad must lie in 1..{p}, got {pad}")
    if data.n < 3:
        raise ValueError("periodic augmentation needs at least three consecutive curves")
    x = grid.axes[0]
    axis = np.concatenate([x[p - pad:] - period, x, x[:pad] + period])
    Y = data.values
    values = np.hstack([Y[:-2, p - pad:], Y[1:-1], Y[2:, :pad]])
    new_grid = DesignGrid((axis,), domain=(-period, 1.0 + period))
    return FunctionalDataset(new_grid, values)
