"""One-sided covariance derivatives on the diagonal as a path-smoothness check.

For a one-dimensional design the raw covariances ``C_jk`` of the centred
curves are restricted to the upper triangle ``x_j <= x_k`` and a bivariate
local polynomial is fitted around each diagonal point ``(x, x)`` using only
upper-triangle, off-diagonal cells. The two first-order coefficients estimate
the one-sided partials ``g10 = d/ds Gamma(s, t)`` and ``g01 = d/dt Gamma(s, t)``
at ``s = t = x``. Differentiable paths force ``g10 == g01``; Brownian-type
kernels such as ``min(s, t)`` give ``g10 = 1``, ``g01 = 0``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .estimator import DerivativeEstimate, FunctionalDataset, estimate_derivative
from .exceptions import SingularDesignError
from .weights import Kernel, epanechnikov_product_kernel, scattered_weights

__all__ = [
    "CovObservations",
    "DiagonalReport",
    "cov_raw",
    "reflect",
    "estimate_cov_partials",
    "estimate_cov_partials_upper",
    "smoothness_report",
]


@dataclass(frozen=True, eq=False)
class CovObservations:
    """Raw covariances on one triangle.

    ``points[l] = (x_j, x_k)`` with ``j <= k`` for the upper triangle;
    ``diagonal`` marks the ``j == k`` cells (noise-inflated); ``nugget`` is
    the median excess of a diagonal cell over its off-diagonal neighbour,
    an estimate of the observation-noise variance.
    """

    points: np.ndarray
    values: np.ndarray
    diagonal: np.ndarray
    nugget: float
    n: int
    triangle: str = "upper"


@dataclass
class DiagonalReport:
    x: np.ndarray
    g01: np.ndarray
    g10: np.ndarray
    flags: np.ndarray
    D: float
    S: float
    noise_floor: float
    indeterminate: bool

    @property
    def ratio(self) -> float:
        return self.D / self.S if self.S > 0 else float("nan")

    def summary(self) -> dict:
        return {
            "D": self.D,
            "S": self.S,
            "ratio": self.ratio,
            "flagged_points": int(np.sum(self.flags)),
            "noise_floor": self.noise_floor,
            "indeterminate": self.indeterminate,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["x", "g01", "g10", "abs_diff"])
        for row in zip(self.x, self.g01, self.g10, np.abs(self.g01 - self.g10)):
            writer.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    def summary_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)


def cov_raw(data: FunctionalDataset, mean_est: DerivativeEstimate) -> CovObservations:
    """Centred cross-products on the upper triangle.

    ``mean_est`` must be a mean (``s = 0``) estimate at every design point.
    """
    if data.grid.d != 1:
        raise ValueError("the covariance diagnostic is defined for d = 1")
    if data.n < 2:
        raise ValueError("covariance estimation needs at least two curves")
    if any(mean_est.s) or len(mean_est) != data.grid.size:
        raise ValueError("need a mean estimate (s = 0) at every design point")
    if np.any(mean_est.flags):
        raise ValueError("mean estimate is degenerate at some design points")
    x = data.grid.axes[0]
    R = data.values - mean_est.values
    C = R.T @ R / data.n
    C = 0.5 * (C + C.T)
    j, k = np.triu_indices(x.size)
    nugget = max(0.0, float(np.median(np.diag(C)[:-1] - np.diag(C, 1)))) if x.size > 1 else 0.0
    return CovObservations(np.stack([x[j], x[k]], axis=1), C[j, k], j == k, nugget, data.n)


def reflect(obs: CovObservations) -> CovObservations:
    """Mirror observations across the diagonal (upper <-> lower)."""
    other = "lower" if obs.triangle == "upper" else "upper"
    return CovObservations(obs.points[:, ::-1].copy(), obs.values, obs.diagonal,
                           obs.nugget, obs.n, other)


def estimate_cov_partials(obs: CovObservations, x, h: float, m: int = 2,
                          kernel: Kernel | None = None):
    """First-order partials of the triangle-restricted covariance at ``(x, x)``.

    Returns ``(g10, g01, norm10, norm01, flags)`` where ``g10`` is the
    derivative in the first argument, ``g01`` in the second and ``norm*``
    the Euclidean norms of the weight vectors. Degenerate windows give NaN
    and a set flag.
    """
    if m < 1:
        raise ValueError("need m >= 1 for first-order partials")
    kernel = kernel or epanechnikov_product_kernel(2)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    keep = ~obs.diagonal
    pts, vals = obs.points[keep], obs.values[keep]
    out = np.full((5, x.size), np.nan)
    flags = np.zeros(x.size, dtype=bool)
    for i, xi in enumerate(x):
        try:
            idx10, w10 = scattered_weights(pts, (xi, xi), h, (1, 0), m, kernel)
            idx01, w01 = scattered_weights(pts, (xi, xi), h, (0, 1), m, kernel)
        except SingularDesignError:
            flags[i] = True
            continue
        out[0, i] = np.dot(w10, vals[idx10])
        out[1, i] = np.dot(w01, vals[idx01])
        out[2, i] = np.linalg.norm(w10)
        out[3, i] = np.linalg.norm(w01)
    return out[0], out[1], out[2], out[3], flags


def estimate_cov_partials_upper(obs: CovObservations, h: float, m: int = 2,
                                kernel: Kernel | None = None, points=None):
    """``(x, g01, g10, flags)`` on the diagonal, trimmed to ``[h, 1 - h]``."""
    if points is None:
        diag = np.unique(obs.points[:, 0])
        points = diag[(diag >= h) & (diag <= 1 - h)]
    g10, g01, _, _, flags = estimate_cov_partials(obs, points, h, m, kernel)
    return np.asarray(points), g01, g10, flags


def smoothness_report(
    data: FunctionalDataset,
    h: float,
    m: int = 2,
    mean_h: float | None = None,
    mean_m: int | None = None,
    kernel: Kernel | None = None,
    floor_factor: float = 5.0,
) -> DiagonalReport:
    """Compare the two one-sided covariance partials along the diagonal.

    The curves are centred with a local polynomial mean estimate (bandwidth
    ``mean_h``, order ``mean_m``, defaulting to ``h`` and ``m``) over the
    whole grid. The result is flagged ``indeterminate`` when the scale ``S``
    does not exceed ``floor_factor`` times the largest standard error the
    partial estimates would have under a zero kernel (off-diagonal cells
    then have variance ``nugget**2 / n`` and are uncorrelated). No test is
    performed.
    """
    mean = estimate_derivative(data, 0, mean_m if mean_m is not None else m,
                               mean_h if mean_h is not None else h, trim=False)
    obs = cov_raw(data, mean)
    diag = data.grid.axes[0]
    points = diag[(diag >= h) & (diag <= 1 - h)]
    g10, g01, nrm10, nrm01, flags = estimate_cov_partials(obs, points, h, m, kernel)
    ok = ~flags
    if not np.any(ok):
        raise SingularDesignError(None, h, 0.0, 0.0)
    D = float(np.max(np.abs(g01[ok] - g10[ok])))
    S = float(np.max(np.maximum(np.abs(g01[ok]), np.abs(g10[ok]))))
    se = obs.nugget / np.sqrt(obs.n) * np.max(np.maximum(nrm10[ok], nrm01[ok]))
    floor = float(floor_factor * se)
    return DiagonalReport(points, g01, g10, flags, D, S, floor, S <= floor)
