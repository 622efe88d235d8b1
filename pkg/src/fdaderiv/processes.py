"""Sample-path simulators for rough and smooth centred processes on [0, 1].

Gaussian processes are sampled exactly on arbitrary (possibly
non-equidistant) grids by Cholesky factorisation of the covariance matrix.
Grid points with zero variance (``t = 0`` for all processes here except the
smooth trigonometric one) are pinned to zero and left out of the factor.
"""

from __future__ import annotations

import csv
import io
import zlib
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np
from scipy import integrate, stats
from scipy.special import hyp2f1

from .exceptions import NumericalError, UndefinedExponentError

__all__ = [
    "BrownianMotion",
    "FractionalBM",
    "RiemannLiouville",
    "SmoothSine",
    "IteratedFBM",
    "ProcessSpec",
    "PathSample",
    "SmoothnessClassParams",
    "covariance_matrix",
    "fbm_covariance",
    "rl_covariance",
    "smooth_sine_covariance",
    "smooth_sine_derivative_covariance",
    "sample_paths",
    "sample_fbm",
    "sample_rl_fbm",
    "sample_smooth_sine",
    "sample_iterated_fbm",
    "empirical_holder_exponent",
    "parse_process",
    "make_rng",
]


@dataclass(frozen=True)
class BrownianMotion:
    pass


@dataclass(frozen=True)
class FractionalBM:
    H: float

    def __post_init__(self):
        if not 0 < self.H < 1:
            raise ValueError(f"Hurst parameter must lie in (0, 1), got {self.H}")


@dataclass(frozen=True)
class RiemannLiouville:
    beta: float

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")


@dataclass(frozen=True)
class SmoothSine:
    """``(2/3) N1 sin(pi x) + (sqrt(8)/3) N2 cos(pi x)``."""


@dataclass(frozen=True)
class IteratedFBM:
    H: float
    levels: int = 1

    def __post_init__(self):
        FractionalBM(self.H)
        if int(self.levels) != self.levels or self.levels < 1:
            raise ValueError(f"levels must be a positive integer, got {self.levels}")


ProcessSpec = Union[BrownianMotion, FractionalBM, RiemannLiouville, SmoothSine, IteratedFBM]


@dataclass(frozen=True)
class SmoothnessClassParams:
    """Hölder index/bound of the mean and path smoothness/envelope bound."""

    alpha: float
    L: float
    beta: float
    C_Z: float

    def __post_init__(self):
        if min(self.alpha, self.L, self.beta, self.C_Z) <= 0:
            raise ValueError("all smoothness class parameters must be positive")


@dataclass(frozen=True, eq=False)
class PathSample:
    grid: np.ndarray
    values: np.ndarray
    spec: ProcessSpec
    seed: object = None

    def __post_init__(self):
        if self.grid.shape != self.values.shape:
            raise ValueError("grid and values differ in length")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("path contains non-finite values")

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t", "value"])
        for t, v in zip(self.grid, self.values):
            writer.writerow([repr(float(t)), repr(float(v))])
        return buf.getvalue()


def parse_process(obj) -> ProcessSpec | None:
    """Build a spec from a config entry like ``{"kind": "fbm", "H": 0.3}``.

    ``None``/``"none"`` means no process (``Z = 0``).
    """
    if obj is None:
        return None
    if isinstance(obj, str):
        obj = {"kind": obj}
    kind = str(obj.get("kind", "")).lower()
    if kind in ("none", "zero", ""):
        return None
    if kind in ("bm", "brownian", "brownian_motion"):
        return BrownianMotion()
    if kind == "fbm":
        return FractionalBM(float(obj["H"]))
    if kind in ("rl", "rl_fbm", "riemann_liouville"):
        return RiemannLiouville(float(obj["beta"]))
    if kind in ("smooth", "smooth_sine"):
        return SmoothSine()
    if kind in ("iterated_fbm", "ifbm"):
        return IteratedFBM(float(obj["H"]), int(obj.get("levels", 1)))
    raise ValueError(f"unknown process kind {kind!r}")


def process_to_dict(spec: ProcessSpec | None) -> dict:
    if spec is None:
        return {"kind": "none"}
    if isinstance(spec, BrownianMotion):
        return {"kind": "bm"}
    if isinstance(spec, FractionalBM):
        return {"kind": "fbm", "H": spec.H}
    if isinstance(spec, RiemannLiouville):
        return {"kind": "rl_fbm", "beta": spec.beta}
    if isinstance(spec, SmoothSine):
        return {"kind": "smooth_sine"}
    return {"kind": "iterated_fbm", "H": spec.H, "levels": spec.levels}


def make_rng(seed) -> np.random.Generator:
    """Generator from an int, a tuple ``(master, *keys)`` or an existing one.

    Tuples map to ``SeedSequence(master, spawn_key=keys)`` so that streams
    for different replicate indices are independent and order-free. String
    keys are mapped to integers by CRC-32.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, tuple):
        keys = tuple(zlib.crc32(k.encode()) if isinstance(k, str) else int(k) for k in seed[1:])
        return np.random.default_rng(np.random.SeedSequence(seed[0], spawn_key=keys))
    return np.random.default_rng(seed)


# ---------------------------------------------------------------- covariances

def fbm_covariance(H: float, s, t) -> np.ndarray:
    s, t = np.asarray(s, dtype=float), np.asarray(t, dtype=float)
    return 0.5 * (s ** (2 * H) + t ** (2 * H) - np.abs(t - s) ** (2 * H))


def _rl_entry(beta: float, s: float, t: float) -> float:
    lo, hi = min(s, t), max(s, t)
    if lo <= 0.0:
        return 0.0
    if lo == hi:
        return lo ** (2 * beta) / (2 * beta)
    a = beta - 0.5
    # (lo - u)^a goes into the algebraic weight so quad handles a < 0 at u = lo
    val, _ = integrate.quad(lambda u: (hi - u) ** a, 0.0, lo, weight="alg",
                            wvar=(0.0, a), epsabs=1e-10, epsrel=1e-10, limit=200)
    return val


def rl_covariance(beta: float, s, t) -> np.ndarray:
    """``int_0^min(s,t) (s-u)^(beta-1/2) (t-u)^(beta-1/2) du`` by quadrature."""
    s, t = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(t, dtype=float))
    out = np.empty(s.shape)
    for idx in np.ndindex(s.shape):
        out[idx] = _rl_entry(beta, float(s[idx]), float(t[idx]))
    return out


def rl_covariance_closed_form(beta: float, s: float, t: float) -> float:
    """Hypergeometric closed form of the same integral, for cross-checking."""
    lo, hi = min(s, t), max(s, t)
    if lo <= 0:
        return 0.0
    if lo == hi:
        return lo ** (2 * beta) / (2 * beta)
    a = beta - 0.5
    gap = hi - lo
    return gap**a * lo ** (a + 1) / (a + 1) * hyp2f1(-a, a + 1, a + 2, -lo / gap)


def smooth_sine_covariance(s, t) -> np.ndarray:
    s, t = np.asarray(s, dtype=float), np.asarray(t, dtype=float)
    return (4 / 9) * np.sin(np.pi * s) * np.sin(np.pi * t) + (8 / 9) * np.cos(np.pi * s) * np.cos(np.pi * t)


def smooth_sine_derivative_covariance(s, t) -> np.ndarray:
    """Covariance of the derivative process, ``d^2/ds dt`` of the kernel."""
    s, t = np.asarray(s, dtype=float), np.asarray(t, dtype=float)
    return np.pi**2 * ((4 / 9) * np.cos(np.pi * s) * np.cos(np.pi * t)
                       + (8 / 9) * np.sin(np.pi * s) * np.sin(np.pi * t))


def covariance_matrix(spec: ProcessSpec, grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if isinstance(spec, BrownianMotion):
        return np.minimum.outer(grid, grid)
    if isinstance(spec, FractionalBM):
        return fbm_covariance(spec.H, grid[:, None], grid[None, :])
    if isinstance(spec, RiemannLiouville):
        n = grid.size
        out = np.empty((n, n))
        for i in range(n):
            for j in range(i, n):
                out[i, j] = out[j, i] = _rl_entry(spec.beta, grid[i], grid[j])
        return out
    if isinstance(spec, SmoothSine):
        return smooth_sine_covariance(grid[:, None], grid[None, :])
    raise TypeError(f"no closed covariance for {spec!r}")


# ------------------------------------------------------------------- sampling

_JITTERS = (0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8)


def _factor(C: np.ndarray) -> np.ndarray:
    scale = float(np.max(np.diag(C))) if C.size else 1.0
    for jitter in _JITTERS:
        try:
            return np.linalg.cholesky(C + jitter * scale * np.eye(C.shape[0]))
        except np.linalg.LinAlgError:
            continue
    raise NumericalError(
        "covariance factorisation failed even with relative jitter 1e-8; "
        "thin the grid or drop near-duplicate points"
    )


@lru_cache(maxsize=32)
def _cached_factor(spec, key: bytes, n: int):
    grid = np.frombuffer(key, dtype=float, count=n)
    keep = np.flatnonzero(np.diag(covariance_matrix(spec, grid)) > 0)
    C = covariance_matrix(spec, grid[keep])
    L = _factor(C)
    L.setflags(write=False)
    return keep, L


def gaussian_factor(spec: ProcessSpec, grid):
    """``(keep, L)`` with ``C[keep][:, keep] = L L'``; cached per (spec, grid)."""
    grid = np.ascontiguousarray(grid, dtype=float)
    return _cached_factor(spec, grid.tobytes(), grid.size)


def _check_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float).ravel()
    if grid.size == 0 or np.any(np.diff(grid) <= 0) or grid[0] < 0 or grid[-1] > 1:
        raise ValueError("grid must be strictly increasing inside [0, 1]")
    return grid


def _integrate_from_zero(grid: np.ndarray, values: np.ndarray) -> np.ndarray:
    # values: (n, p) paths vanishing at t=0; trapezoid from 0 including an implicit origin
    if grid[0] > 0:
        g = np.concatenate([[0.0], grid])
        v = np.concatenate([np.zeros((values.shape[0], 1)), values], axis=1)
        return integrate.cumulative_trapezoid(v, g, axis=1, initial=0.0)[:, 1:]
    return integrate.cumulative_trapezoid(values, grid, axis=1, initial=0.0)


def sample_paths(spec: ProcessSpec, grid, n: int, rng) -> np.ndarray:
    """``(n, p)`` array of independent paths on ``grid``."""
    grid = _check_grid(grid)
    rng = make_rng(rng)
    if isinstance(spec, SmoothSine):
        N = rng.standard_normal((n, 2))
        return (2 / 3) * N[:, :1] * np.sin(np.pi * grid) + (np.sqrt(8) / 3) * N[:, 1:] * np.cos(np.pi * grid)
    if isinstance(spec, IteratedFBM):
        out = sample_paths(FractionalBM(spec.H), grid, n, rng)
        for _ in range(spec.levels):
            out = _integrate_from_zero(grid, out)
        return out
    keep, L = gaussian_factor(spec, grid)
    out = np.zeros((n, grid.size))
    out[:, keep] = rng.standard_normal((n, keep.size)) @ L.T
    return out


def sample_fbm(H: float, grid, rng_seed=None) -> PathSample:
    spec = FractionalBM(H)
    grid = _check_grid(grid)
    return PathSample(grid, sample_paths(spec, grid, 1, rng_seed)[0], spec, rng_seed)


def sample_rl_fbm(beta: float, grid, rng_seed=None) -> PathSample:
    spec = RiemannLiouville(beta)
    grid = _check_grid(grid)
    return PathSample(grid, sample_paths(spec, grid, 1, rng_seed)[0], spec, rng_seed)


def sample_smooth_sine(grid, rng_seed=None) -> PathSample:
    spec = SmoothSine()
    grid = _check_grid(grid)
    return PathSample(grid, sample_paths(spec, grid, 1, rng_seed)[0], spec, rng_seed)


def sample_iterated_fbm(H: float, levels: int, grid, rng_seed=None) -> PathSample:
    spec = IteratedFBM(H, levels)
    grid = _check_grid(grid)
    return PathSample(grid, sample_paths(spec, grid, 1, rng_seed)[0], spec, rng_seed)


def empirical_holder_exponent(path: PathSample, max_lag: int = 16):
    """Scaling exponent of root-mean-square increments over dyadic lags.

    Fits ``log RMS(z(t + l) - z(t))`` against ``log(l * dt)`` for lags
    ``l = 1, 2, 4, ..., max_lag`` (in grid steps) and returns
    ``(slope, standard_error)``. For fractional Brownian motion the RMS
    increment is exactly ``(l dt)^H``. Uses the mean grid step, so it is
    meant for (near) equidistant grids.
    """
    t, z = np.asarray(path.grid), np.asarray(path.values)
    if t.size < 64:
        raise ValueError("need at least 64 grid points")
    dt = float(np.mean(np.diff(t)))
    lags = [1 << k for k in range(int(np.log2(max_lag)) + 1) if (1 << k) < t.size // 4]
    rms = np.array([np.sqrt(np.mean((z[lag:] - z[:-lag]) ** 2)) for lag in lags])
    if np.any(rms <= 0) or not np.all(np.isfinite(rms)):
        raise UndefinedExponentError("path has vanishing increments; exponent undefined")
    fit = stats.linregress(np.log(np.array(lags) * dt), np.log(rms))
    return float(fit.slope), float(fit.stderr)
