"""Monte Carlo experiments for the mean-derivative estimator.

Every replicate draws from its own random stream keyed by
``(seed, *keys, replicate)``, so results do not depend on the number of
worker threads or on the order replicates are run in.

Experiments that only need row means (sweeps, rate tables, CLT check) draw
them directly: for Gaussian processes and Gaussian noise the mean of ``n``
independent curves is equal in distribution to a single path scaled by
``1/sqrt(n)`` plus noise with variance ``sigma^2/n``.
"""

from __future__ import annotations

import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from scipy import stats

from .design import midpoint_grid
from .estimator import FunctionalDataset
from .exceptions import ConfigError
from .meanfuncs import MeanFunction, get_mean
from .processes import (
    BrownianMotion,
    ProcessSpec,
    SmoothSine,
    covariance_matrix,
    make_rng,
    parse_process,
    process_to_dict,
    sample_paths,
)
from .weights import local_poly_weights, weight_matrix

__all__ = [
    "SimConfig",
    "ErrorDecomposition",
    "SweepResult",
    "RateRow",
    "CLTResult",
    "TABLE1_N",
    "TABLE1_H",
    "TABLE1_ROUGH",
    "TABLE1_SMOOTH",
    "eval_interval",
    "simulate_components",
    "simulate_dataset",
    "error_decomposition",
    "bandwidth_sweep",
    "rate_table",
    "rate_slopes",
    "clt_bandwidth_window",
    "mse_optimal_bandwidth",
    "clt_experiment",
]

# published rate table: sample sizes, bandwidths and scaled sup-errors
TABLE1_N = (10, 20, 40, 80, 160, 240, 480, 800, 1600)
TABLE1_H = (0.34, 0.31, 0.28, 0.25, 0.22, 0.19, 0.16, 0.13, 0.1)
TABLE1_ROUGH = (2.690, 2.711, 2.665, 2.657, 2.658, 2.643, 2.644, 2.581, 2.591)
TABLE1_SMOOTH = (3.431, 3.595, 3.418, 3.562, 3.466, 3.490, 3.592, 3.690, 3.678)

NOISES = ("gaussian", "uniform")

# sweep errors this close to the minimum are treated as equal (rounding noise)
TIE_TOL = 1e-10


@dataclass
class SimConfig:
    """Simulation setting for ``Y_ij = mu(x_j) + Z_i(x_j) + eps_ij`` on a midpoint grid."""

    n: int = 10
    p: int = 101
    h_grid: list = field(default_factory=lambda: [0.1])
    mean: str = "sine_gauss"
    mean_coeffs: list | None = None
    process: ProcessSpec | None = field(default_factory=BrownianMotion)
    sigma: float = 0.5
    noise: str = "gaussian"
    s: int = 1
    m: int = 3
    N: int = 1
    seed: int = 0
    trim: bool | float = True
    c: float = 2.0
    h0: float = 0.5

    def __post_init__(self):
        self.h_grid = [float(h) for h in np.atleast_1d(self.h_grid)]
        self.validate()

    def validate(self):
        if int(self.n) != self.n or self.n < 1:
            raise ConfigError("must be a positive integer", "n")
        if int(self.p) != self.p or self.p < 2:
            raise ConfigError("must be an integer >= 2", "p")
        if int(self.N) != self.N or self.N < 1:
            raise ConfigError("must be a positive integer", "N")
        if not self.sigma >= 0:
            raise ConfigError("must be non-negative", "sigma")
        if self.noise not in NOISES:
            raise ConfigError(f"must be one of {NOISES}", "noise")
        if self.s < 0 or self.m < self.s:
            raise ConfigError(f"need 0 <= s <= m, got s={self.s}, m={self.m}", "m")
        if not self.h_grid:
            raise ConfigError("needs at least one bandwidth", "h_grid")
        if not isinstance(self.trim, bool):
            try:
                eval_interval(0.0, self.trim)
            except (TypeError, ValueError) as exc:
                raise ConfigError(str(exc), "trim") from None
        lo = self.c / self.p
        for h in self.h_grid:
            if not lo < h <= self.h0:
                raise ConfigError(
                    f"bandwidth {h:g} outside (c/p, h0] = ({lo:g}, {self.h0:g}]", "h_grid"
                )
        try:
            get_mean(self.mean, self.mean_coeffs)
        except ValueError as exc:
            raise ConfigError(str(exc), "mean") from None

    @property
    def mean_function(self) -> MeanFunction:
        return get_mean(self.mean, self.mean_coeffs)

    @property
    def grid(self):
        return midpoint_grid(self.p)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["process"] = process_to_dict(self.process)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, obj: dict) -> "SimConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown field(s) {sorted(unknown)}", sorted(unknown)[0])
        obj = dict(obj)
        if "process" in obj:
            try:
                obj["process"] = parse_process(obj["process"])
            except (KeyError, ValueError) as exc:
                raise ConfigError(str(exc), "process") from None
        return cls(**obj)


# ------------------------------------------------------------------ sampling

def _noise(cfg: SimConfig, rng, shape) -> np.ndarray:
    if cfg.noise == "gaussian":
        return cfg.sigma * rng.standard_normal(shape)
    return cfg.sigma * np.sqrt(3.0) * rng.uniform(-1.0, 1.0, shape)


def simulate_components(cfg: SimConfig, replicate: int):
    """``(mu on grid, Z (n, p), eps (n, p))`` for one replicate."""
    x = cfg.grid.axes[0]
    rng = make_rng((cfg.seed, replicate))
    mu = cfg.mean_function(x)
    Z = np.zeros((cfg.n, cfg.p)) if cfg.process is None else sample_paths(cfg.process, x, cfg.n, rng)
    eps = _noise(cfg, rng, (cfg.n, cfg.p))
    return mu, Z, eps


def simulate_dataset(cfg: SimConfig, replicate: int = 0) -> FunctionalDataset:
    mu, Z, eps = simulate_components(cfg, replicate)
    return FunctionalDataset(cfg.grid, mu + Z + eps)


def _mean_components(cfg: SimConfig, key: tuple):
    # row means (Zbar, epsbar) of one replicate; exact-in-distribution shortcut when Gaussian
    if cfg.noise != "gaussian":
        _, Z, eps = simulate_components(cfg, key[-1])
        return Z.mean(axis=0), eps.mean(axis=0)
    rng = make_rng((cfg.seed,) + tuple(key))
    x = cfg.grid.axes[0]
    root = np.sqrt(cfg.n)
    zbar = np.zeros(cfg.p) if cfg.process is None else sample_paths(cfg.process, x, 1, rng)[0] / root
    ebar = cfg.sigma * rng.standard_normal(cfg.p) / root
    return zbar, ebar


def _draw(cfg: SimConfig, keys, workers: int = 1):
    # stacked (p, R) matrices of mean process and mean noise, in key order
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda k: _mean_components(cfg, k), keys))
    else:
        parts = [_mean_components(cfg, k) for k in keys]
    Z = np.stack([a for a, _ in parts], axis=1)
    E = np.stack([b for _, b in parts], axis=1)
    return Z, E


def eval_interval(h: float, trim) -> tuple[float, float]:
    """Evaluation interval: ``[h, 1-h]`` (``True``), ``[0, 1]`` (``False``) or ``[a, 1-a]``."""
    if trim is True:
        return h, 1.0 - h
    if trim is False or trim is None:
        return 0.0, 1.0
    a = float(trim)
    if not 0 <= a < 0.5:
        raise ValueError(f"trim margin must lie in [0, 0.5), got {a}")
    return a, 1.0 - a


@lru_cache(maxsize=48)
def _weights(p: int, h: float, s: int, m: int, trim):
    grid = midpoint_grid(p)
    x = grid.axes[0]
    lo, hi = eval_interval(h, trim)
    ev = x[(x >= lo) & (x <= hi)]
    W, flags = weight_matrix(grid, ev, h, s, m)
    W.setflags(write=False)
    return ev, W, flags


# ----------------------------------------------------------- decomposition

@dataclass
class ErrorDecomposition:
    """Pointwise error components at the evaluation points.

    ``bias`` is the smoothing bias of the mean, ``noise`` the averaged
    observation noise and ``process`` the averaged random paths, each pushed
    through the weights; ``total`` is the estimate minus the target.
    """

    points: np.ndarray
    bias: np.ndarray
    noise: np.ndarray
    process: np.ndarray
    total: np.ndarray
    h: float

    def sup(self) -> dict:
        return {k: float(np.max(np.abs(getattr(self, k))))
                for k in ("bias", "noise", "process", "total")}

    @property
    def identity_residual(self) -> float:
        return float(np.max(np.abs(self.bias + self.noise + self.process - self.total)))


def error_decomposition(cfg: SimConfig, replicate: int, h: float) -> ErrorDecomposition:
    """Decompose one replicate's estimation error at bandwidth ``h``.

    Simulates all ``n`` curves; the total is recomputed from the full row
    means, independently of the three components.
    """
    ev, W, flags = _weights(cfg.p, float(h), cfg.s, cfg.m, cfg.trim)
    ok = ~flags
    ev, W = ev[ok], W[ok]
    mu, Z, eps = simulate_components(cfg, replicate)
    target = cfg.mean_function.derivative(ev, cfg.s)
    ybar = (mu + Z + eps).mean(axis=0)
    return ErrorDecomposition(
        points=ev,
        bias=W @ mu - target,
        noise=W @ eps.mean(axis=0),
        process=W @ Z.mean(axis=0),
        total=W @ ybar - target,
        h=float(h),
    )


# ------------------------------------------------------------------- sweeps

@dataclass
class SweepResult:
    bandwidths: np.ndarray
    total: np.ndarray
    bias: np.ndarray
    noise: np.ndarray
    process: np.ndarray
    identity_residual: float
    best_h: float
    n: int
    p: int

    def rows(self):
        """Tidy rows ``(p, n, h, component, value)``."""
        for k, h in enumerate(self.bandwidths):
            for comp in ("total", "bias", "noise", "process"):
                yield self.p, self.n, float(h), comp, float(getattr(self, comp)[k])


def bandwidth_sweep(cfg: SimConfig, workers: int = 1, keys: tuple = ()) -> SweepResult:
    """Mean sup-norm error (and its components) over ``cfg.h_grid``.

    Uses common random numbers across bandwidths. Bandwidths whose weights
    are singular anywhere on the evaluation set are skipped with a warning;
    errors within ``TIE_TOL`` (relative to ``1 + min``) of the minimum count
    as ties, which go to the smallest bandwidth.
    """
    hs = np.sort(np.asarray(cfg.h_grid, dtype=float))
    Z, E = _draw(cfg, [tuple(keys) + (r,) for r in range(cfg.N)], workers)
    mean = cfg.mean_function
    x = cfg.grid.axes[0]
    mu = mean(x)
    out = {k: np.full(hs.size, np.nan) for k in ("total", "bias", "noise", "process")}
    resid = 0.0
    for k, h in enumerate(hs):
        ev, W, flags = _weights(cfg.p, float(h), cfg.s, cfg.m, cfg.trim)
        if np.any(flags):
            warnings.warn(f"bandwidth {h:g} skipped: degenerate weights")
            continue
        bias = W @ mu - mean.derivative(ev, cfg.s)
        I2 = W @ E
        I3 = W @ Z
        total = W @ (mu[:, None] + Z + E) - mean.derivative(ev, cfg.s)[:, None]
        resid = max(resid, float(np.max(np.abs(bias[:, None] + I2 + I3 - total))))
        out["total"][k] = np.mean(np.max(np.abs(total), axis=0))
        out["bias"][k] = np.max(np.abs(bias))
        out["noise"][k] = np.mean(np.max(np.abs(I2), axis=0))
        out["process"][k] = np.mean(np.max(np.abs(I3), axis=0))
    if np.all(np.isnan(out["total"])):
        raise ConfigError("every bandwidth is degenerate", "h_grid")
    tot = out["total"]
    lo = np.nanmin(tot)
    best = float(hs[np.flatnonzero(tot <= lo + TIE_TOL * (1.0 + lo))[0]])
    return SweepResult(hs, out["total"], out["bias"], out["noise"], out["process"],
                       resid, best, cfg.n, cfg.p)


# --------------------------------------------------------------- rate table

@dataclass
class RateRow:
    n: int
    h: float
    kind: str
    mean_sup: float

    @property
    def scaled(self) -> float:
        """``sqrt(n h) E|I|`` for rough paths, ``sqrt(n) E|I|`` for smooth ones."""
        rate = np.sqrt(self.n * self.h) if self.kind == "rough" else np.sqrt(self.n)
        return float(rate * self.mean_sup)


def _kind_process(kind: str) -> ProcessSpec:
    if kind == "rough":
        return BrownianMotion()
    if kind == "smooth":
        return SmoothSine()
    raise ValueError(f"process kind must be 'rough' or 'smooth', got {kind!r}")


def rate_table(kind: str, n_list, p: int, N: int, h_list, s: int = 1, m: int = 3,
               trim=0.05, seed: int = 0, workers: int = 1) -> list[RateRow]:
    """Mean sup-norm of the process term ``sum_j w_j Zbar(x_j)`` per ``n``.

    ``kind`` selects Brownian motion (``"rough"``) or the smooth
    trigonometric process (``"smooth"``). The defaults (local cubic, sup
    over ``[0.05, 0.95]``) reproduce the published table at its bandwidths.
    """
    n_list, h_list = list(n_list), list(h_list)
    if len(n_list) != len(h_list):
        raise ValueError("need one bandwidth per sample size")
    proc = _kind_process(kind)
    rows = []
    for a, (n, h) in enumerate(zip(n_list, h_list)):
        cfg = SimConfig(n=n, p=p, h_grid=[h], process=proc, sigma=0.0, s=s, m=m, N=N,
                        seed=seed, trim=trim, c=0.0, h0=1.0)
        Z, _ = _draw(cfg, [(kind, a, r) for r in range(N)], workers)
        _, W, flags = _weights(p, float(h), s, m, trim)
        I = W[~flags] @ Z
        rows.append(RateRow(int(n), float(h), kind, float(np.mean(np.max(np.abs(I), axis=0)))))
    return rows


def rate_slopes(n_list, p: int, N: int, h_grid, sigma: float = 0.5, s: int = 1, m: int = 2,
                trim=False, seed: int = 0, workers: int = 1) -> dict:
    """Log-log slope of the process-term sup-error in ``n`` at sweep-optimal bandwidths.

    For each process kind and each ``n`` a bandwidth sweep of the total
    error selects ``h``; the process-term mean sup-error at that ``h`` is
    regressed on ``n`` in log-log scale. A local quadratic fit is the
    default: its bias forces the optimal bandwidth to shrink with ``n``,
    which is what separates the two regimes at moderate sample sizes.
    """
    out = {}
    for kind in ("rough", "smooth"):
        hs, errs = [], []
        for a, n in enumerate(n_list):
            cfg = SimConfig(n=n, p=p, h_grid=list(h_grid), process=_kind_process(kind), sigma=sigma,
                            s=s, m=m, N=N, seed=seed, trim=trim)
            sw = bandwidth_sweep(cfg, workers, keys=("slope", kind, a))
            k = int(np.flatnonzero(sw.bandwidths == sw.best_h)[0])
            hs.append(sw.best_h)
            errs.append(float(sw.process[k]))
        slope = float(np.polyfit(np.log(n_list), np.log(errs), 1)[0])
        out[kind] = {"n": list(n_list), "h": hs, "mean_sup": errs, "slope": slope}
    return out


# ---------------------------------------------------------------------- CLT

def clt_bandwidth_window(n: int, p_total: int, p_min: int, d: int, s: int, alpha: float,
                         c1: float = 1.0, c2: float = 1.0, delta: float = 1.01):
    """Endpoints of the admissible CLT bandwidth interval for given constants."""
    if delta <= 1:
        raise ValueError("delta must exceed 1")
    L = np.log(p_total)
    lo = c1 * L ** (delta / (d + 2 * s)) * max((L / p_total) ** (1 / (2 * s + d)), 1 / p_min)
    hi = c2 * L ** (-delta) * (0.0 if np.isinf(alpha) else n ** (-1 / (2 * (alpha - s))))
    if np.isinf(alpha):
        hi = c2 * L ** (-delta)
    return float(lo), float(hi)


def _smooth_derivative_variance(x0: float, s: int) -> float:
    # d^s sin(pi x) = pi^s sin(pi x + s pi/2), likewise for cos
    phase = np.pi * x0 + s * np.pi / 2
    return float(np.pi ** (2 * s) * ((4 / 9) * np.sin(phase) ** 2 + (8 / 9) * np.cos(phase) ** 2))


def mse_optimal_bandwidth(n: int, p: int, sigma: float, x0: float, s: int, m: int,
                          h_grid, mean: MeanFunction, process: ProcessSpec | None):
    """Bandwidth minimising the exact finite-sample MSE of ``sqrt(n)(estimate - target)``.

    Uses the known mean and covariance; returns ``(h, table)`` with rows
    ``(h, sqrt(n) bias, variance)``.
    """
    grid = midpoint_grid(p)
    x = grid.axes[0]
    G = np.zeros((p, p)) if process is None else covariance_matrix(process, x)
    mu, target = mean(x), float(mean.derivative(x0, s))
    table = []
    for h in sorted(h_grid):
        try:
            ws = local_poly_weights(grid, x0, h, s, m)
        except ArithmeticError:
            continue
        w = ws.dense(p)
        table.append((float(h), float(np.sqrt(n) * (w @ mu - target)),
                      float(w @ G @ w + sigma**2 * w @ w)))
    if not table:
        raise ConfigError("no usable bandwidth", "h_grid")
    best = min(table, key=lambda r: r[1] ** 2 + r[2])
    return best[0], table


@dataclass
class CLTResult:
    statistics: np.ndarray
    mean: float
    variance: float
    target_variance: float
    ks: float
    ks_pvalue: float
    h: float
    m: int
    in_window: bool | None = None

    def summary(self) -> dict:
        return {k: v for k, v in asdict(self).items() if k != "statistics"}


def clt_experiment(n: int = 400, p: int = 400, N: int = 500, h: float | None = None,
                   x0: float = 0.5, sigma: float = 0.1, s: int = 1, m: int = 5,
                   seed: int = 0, mean: str = "sine_gauss", smooth: bool = True,
                   window: dict | None = None, workers: int = 1) -> CLTResult:
    """Empirical distribution of ``sqrt(n) (estimate - target)`` at ``x0``.

    With the smooth trigonometric process the limit is centred normal with
    variance ``d^(s,s) Gamma(x0, x0)``; the KS statistic is taken against
    it. ``h=None`` picks the exact-MSE-optimal bandwidth on a grid.
    ``window`` (keys ``alpha, c1, c2, delta``) checks ``h`` against the
    admissible CLT interval.
    """
    proc = SmoothSine() if smooth else None
    mfun = get_mean(mean)
    if h is None:
        h, _ = mse_optimal_bandwidth(n, p, sigma, x0, s, m, np.arange(0.02, 0.301, 0.005),
                                     mfun, proc)
    grid = midpoint_grid(p)
    ws = local_poly_weights(grid, x0, h, s, m)
    cfg = SimConfig(n=n, p=p, h_grid=[h], process=proc, sigma=sigma, s=s, m=m, N=N,
                    seed=seed, mean=mean, c=0.0, h0=1.0)
    Z, E = _draw(cfg, [("clt", r) for r in range(N)], workers)
    x = grid.axes[0]
    w = ws.dense(p)
    est = w @ (mfun(x)[:, None] + Z + E)
    stat = np.sqrt(n) * (est - float(mfun.derivative(x0, s)))
    target = _smooth_derivative_variance(x0, s) if smooth else 0.0
    var = float(np.var(stat, ddof=1)) if N > 1 else 0.0
    if target > 0:
        ks = stats.kstest(stat, stats.norm(0.0, np.sqrt(target)).cdf)
        ks_stat, ks_p = float(ks.statistic), float(ks.pvalue)
    else:
        ks_stat = ks_p = float("nan")
    in_window = None
    if window is not None:
        lo, hi = clt_bandwidth_window(n, p, p, 1, s, **window)
        in_window = bool(lo <= h <= hi)
    return CLTResult(stat, float(np.mean(stat)), var, target, ks_stat, ks_p, float(h), m, in_window)
