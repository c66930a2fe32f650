"""Monte Carlo oracle for the shifted jump-diffusion basket.

Terminal states are drawn from the exact law (no time stepping): correlated
Gaussians through an eigen-factor of the correlation, Poisson jump counts and,
conditional on N jumps, a N(N eta, N upsilon^2) log-jump sum.

Random numbers come from counter-based Philox streams keyed by
(seed, stream, batch index), so a batch always sees the same draws no matter
how many workers process the batches or in which order they finish.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .model import BasketSpec, validate_basket

_MAIN, _PILOT, _PATHS = 0, 1, 2
PILOT_FRACTION = 0.05


@dataclass(frozen=True)
class McConfig:
    paths: int = 100_000
    seed: int = 0
    batch: int = 1 << 16
    antithetic: bool = False
    workers: int | None = None

    def __post_init__(self):
        if self.paths < 1:
            raise ValueError("paths must be positive")
        if self.batch < 2:
            raise ValueError("batch must be at least 2")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def n_workers(self) -> int:
        if self.workers is not None:
            return max(1, int(self.workers))
        return max(1, int(os.environ.get("HB_THREADS", "1") or 1))


@dataclass(frozen=True)
class McEstimate:
    value: float
    std_error: float
    paths: int
    cv_beta: float
    plain_value: float = math.nan
    plain_std_error: float = math.nan
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "std_error": self.std_error,
            "paths": self.paths,
            "cv_beta": self.cv_beta,
            "plain_value": self.plain_value,
            "plain_std_error": self.plain_std_error,
            "degenerate": self.degenerate,
        }


@dataclass(frozen=True)
class MomentEstimate:
    order: np.ndarray
    value: np.ndarray
    std_error: np.ndarray
    paths: int


@dataclass(frozen=True)
class TerminalSample:
    spots: np.ndarray  # (n, assets) raw prices S_T
    basket_raw: np.ndarray  # B*_T = sum a_i S_T^(i)
    basket: np.ndarray  # shifted B_T


@dataclass(frozen=True)
class PathSet:
    times: np.ndarray  # t_0 = 0, t_1, ..., t_n
    spots: np.ndarray  # (paths, len(times), assets)
    basket_raw: np.ndarray  # (paths, len(times))
    basket: np.ndarray  # shifted basket at each time


# -- streams and factors --------------------------------------------------------


def stream(seed: int, *keys: int) -> np.random.Generator:
    """Counter-based generator for the substream (seed, *keys)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, *keys])))


def correlation_factor(corr: np.ndarray) -> np.ndarray:
    """L with L L' = corr, via eigh with negative eigenvalues clipped to zero."""
    w, v = np.linalg.eigh(np.asarray(corr, dtype=float))
    return v * np.sqrt(np.clip(w, 0.0, None))


def _batches(total: int, size: int) -> list[tuple[int, int]]:
    return [(b, min(size, total - b * size)) for b in range(-(-total // size))]


def _map(fn, items, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def _log_increments(spec: BasketSpec, dt: float, n: int, rng: np.random.Generator,
                    factor: np.ndarray, antithetic: bool, drifts=None) -> np.ndarray:
    """Log-driver increments (r + omega) dt + sigma dV + sum log(Y + 1) over dt, shape (n, assets)."""
    d = spec.n_assets
    half = n // 2 if antithetic else n
    z = rng.standard_normal((half, d)) @ factor.T
    counts = rng.poisson(spec.lambdas * dt, size=(half, d))
    jz = rng.standard_normal((half, d))
    if antithetic:
        z = np.concatenate((z, -z))
        counts = np.concatenate((counts, counts))
        jz = np.concatenate((jz, -jz))
    growth = spec.rate if drifts is None else drifts
    drift = (growth + spec.drift_terms.omega) * dt
    jumps = counts * spec.etas + np.sqrt(counts) * spec.upsilons * jz
    return drift + spec.vols * math.sqrt(dt) * z + jumps


def _terminal_batch(spec: BasketSpec, t: float, n: int, rng, factor, antithetic) -> TerminalSample:
    x = _log_increments(spec, t, n, rng, factor, antithetic)
    growth = spec.effective_spots * np.exp(x)
    shift = spec.shift_signs * spec.shifts * math.exp(spec.rate * t)
    spots = growth + shift
    return TerminalSample(spots=spots, basket_raw=spots @ spec.weights, basket=growth @ spec.weights)


def _even(n: int, antithetic: bool) -> int:
    return n + (n % 2) if antithetic else n


def iter_terminal(spec: BasketSpec, t: float | None = None, config: McConfig = McConfig(),
                  stream_id: int = _MAIN, paths: int | None = None):
    """Yield TerminalSample batches in batch order."""
    t = spec.maturity if t is None else t
    factor = correlation_factor(spec.correlation)
    total = config.paths if paths is None else paths
    for b, n in _batches(total, config.batch):
        rng = stream(config.seed, stream_id, b)
        yield _terminal_batch(spec, t, _even(n, config.antithetic), rng, factor, config.antithetic)


def sample_terminal(spec: BasketSpec, t: float | None = None, config: McConfig = McConfig()) -> TerminalSample:
    """Exact draws of (S_T, B*_T, B_T); memory grows with paths x assets."""
    spec = validate_basket(spec)
    parts = list(iter_terminal(spec, t, config))
    return TerminalSample(
        spots=np.concatenate([p.spots for p in parts]),
        basket_raw=np.concatenate([p.basket_raw for p in parts]),
        basket=np.concatenate([p.basket for p in parts]),
    )


# -- streaming statistics -------------------------------------------------------


class _Welford:
    """Mean and M2 of vectors, combined batch-wise in a fixed order (Chan et al.)."""

    def __init__(self, width: int):
        self.n = 0
        self.mean = np.zeros(width)
        self.m2 = np.zeros(width)

    def add(self, x: np.ndarray):
        x = np.atleast_2d(x)
        nb = x.shape[0]
        if nb == 0:
            return
        mb = x.mean(axis=0)
        m2b = ((x - mb) ** 2).sum(axis=0)
        n = self.n + nb
        delta = mb - self.mean
        self.mean = self.mean + delta * nb / n
        self.m2 = self.m2 + m2b + delta**2 * self.n * nb / n
        self.n = n

    @property
    def std_error(self) -> np.ndarray:
        if self.n < 2:
            return np.full_like(self.mean, math.nan)
        return np.sqrt(self.m2 / (self.n - 1) / self.n)


def _pairs(x: np.ndarray, antithetic: bool) -> np.ndarray:
    """Average antithetic partners so the SE is computed on independent units."""
    if not antithetic:
        return x
    half = x.shape[0] // 2
    return 0.5 * (x[:half] + x[half:])


def mc_price(spec: BasketSpec, config: McConfig = McConfig()) -> McEstimate:
    """Discounted call price with the control variate e^{-rT} B_T (known mean B_0).

    The control-variate coefficient is estimated on a pilot of 5% of the path
    budget drawn from its own stream and applied to the remaining paths.
    """
    spec = validate_basket(spec)
    disc = math.exp(-spec.rate * spec.maturity)
    b0, strike = spec.b0, spec.shifted_k
    n_pilot = max(2, math.ceil(PILOT_FRACTION * config.paths))
    n_main = max(2, config.paths - n_pilot)

    pilot_y, pilot_c = [], []
    for s in iter_terminal(spec, config=config, stream_id=_PILOT, paths=n_pilot):
        pilot_y.append(disc * np.maximum(s.basket - strike, 0.0))
        pilot_c.append(disc * s.basket)
    py, pc = np.concatenate(pilot_y), np.concatenate(pilot_c)
    var_c = float(np.var(pc))
    beta = float(np.mean((py - py.mean()) * (pc - pc.mean())) / var_c) if var_c > 0 else 0.0

    factor = correlation_factor(spec.correlation)

    def run(item):
        b, n = item
        s = _terminal_batch(spec, spec.maturity, _even(n, config.antithetic),
                            stream(config.seed, _MAIN, b), factor, config.antithetic)
        y = disc * np.maximum(s.basket - strike, 0.0)
        adj = y - beta * (disc * s.basket - b0)
        block = np.column_stack((_pairs(adj, config.antithetic), _pairs(y, config.antithetic)))
        return block, block.min(axis=0), block.max(axis=0)

    acc = _Welford(2)
    lo, hi = np.full(2, np.inf), np.full(2, -np.inf)
    for block, bmin, bmax in _map(run, _batches(n_main, config.batch), config.n_workers):
        acc.add(block)
        lo, hi = np.minimum(lo, bmin), np.maximum(hi, bmax)
    # a constant sample has zero spread; M2 alone can keep rounding noise
    constant = lo == hi
    se = np.where(constant, 0.0, acc.std_error)
    degenerate = bool(constant[0])
    n_used = acc.n * (2 if config.antithetic else 1)
    return McEstimate(value=float(acc.mean[0]), std_error=float(se[0]), paths=n_used, cv_beta=beta,
                      plain_value=float(acc.mean[1]), plain_std_error=float(se[1]),
                      degenerate=degenerate)


def mc_moments(spec: BasketSpec, t: float | None = None, k_max: int = 4,
               config: McConfig = McConfig()) -> MomentEstimate:
    """Sample moments E[B_t^k], k = 1..k_max, of the shifted basket.

    The standard errors are s_k / sqrt(n); for a sample mean this is exactly
    the leave-one-out jackknife standard error.
    """
    if not 1 <= k_max <= 6:
        raise ValueError("k_max must be in 1..6")
    spec = validate_basket(spec)
    t = spec.maturity if t is None else t
    factor = correlation_factor(spec.correlation)
    powers = np.arange(1, k_max + 1)

    def run(item):
        b, n = item
        s = _terminal_batch(spec, t, _even(n, config.antithetic), stream(config.seed, _MAIN, b),
                            factor, config.antithetic)
        return _pairs(s.basket[:, None] ** powers, config.antithetic)

    acc = _Welford(k_max)
    for block in _map(run, _batches(config.paths, config.batch), config.n_workers):
        acc.add(block)
    return MomentEstimate(order=powers, value=acc.mean.copy(), std_error=acc.std_error,
                          paths=acc.n * (2 if config.antithetic else 1))


def simulate_paths(spec: BasketSpec, grid, config: McConfig = McConfig(), drifts=None) -> PathSet:
    """Asset paths on ``grid`` built from exact increments of the log-drivers.

    The shift part of every asset grows as delta_0 e^{rt}; the remainder is
    S~_0 exp(X_t) with X accumulated interval by interval.

    Args:
        spec: basket to simulate.
        grid: strictly increasing observation times after 0.
        config: path count, seed and batching.
        drifts: optional per-asset growth rates replacing r in the diffusive
            part (a physical measure); None keeps the pricing measure.
    """
    spec = validate_basket(spec)
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or grid[0] <= 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing and start after 0")
    times = np.concatenate(([0.0], grid))
    factor = correlation_factor(spec.correlation)
    if drifts is not None:
        drifts = np.broadcast_to(np.asarray(drifts, dtype=float), (spec.n_assets,))
    n_paths = _even(config.paths, config.antithetic)
    out = np.empty((n_paths, times.size, spec.n_assets))
    start = 0
    for b, n in _batches(n_paths, config.batch):
        n = _even(n, config.antithetic)
        rng = stream(config.seed, _PATHS, b)
        x = np.zeros((n, spec.n_assets))
        out[start:start + n, 0] = spec.spots
        for j, dt in enumerate(np.diff(times), start=1):
            x = x + _log_increments(spec, dt, n, rng, factor, config.antithetic, drifts)
            shift = spec.shift_signs * spec.shifts * math.exp(spec.rate * times[j])
            out[start:start + n, j] = spec.effective_spots * np.exp(x) + shift
        start += n
    out = out[:start]
    shift_t = np.exp(spec.rate * times)[:, None] * (spec.shift_signs * spec.shifts)
    return PathSet(times=times, spots=out, basket_raw=out @ spec.weights,
                   basket=(out - shift_t) @ spec.weights)
