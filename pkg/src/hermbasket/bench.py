"""Randomized scenario benchmark: Hermite methods against a Monte Carlo oracle.

Scenarios follow the two parameter sets of the benchmark study.  Set 1 mixes
basket sizes (2-10, 11-15, 16-20, 21-50 assets with weights 0.5/0.3/0.1/0.1)
and draws jump means in [-0.3, 0]; Set 2 draws sizes uniformly in 2..50 and
jump means in [-0.3, 0.3].  Each scenario gets its own random stream keyed by
(seed, set, index) so the list is reproducible and prefix-stable.

Scoring per method:
    C1  number of scenarios where the method attains the minimum squared error
        (ties credited to every minimizer)
    C2  number of failures to price: relative error above 5% or no solution
    C3  root mean squared error over the scenarios the method could price
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import mc, pricer
from .hermite import MatchFailure
from .model import BasketSpec, ValidatedBasket, ZeroShiftedBasket, validate_basket
from .moments import MomentOverflow

SET1_RANGES = ((2, 10), (11, 15), (16, 20), (21, 50))
SET1_WEIGHTS = (0.5, 0.3, 0.1, 0.1)
RELATIVE_ERROR_LIMIT = 0.05
NOISE_MULTIPLE = 10.0
SIX_MOMENT_MAX_ASSETS = 10
SLICES = ("r<=0.05", "r>0.05", "T<=0.5", "T>0.5", "K/B<=0.98", "0.98<K/B<=1.02", "K/B>1.02", "Total")


@dataclass(frozen=True)
class ScenarioConfig:
    set_id: int = 1
    count: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.set_id not in (1, 2):
            raise ValueError("set_id must be 1 or 2")
        if self.count < 0:
            raise ValueError("count must be non-negative")


@dataclass
class MethodResult:
    scenario: int
    method: str
    price: float | None
    squared_error: float | None
    relative_error: float | None
    failure: str | None = None

    @property
    def succeeded(self) -> bool:
        return self.price is not None


@dataclass
class OracleResult:
    value: float
    std_error: float
    paths: int

    @property
    def noisy(self) -> bool:
        """Relative error is meaningless when the price sits inside the MC noise."""
        return abs(self.value) < NOISE_MULTIPLE * self.std_error


@dataclass
class BenchmarkResult:
    scenarios: list[ValidatedBasket]
    oracles: list[OracleResult]
    results: dict[str, list[MethodResult]]
    methods: list[str]
    table: dict = field(default_factory=dict)

    def rows(self) -> list[dict]:
        """One plot-ready row per scenario."""
        out = []
        for i, spec in enumerate(self.scenarios):
            o = self.oracles[i]
            row = {
                "scenario": i,
                "params_hash": params_hash(spec),
                "n_assets": spec.n_assets,
                "rate": spec.rate,
                "maturity": spec.maturity,
                "strike_ratio": strike_ratio(spec),
                "oracle": o.value,
                "oracle_se": o.std_error,
                "oracle_noisy": int(o.noisy),
            }
            for m in self.methods:
                r = self.results[m][i]
                row[f"{m}_price"] = "" if r.price is None else r.price
                row[f"{m}_error"] = "" if r.relative_error is None else r.relative_error
                row[f"{m}_failure"] = r.failure or ""
            out.append(row)
        return out


# -- scenario generation ---------------------------------------------------------


def random_correlation(n: int, rng: np.random.Generator) -> np.ndarray:
    """Gram construction: normalize G G' to unit diagonal, G iid standard normal n x n."""
    if n < 1:
        raise ValueError("n must be positive")
    g = rng.standard_normal((n, n))
    c = g @ g.T
    d = np.sqrt(np.diag(c))
    c = c / np.outer(d, d)
    c = 0.5 * (c + c.T)
    np.fill_diagonal(c, 1.0)
    return c


def _asset_count(set_id: int, rng: np.random.Generator) -> int:
    if set_id == 1:
        lo, hi = SET1_RANGES[rng.choice(len(SET1_RANGES), p=SET1_WEIGHTS)]
    else:
        lo, hi = 2, 50
    return int(rng.integers(lo, hi + 1))


def draw_basket(set_id: int, rng: np.random.Generator, n_assets: int | None = None) -> BasketSpec:
    """One random basket from the parameter ranges of ``set_id`` (unvalidated)."""
    n = _asset_count(set_id, rng) if n_assets is None else n_assets
    rate = rng.uniform(0.0, 0.1)
    maturity = rng.uniform(0.1, 1.0)
    spots = rng.uniform(70.0, 130.0, n)
    weights = rng.uniform(-1.0, 1.0, n)
    shifts = rng.uniform(-20.0, 20.0, n) * math.exp(-rate * maturity)
    signs = rng.choice([-1.0, 1.0], n)
    eta_lo, eta_hi = (-0.3, 0.0) if set_id == 1 else (-0.3, 0.3)
    spec = BasketSpec(
        spots=spots,
        vols=rng.uniform(0.1, 0.6, n),
        shifts=shifts,
        shift_signs=signs,
        lambdas=rng.uniform(0.0, 0.2, n),
        etas=rng.uniform(eta_lo, eta_hi, n),
        upsilons=rng.uniform(0.0, 0.3, n),
        weights=weights,
        correlation=random_correlation(n, rng),
        rate=rate,
        maturity=maturity,
        strike=0.0,
    )
    ratio = rng.uniform(0.95, 1.05)
    return spec.replace(strike=ratio * spec.raw_basket0)


def generate_scenarios(cfg: ScenarioConfig, stats: dict | None = None) -> list[ValidatedBasket]:
    """Reproducible list of validated random baskets.

    A draw whose shifted basket is exactly zero is redrawn from the same
    stream; the number of redraws is reported in ``stats["resamples"]``.
    """
    out, resamples = [], 0
    for i in range(cfg.count):
        rng = mc.stream(cfg.seed, cfg.set_id, i)
        while True:
            try:
                out.append(validate_basket(draw_basket(cfg.set_id, rng)))
                break
            except ZeroShiftedBasket:
                resamples += 1
    if stats is not None:
        stats["resamples"] = resamples
    return out


def params_hash(spec: BasketSpec) -> str:
    blob = json.dumps(spec.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def strike_ratio(spec: BasketSpec) -> float:
    return spec.strike / spec.raw_basket0 if spec.raw_basket0 != 0 else math.nan


def oracle_paths(n_assets: int) -> int:
    """MC envelope: 1e5 paths up to 10 assets, 1e6 up to 20, 4e6 beyond."""
    if n_assets <= 10:
        return 100_000
    if n_assets <= 20:
        return 1_000_000
    return 4_000_000


# -- evaluation -------------------------------------------------------------------


def _score(i: int, method: str, value: float | None, oracle: OracleResult, failure: str | None = None):
    if value is None or not math.isfinite(value):
        return MethodResult(i, method, None, None, None, failure or "non-finite price")
    err = value - oracle.value
    rel = abs(err) / abs(oracle.value) if oracle.value != 0 else math.inf
    return MethodResult(i, method, float(value), float(err * err), float(rel))


def price_method(spec: BasketSpec, method: str, i: int, oracle: OracleResult) -> MethodResult:
    if int(method[0]) == 6 and spec.n_assets > SIX_MOMENT_MAX_ASSETS:
        return MethodResult(i, method, None, None, None, "skipped")
    try:
        q = pricer.price(spec, method)
    except MatchFailure:
        return MethodResult(i, method, None, None, None, "match failure")
    except MomentOverflow:
        return MethodResult(i, method, None, None, None, "moment overflow")
    return _score(i, method, q.price, oracle)


def combine_4GAB(result_a: MethodResult, result_b: MethodResult) -> MethodResult:
    """Take whichever of 4GA/4GB matched the moments; if both did, score the worse one."""
    if result_a.scenario != result_b.scenario:
        raise ValueError("results refer to different scenarios")
    ok = [r for r in (result_a, result_b) if r.succeeded]
    if not ok:
        return MethodResult(result_a.scenario, "4GAB", None, None, None, "match failure")
    worst = max(ok, key=lambda r: r.squared_error)
    return MethodResult(worst.scenario, "4GAB", worst.price, worst.squared_error, worst.relative_error)


def _in_slice(name: str, spec: BasketSpec) -> bool:
    k = strike_ratio(spec)
    return {
        "r<=0.05": spec.rate <= 0.05,
        "r>0.05": spec.rate > 0.05,
        "T<=0.5": spec.maturity <= 0.5,
        "T>0.5": spec.maturity > 0.5,
        "K/B<=0.98": k <= 0.98,
        "0.98<K/B<=1.02": 0.98 < k <= 1.02,
        "K/B>1.02": k > 1.02,
        "Total": True,
    }[name]


def criteria(results: dict[str, list[MethodResult]], oracles: list[OracleResult],
             index: list[int]) -> dict[str, dict]:
    """C1-C3 per method over the scenarios in ``index``.

    Scenarios whose oracle is inside the MC noise are left out of C2 and C3
    and counted under "noisy"; skipped methods do not compete on a scenario.
    """
    out = {m: {"c1": 0, "c2": 0, "c3": math.nan, "priced": 0, "attempted": 0} for m in results}
    sq = {m: [] for m in results}
    noisy = 0
    for i in index:
        live = {m: r[i] for m, r in results.items() if r[i].failure != "skipped"}
        errors = [r.squared_error for r in live.values() if r.succeeded]
        if errors:
            best = min(errors)
            for m, r in live.items():
                if r.succeeded and r.squared_error == best:
                    out[m]["c1"] += 1
        if oracles[i].noisy:
            noisy += 1
            continue
        for m, r in live.items():
            out[m]["attempted"] += 1
            if not r.succeeded:
                out[m]["c2"] += 1
                continue
            out[m]["priced"] += 1
            sq[m].append(r.squared_error)
            if r.relative_error > RELATIVE_ERROR_LIMIT:
                out[m]["c2"] += 1
    for m in results:
        if sq[m]:
            out[m]["c3"] = math.sqrt(math.fsum(sq[m]) / len(sq[m]))
        att = out[m]["attempted"]
        out[m]["c2_fraction"] = out[m]["c2"] / att if att else math.nan
    return {"methods": out, "scenarios": len(index), "noisy": noisy}


def evaluate_methods(scenarios: list[BasketSpec], methods=("4GA", "4GB", "6GA", "6GB"),
                     mc_config: mc.McConfig | None = None, paths_oracle: int | None = None,
                     workers: int | None = None) -> BenchmarkResult:
    """Price every scenario with every method and with the MC oracle, then score.

    Args:
        scenarios: baskets to price.
        methods: Hermite methods; 4GAB is added when both 4GA and 4GB are present.
        mc_config: oracle seed and batching; the path count follows the
            asset-count envelope unless ``paths_oracle`` overrides it.
        paths_oracle: fixed oracle path count for every scenario.
        workers: scenario-level parallelism (defaults to HB_THREADS).
    """
    mc_config = mc_config or mc.McConfig()
    scenarios = [validate_basket(s) for s in scenarios]
    methods = list(methods)
    for m in methods:
        pricer.parse_method(m)

    def run(i):
        spec = scenarios[i]
        paths = paths_oracle or oracle_paths(spec.n_assets)
        cfg = mc.McConfig(paths=paths, seed=int(np.random.SeedSequence([mc_config.seed, i]).generate_state(
            1, np.uint64)[0]), batch=mc_config.batch, workers=1)
        est = mc.mc_price(spec, cfg)
        oracle = OracleResult(est.value, est.std_error, est.paths)
        return oracle, [price_method(spec, m, i, oracle) for m in methods]

    n_workers = workers if workers is not None else mc_config.n_workers
    done = mc._map(run, list(range(len(scenarios))), n_workers)
    oracles = [d[0] for d in done]
    results = {m: [d[1][j] for d in done] for j, m in enumerate(methods)}
    names = list(methods)
    if "4GA" in results and "4GB" in results:
        results["4GAB"] = [combine_4GAB(a, b) for a, b in zip(results["4GA"], results["4GB"])]
        names.append("4GAB")
    table = {}
    for name in SLICES:
        idx = [i for i, s in enumerate(scenarios) if _in_slice(name, s)]
        table[name] = criteria(results, oracles, idx)
    return BenchmarkResult(scenarios=scenarios, oracles=oracles, results=results, methods=names, table=table)
