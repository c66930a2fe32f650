"""Discrete Delta-hedging backtest of a short basket call.

Along every simulated path the option is repriced at each rebalance date
t_i = i T / n with the remaining maturity T - t_i and the current spots; the
Delta with respect to the shifted basket sets the position in the raw basket
B*, the rest sits in a money account accruing at r.  At T the position is
unwound and the call settled at (B*_T - K*)^+.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import mc, pricer
from .hermite import MatchFailure
from .model import BasketSpec, validate_basket

SELF_FINANCING_TOL = 1e-10


@dataclass
class HedgePathRecord:
    deltas: np.ndarray  # Delta at t_0..t_{n-1}
    basket_values: np.ndarray  # raw basket B* at t_0..t_n
    method_prices: np.ndarray  # Hermite price at t_0..t_{n-1}
    terminal_error: float
    carried: int = 0
    mc_prices: np.ndarray | None = None  # nested MC c_{t_0}..c_{t_n}, if computed

    @property
    def delta_vol(self) -> float:
        return float(np.std(self.deltas, ddof=1)) if self.deltas.size > 1 else 0.0


@dataclass
class HedgeReport:
    c4: float
    c5: float
    c6: float
    c7: float
    c8: float
    c9: float
    c10: float
    n_paths: int
    n_rebalance: int
    method: str
    carried_steps: int
    max_self_financing_gap: float
    records: list[HedgePathRecord] = field(default_factory=list, repr=False)

    def summary(self) -> dict:
        return {
            "method": self.method,
            "paths": self.n_paths,
            "rebalances": self.n_rebalance,
            "c4": self.c4,
            "c5": self.c5,
            "c6": self.c6,
            "c7": self.c7,
            "c8": self.c8,
            "c9": self.c9,
            "c10": self.c10,
            "carried_steps": self.carried_steps,
            "max_self_financing_gap": self.max_self_financing_gap,
        }


def state_at(spec: BasketSpec, spots, t: float) -> BasketSpec:
    """The option seen at time t: current spots, shifts grown to delta_0 e^{rt}, maturity T - t.

    The shifted strike is unchanged: K* - sum a b delta_0 e^{rt} e^{r(T-t)} = K.
    """
    return spec.replace(spots=np.asarray(spots, dtype=float),
                        shifts=spec.shifts * math.exp(spec.rate * t),
                        maturity=spec.maturity - t)


def _derived_seed(seed: int, *keys: int) -> int:
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1, np.uint64)[0])


def hedge_errors(terminal: np.ndarray) -> dict:
    """C6..C10 from terminal portfolio values; sub-hedged means V_T < 0."""
    terminal = np.asarray(terminal, dtype=float)
    sub = terminal < 0
    n = terminal.size
    c6 = float(sub.sum() / n)
    c7 = 1.0 - c6
    c8 = float(terminal[sub].mean()) if sub.any() else 0.0
    c9 = float(terminal[~sub].mean()) if (~sub).any() else 0.0
    return {"c6": c6, "c7": c7, "c8": c8, "c9": c9, "c10": float(terminal.mean())}


def c5_metric(mc_prices: np.ndarray, deltas: np.ndarray, basket: np.ndarray, c0: float) -> float:
    """(1/(n c_0)) sum_i [c_i - c_{i+1} + Delta_i (B_i - B_{i+1})]^2 for one path."""
    n = deltas.size
    step = mc_prices[:-1] - mc_prices[1:] + deltas * (basket[:-1] - basket[1:])
    return float(math.fsum(step**2) / (n * c0))


def run_hedge(spec: BasketSpec, method: str = "4GA", n_rebalance: int = 12, n_paths: int = 1000,
              config: mc.McConfig | None = None, nested_paths: int = 0, drifts=None) -> HedgeReport:
    """Delta-hedge a short call along simulated paths and score the hedge.

    Args:
        spec: basket option to hedge.
        method: Hermite variant used for prices and Deltas.
        n_rebalance: rebalances at t_0..t_{n-1}; the position is unwound at T.
        n_paths: number of simulated paths.
        config: seed and batching for path generation (paths is overridden).
        nested_paths: paths of the nested MC reprice behind C5; 0 skips C5 (NaN).
        drifts: optional physical drifts for path generation (see mc.simulate_paths).

    Raises:
        MatchFailure: the method cannot price the option at t_0.
    """
    spec = validate_basket(spec)
    config = config or mc.McConfig(seed=0)
    base = mc.McConfig(paths=n_paths, seed=config.seed, batch=config.batch, workers=config.workers)
    times = spec.maturity * np.arange(n_rebalance + 1) / n_rebalance
    paths = mc.simulate_paths(spec, times[1:], base, drifts=drifts)
    growth = math.exp(spec.rate * spec.maturity / n_rebalance)
    payoff = np.maximum(paths.basket_raw[:, -1] - spec.strike, 0.0)

    quote0 = pricer.price(spec, method)
    delta0 = pricer.delta(spec, method, quote=quote0).value

    c0_mc = math.nan
    if nested_paths:
        c0_mc = mc.mc_price(spec, mc.McConfig(paths=nested_paths, seed=_derived_seed(config.seed, 0, 0),
                                              workers=config.workers)).value

    records = []
    carried_total = 0
    worst_gap = 0.0
    for s in range(paths.spots.shape[0]):
        deltas = np.empty(n_rebalance)
        prices = np.empty(n_rebalance)
        deltas[0], prices[0] = delta0, quote0.price
        carried = 0
        basket = paths.basket_raw[s]
        cash = quote0.price - delta0 * basket[0]
        for i in range(1, n_rebalance):
            state = state_at(spec, paths.spots[s, i], times[i])
            try:
                q = pricer.price(state, method)
                deltas[i] = pricer.delta(state, method, quote=q).value
                prices[i] = q.price
            except (MatchFailure, np.linalg.LinAlgError):
                deltas[i], prices[i] = deltas[i - 1], math.nan
                carried += 1
            before = cash * growth + deltas[i - 1] * basket[i]
            cash = cash * growth - (deltas[i] - deltas[i - 1]) * basket[i]
            after = cash + deltas[i] * basket[i]
            worst_gap = max(worst_gap, abs(after - before) / max(1.0, abs(before)))
        terminal = cash * growth + deltas[-1] * basket[-1] - payoff[s]

        mc_prices = None
        if nested_paths:
            mc_prices = np.empty(n_rebalance + 1)
            mc_prices[0], mc_prices[-1] = c0_mc, payoff[s]
            for i in range(1, n_rebalance):
                state = state_at(spec, paths.spots[s, i], times[i])
                cfg = mc.McConfig(paths=nested_paths, seed=_derived_seed(config.seed, s + 1, i),
                                  workers=config.workers)
                mc_prices[i] = mc.mc_price(state, cfg).value
        records.append(HedgePathRecord(deltas=deltas, basket_values=basket.copy(), method_prices=prices,
                                       terminal_error=float(terminal), carried=carried,
                                       mc_prices=mc_prices))
        carried_total += carried

    terminal = np.array([r.terminal_error for r in records])
    c4 = float(np.mean([r.delta_vol for r in records]))
    if nested_paths:
        shifted = paths.basket
        c5 = float(np.mean([c5_metric(r.mc_prices, r.deltas, shifted[s], c0_mc)
                            for s, r in enumerate(records)]))
    else:
        c5 = math.nan
    errs = hedge_errors(terminal)
    return HedgeReport(c4=c4, c5=c5, n_paths=len(records), n_rebalance=n_rebalance, method=method,
                       carried_steps=carried_total, max_self_financing_gap=worst_gap,
                       records=records, **errs)
