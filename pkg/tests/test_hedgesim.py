import math

import numpy as np
import pytest

from conftest import jump_basket
from hermbasket import load_fixture
from hermbasket.hedgesim import (
    SELF_FINANCING_TOL,
    c5_metric,
    hedge_errors,
    run_hedge,
    state_at,
)
from hermbasket.mc import McConfig
from hermbasket.model import BasketSpec


def _forward_like():
    return load_fixture("basket1").replace(vols=[0.01, 0.01], strike=-1e5)


@pytest.fixture(scope="module")
def small_report():
    return run_hedge(load_fixture("basket1"), "4GA", n_rebalance=6, n_paths=40, config=McConfig(seed=3))


def test_forward_like_option_is_replicated():
    spec = _forward_like()
    rep = run_hedge(spec, "4GA", n_rebalance=12, n_paths=50, config=McConfig(seed=1))
    assert rep.c4 == 0.0
    for r in rep.records:
        assert np.all(r.deltas == 1.0)
        assert abs(r.terminal_error) <= 1e-9 * abs(spec.strike)
    assert abs(rep.c10) <= 1e-9 * abs(spec.strike)


def test_zero_volatility_delta_constant():
    spec = BasketSpec(spots=[100.0, 60.0], vols=[0.0, 0.0], weights=[1.0, 1.0], correlation=0.5,
                      rate=0.03, maturity=1.0, strike=150.0, shifts=[5.0, 0.0], shift_signs=[1.0, 1.0])
    rep = run_hedge(spec, "4GA", n_rebalance=12, n_paths=10, config=McConfig(seed=2))
    assert rep.c4 == 0.0
    assert all(np.ptp(r.deltas) == 0.0 for r in rep.records)
    assert abs(rep.c10) <= 1e-9 * spec.strike


def test_record_shapes(small_report):
    for r in small_report.records:
        assert r.deltas.shape == (6,)
        assert r.basket_values.shape == (7,)
        assert r.method_prices.shape == (6,)
    assert small_report.n_paths == 40


def test_partition_and_mean_identity(small_report):
    rep = small_report
    assert rep.c6 + rep.c7 == 1.0
    assert rep.c10 == pytest.approx(rep.c6 * rep.c8 + rep.c7 * rep.c9, abs=1e-10)
    assert rep.c8 <= 0.0 <= rep.c9


def test_self_financing(small_report):
    assert small_report.max_self_financing_gap <= SELF_FINANCING_TOL


def test_terminal_error_replays_from_records(small_report):
    spec = load_fixture("basket1")
    n = small_report.n_rebalance
    growth = math.exp(spec.rate * spec.maturity / n)
    for r in small_report.records[:5]:
        cash = r.method_prices[0] - r.deltas[0] * r.basket_values[0]
        for i in range(1, n):
            cash = cash * growth - (r.deltas[i] - r.deltas[i - 1]) * r.basket_values[i]
        value = cash * growth + r.deltas[-1] * r.basket_values[-1] - max(r.basket_values[-1] - spec.strike, 0)
        assert value == pytest.approx(r.terminal_error, abs=1e-10)


def test_hedge_errors_edge_cases():
    e = hedge_errors(np.array([0.0, 1.0, 2.0]))
    assert e["c6"] == 0.0 and e["c7"] == 1.0 and e["c8"] == 0.0
    e = hedge_errors(np.array([-1.0, -3.0]))
    assert e["c6"] == 1.0 and e["c8"] == -2.0 and e["c9"] == 0.0


def test_c5_metric_by_hand():
    prices = np.array([2.0, 1.5, 1.0])
    deltas = np.array([0.5, 0.4])
    basket = np.array([10.0, 9.0, 8.0])
    steps = [2.0 - 1.5 + 0.5 * 1.0, 1.5 - 1.0 + 0.4 * 1.0]
    assert c5_metric(prices, deltas, basket, 2.0) == pytest.approx(sum(s * s for s in steps) / (2 * 2.0))


def test_state_at_keeps_shifted_strike():
    spec = jump_basket(3, seed=4)
    later = state_at(spec, spec.spots * 1.1, 0.4)
    assert later.maturity == pytest.approx(spec.maturity - 0.4)
    assert later.shifted_strike == pytest.approx(spec.shifted_strike, rel=1e-12)


def test_scale_equivariance():
    spec = jump_basket(2, seed=8)
    kappa = 3.0
    scaled = spec.replace(spots=spec.spots * kappa, shifts=spec.shifts * kappa, strike=spec.strike * kappa)
    cfg = McConfig(seed=6)
    a = run_hedge(spec, "4GA", n_rebalance=4, n_paths=30, config=cfg)
    b = run_hedge(scaled, "4GA", n_rebalance=4, n_paths=30, config=cfg)
    assert b.c6 == a.c6 and b.c7 == a.c7
    for name in ("c8", "c9", "c10"):
        assert getattr(b, name) == pytest.approx(kappa * getattr(a, name), rel=1e-6, abs=1e-9)
    assert b.c4 == pytest.approx(a.c4, rel=1e-6, abs=1e-12)


def test_reproducible():
    spec = load_fixture("basket1")
    a = run_hedge(spec, "4GA", n_rebalance=3, n_paths=10, config=McConfig(seed=12))
    b = run_hedge(spec, "4GA", n_rebalance=3, n_paths=10, config=McConfig(seed=12))
    assert a.summary() == b.summary()


def test_nested_mc_c5():
    spec = load_fixture("basket1")
    rep = run_hedge(spec, "4GA", n_rebalance=3, n_paths=4, config=McConfig(seed=5), nested_paths=5000)
    assert math.isfinite(rep.c5) and rep.c5 > 0
    for r in rep.records:
        assert r.mc_prices.shape == (4,)
        assert r.mc_prices[-1] == max(r.basket_values[-1] - spec.strike, 0.0)


def test_c5_skipped_without_nested_mc(small_report):
    assert math.isnan(small_report.c5)


def test_physical_drifts_change_paths():
    spec = load_fixture("basket1")
    a = run_hedge(spec, "4GA", n_rebalance=3, n_paths=5, config=McConfig(seed=1))
    b = run_hedge(spec, "4GA", n_rebalance=3, n_paths=5, config=McConfig(seed=1), drifts=[0.1, 0.1])
    assert a.records[0].basket_values[-1] != b.records[0].basket_values[-1]
