import numpy as np
import pytest

from hermbasket import load_fixture
from hermbasket.model import BasketSpec

REF_4GA = [8.1977, 16.4424, 12.5695, 1.1453, 7.4563, 9.7628]
REF_6GA = [8.2222, 16.4631, 12.5888, 1.0938, 7.4555, 9.7856]
REF_MC = [8.2263, 16.4700, 12.5887, 1.1459, 7.4681, 9.7767]
REF_MC_SD = [0.0031, 0.0052, 0.0005, 0.0008, 0.0027, 0.0030]

# filled by tests/test_acceptance.py, printed at the end of the session
ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture(scope="session")
def gbm_baskets():
    return [load_fixture(f"basket{i}") for i in range(1, 7)]


def single_asset(spot=100.0, vol=0.2, rate=0.0, maturity=1.0, strike=100.0, **kw):
    fields = dict(spots=[spot], vols=[vol], weights=[1.0], correlation=[[1.0]], rate=rate,
                  maturity=maturity, strike=strike)
    fields.update(kw)
    return BasketSpec(**fields)


def jump_basket(n=3, seed=0, lam=0.3):
    rng = np.random.default_rng(seed)
    spec = BasketSpec(
        spots=rng.uniform(80, 120, n),
        vols=rng.uniform(0.1, 0.4, n),
        shifts=rng.uniform(-10, 10, n),
        shift_signs=rng.choice([-1.0, 1.0], n),
        lambdas=np.full(n, lam),
        etas=rng.uniform(-0.3, 0.3, n),
        upsilons=rng.uniform(0.05, 0.3, n),
        weights=rng.uniform(0.2, 1.0, n),
        correlation=0.4,
        rate=0.03,
        maturity=1.0,
        strike=0.0,
    )
    return spec.replace(strike=spec.raw_basket0)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
