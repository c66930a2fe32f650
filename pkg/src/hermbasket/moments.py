"""Exact risk-neutral moments of the shifted basket and their weight derivatives.

The k-th raw moment of B_T = sum_i a_i S~_i e^{(r+omega_i)T} G_i is a sum over
k-tuples of assets of products of the per-asset coefficients times the joint
mgf of the log-drivers.  The summand only depends on the multiset of indices,
so tuples are enumerated as multisets weighted by their multinomial count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations_with_replacement

import numpy as np
from scipy.special import comb, gammaln

from .model import BasketSpec

MAX_ORDER = 6
_LOG_MAX = 700.0


class MomentOverflow(OverflowError):
    """A moment or mgf value does not fit in double precision."""


@dataclass(frozen=True)
class MomentVector:
    raw: np.ndarray
    target: np.ndarray
    variant: str
    order: int
    forward: float

    @property
    def variance(self) -> float:
        return float(self.target[1] - self.target[0] ** 2)


@lru_cache(maxsize=64)
def multisets(n: int, k: int) -> np.ndarray:
    """All non-decreasing index k-tuples over range(n), shape (C(n+k-1, k), k)."""
    if k == 0:
        return np.zeros((1, 0), dtype=np.intp)
    count = math.comb(n + k - 1, k)
    flat = np.fromiter(
        (i for tup in combinations_with_replacement(range(n), k) for i in tup),
        dtype=np.intp,
        count=count * k,
    )
    out = flat.reshape(count, k)
    out.setflags(write=False)
    return out


def _position_counts(idx: np.ndarray) -> np.ndarray:
    """For every position j of every multiset, how often idx[:, j] occurs in that row."""
    return (idx[:, :, None] == idx[:, None, :]).sum(axis=2)


def log_joint_mgf(u: np.ndarray, spec: BasketSpec, t: float) -> float:
    """log mgf of the per-asset log-drivers sigma_i V_t^(i) + sum log(Y^(i) + 1)."""
    u = np.asarray(u, dtype=float)
    gauss = 0.5 * t * float(u @ spec.covariance @ u)
    jumps = t * spec.lambdas * np.expm1(spec.etas * u + 0.5 * spec.upsilons**2 * u**2)
    return gauss + math.fsum(jumps)


def joint_mgf(u, spec: BasketSpec, t: float) -> float:
    """Joint mgf  exp(t u'Σu/2) prod_i exp(t λ_i (e^{η_i u_i + υ_i² u_i²/2} - 1)).

    Σ_ij = σ_i σ_j ρ_ij, i.e. the covariance of the scaled Brownian drivers.

    Raises:
        MomentOverflow: the result exceeds the floating-point range.
    """
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise ValueError("mgf argument must be finite")
    value = log_joint_mgf(u, spec, t)
    if not value < _LOG_MAX:
        raise MomentOverflow(f"mgf overflow (log value {value:.1f})")
    return math.exp(value)


def _multiset_terms(spec: BasketSpec, t: float, k: int, pinned: int | None = None) -> np.ndarray:
    """Signed terms mult * prod_j c_{i_j} * mgf(sum e_{i_j} [+ e_pinned]) over size-k multisets.

    c_i = a_i S~_i e^{(r+omega_i)t}.  When ``pinned`` is given, the mgf argument
    carries one extra unit on that asset (used for weight derivatives); its
    coefficient is not included in the product.
    """
    n = spec.n_assets
    idx = multisets(n, k)
    omega = spec.drift_terms.omega
    cov = spec.covariance
    coef = spec.weights * spec.effective_spots * np.exp((spec.rate + omega) * t)
    if k == 0:
        cnt = np.zeros((1, 0))
        prod = np.ones(1)
        quad = np.zeros(1)
    else:
        cnt = _position_counts(idx).astype(float)
        prod = np.prod(coef[idx], axis=1)
        quad = cov[idx[:, :, None], idx[:, None, :]].sum(axis=(1, 2))

    lam, eta, ups2 = spec.lambdas, spec.etas, spec.upsilons**2

    def jump_part(asset, count):
        return lam[asset] * np.expm1(eta[asset] * count + 0.5 * ups2[asset] * count**2)

    if pinned is None:
        jumps = (jump_part(idx, cnt) / np.where(cnt > 0, cnt, 1.0)).sum(axis=1) if k else 0.0
    else:
        is_pin = idx == pinned
        others = np.where(is_pin, 0.0, jump_part(idx, cnt) / np.where(cnt > 0, cnt, 1.0))
        pin_count = is_pin.sum(axis=1) + 1.0
        jumps = (others.sum(axis=1) if k else 0.0) + jump_part(pinned, pin_count)
        quad = quad + (2.0 * cov[pinned, idx].sum(axis=1) if k else 0.0) + cov[pinned, pinned]

    log_mgf = 0.5 * t * quad + t * jumps
    log_mult = gammaln(k + 1) - (gammaln(cnt + 1) / np.where(cnt > 0, cnt, 1.0)).sum(axis=1)
    mult = np.rint(np.exp(log_mult))
    if np.any(log_mgf >= _LOG_MAX) or not np.all(np.isfinite(prod)):
        raise MomentOverflow(f"basket moment of order {k} overflows double precision")
    with np.errstate(over="ignore"):
        terms = mult * prod * np.exp(log_mgf)
    if not np.all(np.isfinite(terms)):
        raise MomentOverflow(f"basket moment of order {k} overflows double precision")
    return terms


def basket_moment(k: int, spec: BasketSpec, t: float | None = None) -> float:
    """k-th raw moment E[B_t^k] of the shifted basket (t defaults to maturity)."""
    if not 1 <= k <= MAX_ORDER:
        raise ValueError(f"moment order must be in 1..{MAX_ORDER}")
    t = spec.maturity if t is None else t
    return math.fsum(_multiset_terms(spec, t, k))


def basket_moments(spec: BasketSpec, t: float | None, m: int) -> np.ndarray:
    """mu_1..mu_m as an array."""
    return np.array([basket_moment(k, spec, t) for k in range(1, m + 1)])


def basket_moment_naive(k: int, spec: BasketSpec, t: float | None = None) -> float:
    """Full n^k tuple enumeration of the moment sum; reference path for tests."""
    t = spec.maturity if t is None else t
    n = spec.n_assets
    omega = spec.drift_terms.omega
    coef = spec.weights * spec.effective_spots * np.exp((spec.rate + omega) * t)
    idx = np.array(np.meshgrid(*[np.arange(n)] * k, indexing="ij")).reshape(k, -1).T
    total = []
    for row in idx:
        u = np.bincount(row, minlength=n).astype(float)
        total.append(np.prod(coef[row]) * joint_mgf(u, spec, t))
    return math.fsum(total)


def dmoment_da1(k: int, spec: BasketSpec, t: float | None = None) -> float:
    """Partial derivative of E[B_t^k] with respect to the first weight a_1.

    Differentiating the moment sum slot by slot gives
    k * S~_1 e^{(r+omega_1)t} * sum over (k-1)-tuples of prod c_{i_j} mgf(e_1 + sum e_{i_j}).
    """
    if not 1 <= k <= MAX_ORDER:
        raise ValueError(f"moment order must be in 1..{MAX_ORDER}")
    t = spec.maturity if t is None else t
    omega1 = spec.drift_terms.omega[0]
    lead = k * spec.effective_spots[0] * math.exp((spec.rate + omega1) * t)
    return lead * math.fsum(_multiset_terms(spec, t, k - 1, pinned=0))


# -- normalized targets ---------------------------------------------------------


def normalize_moments(raw: np.ndarray, forward: float, variant: str) -> np.ndarray:
    """Moments of B_T/F (variant A) or B_T/F - 1 (variant B), F = B_0 e^{rT}."""
    m = raw.size
    scaled = np.concatenate(([1.0], raw / forward ** np.arange(1, m + 1)))
    if variant == "A":
        target = scaled[1:].copy()
        target[0] = 1.0
        return target
    if variant == "B":
        target = np.empty(m)
        for k in range(1, m + 1):
            j = np.arange(k + 1)
            target[k - 1] = math.fsum(comb(k, j) * (-1.0) ** (k - j) * scaled[j])
        target[0] = 0.0
        return target
    raise ValueError(f"unknown variant {variant!r}")


def target_moments(spec: BasketSpec, variant: str, m: int, t: float | None = None) -> MomentVector:
    """Raw moments of B_T and the matching targets for the given variant.

    The first target is pinned to its exact value (1 for A, 0 for B); the
    martingale identity mu_1 = B_0 e^{rT} makes that exact.
    """
    if m not in (4, 6):
        raise ValueError("moment order m must be 4 or 6")
    t = spec.maturity if t is None else t
    raw = basket_moments(spec, t, m)
    forward = spec.shifted_basket0 * math.exp(spec.rate * t)
    return MomentVector(raw=raw, target=normalize_moments(raw, forward, variant), variant=variant,
                        order=m, forward=forward)


def dtargets_dB0(spec: BasketSpec, variant: str, m: int, t: float | None = None,
                 raw: np.ndarray | None = None) -> np.ndarray:
    """Derivatives of target moments 1..m with respect to B_0.

    B_0 moves through the first weight: dB_0/da_1 = S~_1, so
    d/dB_0 = (d/da_1) / S~_1, applied to both the raw moments and the
    (B_0 e^{rT})^k normalizer.
    """
    t = spec.maturity if t is None else t
    s1 = spec.effective_spots[0]
    if s1 == 0:
        raise ZeroDivisionError("first asset has zero effective spot; B_0 cannot move through a_1")
    if raw is None or raw.size < m:
        raw = basket_moments(spec, t, m)
    growth = math.exp(spec.rate * t)
    forward = spec.shifted_basket0 * growth
    # d(A_j)/dB_0 with A_j = mu_j / F^j, dF/dB_0 = e^{rt}
    dA = np.zeros(m + 1)
    for j in range(1, m + 1):
        dmu = dmoment_da1(j, spec, t) / s1
        dA[j] = dmu / forward**j - j * raw[j - 1] * growth / forward ** (j + 1)
    out = np.zeros(m)
    for k in range(2, m + 1):
        if variant == "A":
            out[k - 1] = dA[k]
        elif variant == "B":
            j = np.arange(k + 1)
            out[k - 1] = math.fsum(comb(k, j) * (-1.0) ** (k - j) * dA[: k + 1])
        else:
            raise ValueError(f"unknown variant {variant!r}")
    return out


def dtarget_dB0(spec: BasketSpec, variant: str, k: int, t: float | None = None,
                raw: np.ndarray | None = None) -> float:
    """Derivative of the k-th target moment with respect to B_0 (zero for k = 1)."""
    if variant not in ("A", "B"):
        raise ValueError(f"unknown variant {variant!r}")
    return float(dtargets_dB0(spec, variant, k, t, raw)[k - 1])
