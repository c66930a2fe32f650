"""Closed-form basket call under a matched Hermite expansion, and its sensitivities.

With F = B_0 e^{rT} the option is priced as

    c_0 = e^{-rT} E[(F (J(Z) + h1) - K)^+]
        = B_0 [(alpha_0 + h1) Phi(-h2 z) + h2 g(z)] - K e^{-rT} Phi(-h2 z)

where z solves F (J(z) + h1) = K, h2 = sgn(B_0) and
g(z) = phi(z) sum_k alpha_{k+1} He_k(z).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from . import hermite
from .hermite import HermiteExpansion, MatchFailure
from .model import BasketSpec, validate_basket
from .moments import dtargets_dB0, target_moments

METHODS = ("4GA", "4GB", "6GA", "6GB")
INFINITE_ROOT = 9.0

GREEK_PARAMETERS = ("S0", "B0", "sigma", "r", "T", "a", "lambda", "delta0", "eta", "upsilon")
_PER_ASSET = {
    "S0": "spots",
    "sigma": "vols",
    "a": "weights",
    "lambda": "lambdas",
    "delta0": "shifts",
    "eta": "etas",
    "upsilon": "upsilons",
}


class SingularJacobian(np.linalg.LinAlgError):
    """The moment-matching Jacobian cannot be inverted at the solution."""


def parse_method(method: str) -> tuple[int, str]:
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    return int(method[0]), method[2]


@dataclass
class PriceQuote:
    price: float
    z_tilde: float
    h1: int
    h2: int
    method: str
    expansion: HermiteExpansion
    b0: float
    strike: float
    rate: float
    maturity: float
    targets: np.ndarray
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "price": self.price,
            "method": self.method,
            "z_tilde": _json_float(self.z_tilde),
            "h1": self.h1,
            "h2": self.h2,
            "b0": self.b0,
            "shifted_strike": self.strike,
            "alpha": self.expansion.alpha.tolist(),
            "residual_norm": self.expansion.residual_norm,
            "iterations": self.expansion.iterations,
            "restarts": self.expansion.restarts,
            "monotone": self.expansion.monotone,
            "targets": self.targets.tolist(),
            "warnings": list(self.warnings),
        }


@dataclass(frozen=True)
class GreekReport:
    parameter: str
    value: float
    mode: str

    def to_dict(self) -> dict:
        return {"parameter": self.parameter, "value": self.value, "mode": self.mode}


def _json_float(x: float):
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def exercise_root(expansion: HermiteExpansion, b0: float, strike: float, rate: float,
                  maturity: float, h1: int) -> tuple[float, list[str]]:
    """Solve J(z) + h1 = K / (B_0 e^{rT}).

    Returns the root with the smallest |z| (with a warning if several exist).
    Without a crossing the option is surely in or out of the money and the
    root is +-inf, placed so the pricing integral covers the right region.
    """
    if b0 == 0:
        raise ValueError("B_0 must be non-zero")
    level = strike / (b0 * math.exp(rate * maturity)) - h1
    poly = expansion.polynomial - level
    roots = hermite.real_roots(poly) if poly.degree() >= 1 else []
    warnings = []
    roots = [z for z in roots if abs(z) <= INFINITE_ROOT]
    if len(roots) > 1:
        warnings.append(f"multiple exercise roots {roots}; using smallest |z|")
    if roots:
        return min(roots, key=abs), warnings
    # J - level has constant sign on [-9, 9]; its value at 0 decides which
    gap = float(poly(0.0))
    if gap == 0.0:
        return 0.0, warnings
    return (-math.inf if gap > 0 else math.inf), warnings


def _g(alpha: np.ndarray, z: float) -> float:
    """phi(z) sum_{k>=0} alpha_{k+1} He_k(z); zero at infinite z."""
    if math.isinf(z):
        return 0.0
    return float(norm.pdf(z) * hermite.hermite_series_to_poly(alpha[1:])(z))


def _closed_form(alpha, z, h1, h2, b0, strike, rate, maturity) -> float:
    tail = norm.cdf(-h2 * z)
    return b0 * ((alpha[0] + h1) * tail + h2 * _g(alpha, z)) - strike * math.exp(-rate * maturity) * tail


def price(spec: BasketSpec, method: str = "4GA") -> PriceQuote:
    """European basket call price under the Hermite method ``method``.

    Raises:
        MatchFailure: the moment-matching system has no solution.
        MomentOverflow: basket moments overflow at this order.
    """
    spec = validate_basket(spec)
    return _price_unchecked(spec, method)


def _price_unchecked(spec: BasketSpec, method: str) -> PriceQuote:
    m, variant = parse_method(method)
    b0, strike = spec.shifted_basket0, spec.shifted_strike
    h1 = 0 if variant == "A" else 1
    h2 = 1 if b0 > 0 else -1
    mv = target_moments(spec, variant, m)
    expansion = hermite.match_moments(mv.target, m, variant)
    z, warnings = exercise_root(expansion, b0, strike, spec.rate, spec.maturity, h1)
    if not expansion.monotone and expansion.alpha[1:].any():
        warnings.append("expansion is not monotone on [-8, 8]")
    value = _closed_form(expansion.alpha, z, h1, h2, b0, strike, spec.rate, spec.maturity)
    return PriceQuote(price=value, z_tilde=z, h1=h1, h2=h2, method=method, expansion=expansion,
                      b0=b0, strike=strike, rate=spec.rate, maturity=spec.maturity,
                      targets=mv.target, warnings=warnings)


def quadrature_price(quote: PriceQuote) -> float:
    """e^{-rT} integral of (F (J(z) + h1) - K)^+ phi(z) dz by adaptive quadrature."""
    from scipy.integrate import quad

    alpha = quote.expansion.alpha
    poly = hermite.hermite_series_to_poly(alpha)
    forward = quote.b0 * math.exp(quote.rate * quote.maturity)

    def integrand(z):
        return max(forward * (poly(z) + quote.h1) - quote.strike, 0.0) * norm.pdf(z)

    breaks = [z for z in hermite.real_roots(poly - (quote.strike / forward - quote.h1)) if abs(z) < 12]
    edges = [-12.0] + breaks + [12.0]
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        total += quad(integrand, lo, hi, epsabs=1e-13, epsrel=1e-12, limit=200)[0]
    return math.exp(-quote.rate * quote.maturity) * total


# -- sensitivities --------------------------------------------------------------


def _parse_parameter(u: str) -> tuple[str, int | None]:
    name, _, index = u.partition(":")
    if name not in GREEK_PARAMETERS:
        raise ValueError(f"unknown parameter {u!r}; expected one of {GREEK_PARAMETERS}")
    if name in _PER_ASSET:
        if not index:
            raise ValueError(f"parameter {name!r} needs an asset index, e.g. '{name}:1'")
        return name, int(index) - 1
    if index:
        raise ValueError(f"parameter {name!r} takes no asset index")
    return name, None


def bump(spec: BasketSpec, u: str, h: float) -> BasketSpec:
    """Copy of ``spec`` with parameter ``u`` moved by ``h`` (no validation).

    ``B0`` moves through the first weight a_1 with the shifted strike held fixed.
    """
    name, i = _parse_parameter(u)
    if name == "r":
        return spec.replace(rate=spec.rate + h)
    if name == "T":
        return spec.replace(maturity=spec.maturity + h)
    if name == "B0":
        s1 = spec.effective_spots[0]
        weights = spec.weights.copy()
        weights[0] += h / s1
        moved = spec.replace(weights=weights)
        # keep K fixed: K* absorbs the change of the aggregate shift
        return moved.replace(strike=spec.strike + (moved.strike - moved.shifted_strike)
                             - (spec.strike - spec.shifted_strike))
    field_name = _PER_ASSET[name]
    values = getattr(spec, field_name).copy()
    values[i] += h
    return spec.replace(**{field_name: values})


def _bump_size(spec: BasketSpec, u: str) -> float:
    name, i = _parse_parameter(u)
    if name in ("r", "T"):
        return 1e-5
    if name == "B0":
        return 1e-5 * max(1.0, abs(spec.shifted_basket0))
    if name in ("S0", "delta0"):
        return 1e-5 * max(1.0, abs(spec.spots[i]))
    return 1e-5


def _first_order_terms(spec: BasketSpec, u: str) -> tuple[float, float, float]:
    """(d(rT)/du, dB_0/du, dK/du) in closed form."""
    name, i = _parse_parameter(u)
    growth = math.exp(spec.rate * spec.maturity)
    shift_sum = math.fsum(spec.weights * spec.shift_signs * spec.shifts)
    if name == "r":
        return spec.maturity, 0.0, -shift_sum * spec.maturity * growth
    if name == "T":
        return spec.rate, 0.0, -shift_sum * spec.rate * growth
    if name == "B0":
        return 0.0, 1.0, 0.0
    if name == "S0":
        return 0.0, spec.weights[i], 0.0
    if name == "a":
        return 0.0, spec.effective_spots[i], -spec.shift_signs[i] * spec.shifts[i] * growth
    if name == "delta0":
        sb = spec.weights[i] * spec.shift_signs[i]
        return 0.0, -sb, -sb * growth
    return 0.0, 0.0, 0.0


def _target_derivatives(spec: BasketSpec, u: str, variant: str, m: int) -> tuple[np.ndarray, str]:
    if u == "B0":
        return dtargets_dB0(spec, variant, m), "analytic"
    h = _bump_size(spec, u)
    up = target_moments(bump(spec, u, h), variant, m).target
    dn = target_moments(bump(spec, u, -h), variant, m).target
    return (up - dn) / (2 * h), "bumped"


def alpha_sensitivity(expansion: HermiteExpansion, dtargets: np.ndarray) -> np.ndarray:
    """d alpha / du from the linearized matching system.

    Row 1 of the system fixes d alpha_0 = d target_1; rows 2..m give a square
    system in d alpha_1..d alpha_{m-1}.

    Raises:
        SingularJacobian: the system cannot be solved at this expansion.
    """
    m = expansion.m
    jac = hermite.expansion_moment_jacobian(expansion.alpha, m)[1:]
    # E[J^k] also moves with alpha_0 through k E[J^{k-1}]
    lower = hermite.expansion_moments(expansion.alpha, m - 1)
    d_alpha0 = dtargets[0]
    rhs = dtargets[1:] - np.arange(2, m + 1) * np.concatenate(([1.0], lower[:-1]))[: m - 1] * d_alpha0
    if np.linalg.cond(jac) > 1e13:
        raise SingularJacobian("moment-matching Jacobian is singular at the solution")
    rest = np.linalg.solve(jac, rhs)
    return np.concatenate(([d_alpha0], rest))


def greek(spec: BasketSpec, method: str, u: str, quote: PriceQuote | None = None) -> GreekReport:
    """Sensitivity of the Hermite price to parameter ``u``.

    ``u`` is one of B0, r, T or a per-asset name with a 1-based index such as
    ``sigma:2``.  The Hermite coefficients move along the linearized moment
    system; target-moment derivatives are analytic for B0 and central
    differences of the targets otherwise.  The assembled derivative is

        dc/du = -d(rT)/du c + e^{-rT} dF/du I1 + B_0 I2 - e^{-rT} dK/du Phi(-h2 z)

    with I1 = h2 g(z) + (alpha_0 + h1) Phi(-h2 z) and
    I2 = h2 g'(z) + d alpha_0/du Phi(-h2 z).  The boundary term vanishes since
    the payoff is zero at the exercise root.
    """
    spec = validate_basket(spec)
    m, variant = parse_method(method)
    if quote is None:
        quote = _price_unchecked(spec, method)
    if quote.expansion.alpha[1:].any():
        dtargets, mode = _target_derivatives(spec, u, variant, m)
        dalpha = alpha_sensitivity(quote.expansion, dtargets)
    else:
        # constant expansion: no moment system to linearize
        dalpha, mode = np.zeros(m), ("analytic" if u == "B0" else "bumped")
    d_rt, d_b0, d_k = _first_order_terms(spec, u)
    z, h1, h2 = quote.z_tilde, quote.h1, quote.h2
    alpha = quote.expansion.alpha
    tail = norm.cdf(-h2 * z)
    disc = math.exp(-spec.rate * spec.maturity)
    b0 = quote.b0
    # e^{-rT} dF/du, kept undivided so a forward-like quote gives Delta = 1 exactly
    d_forward_disc = d_b0 + b0 * d_rt
    i1 = h2 * _g(alpha, z) + (alpha[0] + h1) * tail
    i2 = h2 * _g(dalpha, z) + dalpha[0] * tail
    value = -d_rt * quote.price + d_forward_disc * i1 + b0 * i2 - disc * d_k * tail
    return GreekReport(parameter=u, value=float(value), mode=mode)


def delta(spec: BasketSpec, method: str = "4GA", quote: PriceQuote | None = None) -> GreekReport:
    """Sensitivity to the shifted basket value B_0."""
    return greek(spec, method, "B0", quote=quote)


def all_parameters(spec: BasketSpec) -> list[str]:
    out = ["B0", "r", "T"]
    for name in ("S0", "sigma", "a", "lambda", "delta0", "eta", "upsilon"):
        out += [f"{name}:{i + 1}" for i in range(spec.n_assets)]
    return out
