"""Shifted jump-diffusion basket: domain types, validation and elementary quantities.

Every asset follows

    S_t = (S_0 - b*delta_0) * exp((r + omega)*t + sigma*V_t) * prod(Y_l + 1) + b*delta_0*exp(r*t)

with log(Y + 1) ~ N(eta, upsilon^2), N_t ~ Poisson(lambda*t) and
omega = -beta*lambda - sigma^2/2, beta = E[Y].
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

PSD_TOLERANCE = 1e-10

_ARRAY_FIELDS = (
    "spots",
    "vols",
    "shifts",
    "shift_signs",
    "lambdas",
    "etas",
    "upsilons",
    "weights",
)


class ValidationError(ValueError):
    """A basket specification violates one of its invariants."""


class InvalidCorrelation(ValidationError):
    pass


class ZeroShiftedBasket(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


def jump_mean_beta(eta: float, upsilon: float) -> float:
    """Mean jump size E[Y] when log(Y + 1) ~ N(eta, upsilon^2)."""
    if upsilon < 0:
        raise ValueError("upsilon must be non-negative")
    return math.expm1(eta + 0.5 * upsilon * upsilon)


@dataclass(frozen=True)
class AssetSpec:
    spot: float
    vol: float
    shift0: float = 0.0
    shift_sign: int = 1
    jump_intensity: float = 0.0
    jump_log_mean: float = 0.0
    jump_log_vol: float = 0.0

    @property
    def effective_spot(self) -> float:
        return self.spot - self.shift_sign * self.shift0


@dataclass(frozen=True)
class DriftTerms:
    beta_tilde: np.ndarray
    omega: np.ndarray


@dataclass(frozen=True, eq=False)
class BasketSpec:
    """Full description of a European basket call under the shifted jump-diffusion.

    Per-asset quantities are stored column-wise as float arrays so the
    numerical modules can vectorize over assets.  Construction does not
    validate; call :func:`validate_basket` for that.
    """

    spots: np.ndarray
    vols: np.ndarray
    weights: np.ndarray
    correlation: np.ndarray
    rate: float
    maturity: float
    strike: float
    shifts: np.ndarray = None
    shift_signs: np.ndarray = None
    lambdas: np.ndarray = None
    etas: np.ndarray = None
    upsilons: np.ndarray = None

    def __post_init__(self):
        n = np.size(self.spots)
        defaults = {"shifts": 0.0, "shift_signs": 1.0, "lambdas": 0.0, "etas": 0.0, "upsilons": 0.0}
        for name in _ARRAY_FIELDS:
            value = getattr(self, name)
            if value is None:
                value = np.full(n, defaults[name])
            arr = np.array(value, dtype=float, ndmin=1)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        corr = np.array(self.correlation, dtype=float)
        if corr.ndim == 0:
            # scalar: equicorrelation
            corr = np.full((n, n), float(corr))
            np.fill_diagonal(corr, 1.0)
        corr.setflags(write=False)
        object.__setattr__(self, "correlation", corr)
        for name in ("rate", "maturity", "strike"):
            object.__setattr__(self, name, float(getattr(self, name)))

    # -- construction helpers -------------------------------------------------

    @classmethod
    def from_assets(cls, assets: Sequence[AssetSpec], weights, correlation, rate, maturity, strike):
        return cls(
            spots=[a.spot for a in assets],
            vols=[a.vol for a in assets],
            shifts=[a.shift0 for a in assets],
            shift_signs=[a.shift_sign for a in assets],
            lambdas=[a.jump_intensity for a in assets],
            etas=[a.jump_log_mean for a in assets],
            upsilons=[a.jump_log_vol for a in assets],
            weights=weights,
            correlation=correlation,
            rate=rate,
            maturity=maturity,
            strike=strike,
        )

    @property
    def assets(self) -> tuple[AssetSpec, ...]:
        return tuple(
            AssetSpec(
                spot=float(self.spots[i]),
                vol=float(self.vols[i]),
                shift0=float(self.shifts[i]),
                shift_sign=int(self.shift_signs[i]),
                jump_intensity=float(self.lambdas[i]),
                jump_log_mean=float(self.etas[i]),
                jump_log_vol=float(self.upsilons[i]),
            )
            for i in range(self.n_assets)
        )

    def replace(self, **changes) -> "BasketSpec":
        """Copy with some fields changed; the result is an unvalidated BasketSpec."""
        values = {f.name: getattr(self, f.name) for f in fields(BasketSpec)}
        values.update(changes)
        return BasketSpec(**values)

    # -- derived quantities ---------------------------------------------------

    @property
    def n_assets(self) -> int:
        return int(self.spots.size)

    @property
    def effective_spots(self) -> np.ndarray:
        """S_0 - b*delta_0 per asset: the multiplicative part of each price."""
        return self.spots - self.shift_signs * self.shifts

    @property
    def drift_terms(self) -> DriftTerms:
        beta = np.expm1(self.etas + 0.5 * self.upsilons**2)
        omega = -beta * self.lambdas - 0.5 * self.vols**2
        return DriftTerms(beta_tilde=beta, omega=omega)

    @property
    def covariance(self) -> np.ndarray:
        """sigma_i sigma_j rho_ij: covariance of the Brownian log-drivers per unit time."""
        return self.vols[:, None] * self.correlation * self.vols[None, :]

    @property
    def raw_basket0(self) -> float:
        """B*_0 = sum a_i S_0^(i)."""
        return math.fsum(self.weights * self.spots)

    @property
    def shifted_basket0(self) -> float:
        return math.fsum(self.weights * self.effective_spots)

    @property
    def shifted_strike(self) -> float:
        shift_fv = self.weights * self.shift_signs * self.shifts * math.exp(self.rate * self.maturity)
        return self.strike - math.fsum(shift_fv)

    def shift_value(self, t: float) -> float:
        """Aggregate cash-like shift sum a_i b_i delta_0 e^{rt} held inside the raw basket."""
        return math.fsum(self.weights * self.shift_signs * self.shifts) * math.exp(self.rate * t)

    # -- equality and serialization ------------------------------------------

    def __eq__(self, other):
        if not isinstance(other, BasketSpec):
            return NotImplemented
        if (self.rate, self.maturity, self.strike) != (other.rate, other.maturity, other.strike):
            return False
        if self.correlation.shape != other.correlation.shape:
            return False
        same = all(
            np.array_equal(getattr(self, name), getattr(other, name)) for name in _ARRAY_FIELDS
        )
        return same and np.array_equal(self.correlation, other.correlation)

    __hash__ = None

    def to_dict(self) -> dict:
        out = {name: getattr(self, name).tolist() for name in _ARRAY_FIELDS}
        out["shift_signs"] = [int(s) for s in self.shift_signs]
        out["correlation"] = self.correlation.tolist()
        out.update(rate=self.rate, maturity=self.maturity, strike=self.strike)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "BasketSpec":
        known = set(_ARRAY_FIELDS) | {"correlation", "rate", "maturity", "strike"}
        unknown = set(data) - known - {"manifest", "name"}
        if unknown:
            raise ValidationError(f"unknown basket fields: {sorted(unknown)}")
        missing = {"spots", "vols", "weights", "correlation", "rate", "maturity", "strike"} - set(data)
        if missing:
            raise ValidationError(f"missing basket fields: {sorted(missing)}")
        return cls(**{k: data[k] for k in known if k in data})


@dataclass(frozen=True, eq=False)
class ValidatedBasket(BasketSpec):
    """A BasketSpec whose invariants have been checked by :func:`validate_basket`."""

    b0: float = field(default=0.0)
    shifted_k: float = field(default=0.0)


def _clean_correlation(corr: np.ndarray) -> np.ndarray:
    n = corr.shape[0]
    if corr.shape != (n, n):
        raise DimensionMismatch(f"correlation must be square, got shape {corr.shape}")
    if not np.all(np.isfinite(corr)):
        raise InvalidCorrelation("correlation has non-finite entries")
    if not np.allclose(corr, corr.T, atol=1e-12, rtol=0):
        raise InvalidCorrelation("correlation matrix is not symmetric")
    if not np.allclose(np.diag(corr), 1.0, atol=1e-12, rtol=0):
        raise InvalidCorrelation("correlation matrix must have a unit diagonal")
    corr = 0.5 * (corr + corr.T)
    eigval, eigvec = np.linalg.eigh(corr)
    if eigval[0] < -PSD_TOLERANCE:
        raise InvalidCorrelation(
            f"correlation matrix is not positive semi-definite (smallest eigenvalue {eigval[0]:.3g})"
        )
    if eigval[0] < 0:
        clipped = (eigvec * np.maximum(eigval, 0.0)) @ eigvec.T
        d = np.sqrt(np.diag(clipped))
        corr = clipped / np.outer(d, d)
        np.fill_diagonal(corr, 1.0)
    return corr


def validate_basket(spec: BasketSpec) -> ValidatedBasket:
    """Check every invariant of ``spec`` and precompute B_0 and the shifted strike.

    Raises:
        DimensionMismatch: per-asset arrays or the correlation have inconsistent sizes.
        InvalidCorrelation: correlation not symmetric, not unit-diagonal or not PSD.
        ZeroShiftedBasket: the shifted basket value B_0 is zero.
        ValidationError: any other parameter outside its domain.
    """
    if isinstance(spec, ValidatedBasket):
        return spec
    n = spec.n_assets
    if n < 1:
        raise DimensionMismatch("basket needs at least one asset")
    for name in _ARRAY_FIELDS:
        if getattr(spec, name).shape != (n,):
            raise DimensionMismatch(f"{name} has length {getattr(spec, name).size}, expected {n}")
    if spec.correlation.shape != (n, n):
        raise DimensionMismatch(f"correlation has shape {spec.correlation.shape}, expected {(n, n)}")
    for name in _ARRAY_FIELDS:
        if not np.all(np.isfinite(getattr(spec, name))):
            raise ValidationError(f"{name} contains non-finite values")
    if np.any(spec.vols < 0):
        raise ValidationError("vols must be non-negative")
    if np.any(spec.lambdas < 0):
        raise ValidationError("jump intensities must be non-negative")
    if np.any(spec.upsilons < 0):
        raise ValidationError("jump log-volatilities must be non-negative")
    if not np.all(np.isin(spec.shift_signs, (-1.0, 1.0))):
        raise ValidationError("shift signs must be -1 or +1")
    if not (math.isfinite(spec.rate) and spec.rate >= 0):
        raise ValidationError("rate must be finite and non-negative")
    if not (math.isfinite(spec.maturity) and spec.maturity > 0):
        raise ValidationError("maturity must be positive")
    if not math.isfinite(spec.strike):
        raise ValidationError("strike must be finite")
    corr = _clean_correlation(spec.correlation)
    checked = spec.replace(correlation=corr)
    b0 = checked.shifted_basket0
    if b0 == 0.0:
        raise ZeroShiftedBasket("shifted basket value B_0 is zero")
    values = {f.name: getattr(checked, f.name) for f in fields(BasketSpec)}
    return ValidatedBasket(**values, b0=b0, shifted_k=checked.shifted_strike)


def shifted_basket_and_strike(spec: BasketSpec) -> tuple[float, float]:
    """(B_0, K): shifted basket value today and shifted strike."""
    return spec.shifted_basket0, spec.shifted_strike


# -- JSON config I/O ------------------------------------------------------------


def load_basket(path: str | Path) -> BasketSpec:
    with open(path) as fh:
        data = json.load(fh)
    if "basket" in data:
        data = data["basket"]
    return BasketSpec.from_dict(data)


def save_basket(spec: BasketSpec, path: str | Path, manifest: dict | None = None) -> None:
    data = spec.to_dict()
    if manifest is not None:
        data = {"manifest": manifest, "basket": data}
    Path(path).write_text(json.dumps(data, indent=2) + "\n")


def equicorrelation(n: int, rho: float) -> np.ndarray:
    corr = np.full((n, n), rho)
    np.fill_diagonal(corr, 1.0)
    return corr


def correlation_from_pairs(n: int, pairs: Iterable[tuple[int, int, float]]) -> np.ndarray:
    """Build a correlation matrix from 1-based (i, j, rho) triples."""
    corr = np.eye(n)
    for i, j, rho in pairs:
        corr[i - 1, j - 1] = corr[j - 1, i - 1] = rho
    return corr
