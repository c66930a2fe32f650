"""Hermite moment-matching prices and Deltas for basket options under a shifted jump-diffusion."""

from importlib.resources import files

from .hermite import HermiteExpansion, MatchFailure, match_moments
from .model import (
    AssetSpec,
    BasketSpec,
    DimensionMismatch,
    InvalidCorrelation,
    ValidatedBasket,
    ValidationError,
    ZeroShiftedBasket,
    load_basket,
    save_basket,
    validate_basket,
)
from .moments import MomentOverflow, basket_moment, target_moments
from .pricer import METHODS, PriceQuote, delta, greek, price

__version__ = "0.1.0"
SCHEMA_VERSION = 1


def fixture_path(name: str):
    """Path of a bundled basket config, e.g. ``basket1`` or ``basket3star``."""
    path = files(__package__) / "fixtures" / f"{name}.json"
    if not path.is_file():
        raise FileNotFoundError(f"no bundled fixture named {name!r}")
    return path


def load_fixture(name: str) -> BasketSpec:
    return load_basket(fixture_path(name))


__all__ = [
    "AssetSpec",
    "BasketSpec",
    "DimensionMismatch",
    "HermiteExpansion",
    "InvalidCorrelation",
    "MatchFailure",
    "METHODS",
    "MomentOverflow",
    "PriceQuote",
    "ValidatedBasket",
    "ValidationError",
    "ZeroShiftedBasket",
    "basket_moment",
    "delta",
    "fixture_path",
    "greek",
    "load_basket",
    "load_fixture",
    "match_moments",
    "price",
    "save_basket",
    "target_moments",
    "validate_basket",
]
