"""Market primitives: configs, value profiles, outcomes, and the regret cap.

A market is described by the known upper bounds ``vbar[i, j]`` on bidder i's
value for good j. All money quantities are plain floats; matrices are numpy
arrays with bidders on rows and goods on columns. Types are immutable after
construction and every operation here is a pure function.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .errors import (
    AllZeroBoundsError,
    InputError,
    NegativeBoundError,
    NonFiniteBoundError,
    NonPositiveScaleError,
    ProfileOutOfBoundsError,
)

E = math.e

#: Feasibility slack for sum-of-allocations checks.
FEAS_EPS = 1e-12


def _frozen_matrix(raw, name: str) -> np.ndarray:
    arr = np.asarray(raw, dtype=float)
    if arr.ndim != 2 or arr.size == 0:
        raise InputError(f"{name} must be a non-empty 2-d matrix, got shape {arr.shape}")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class MarketConfig:
    """Known upper bounds of bidders' values, one row per bidder.

    Use :func:`validate_config` to construct from raw input; the constructor
    assumes entries are already checked.
    """

    upper_bounds: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "upper_bounds", _frozen_matrix(self.upper_bounds, "upper_bounds"))

    @property
    def bidder_count(self) -> int:
        return self.upper_bounds.shape[0]

    @property
    def good_count(self) -> int:
        return self.upper_bounds.shape[1]


@dataclass(frozen=True)
class ValueProfile:
    """A realized value matrix, same shape as the config's bounds."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_matrix(self.values, "values"))


@dataclass(frozen=True)
class Outcome:
    """Expected-form outcome: allocation probabilities and payments.

    ``allocations[i, j]`` is the probability bidder i receives good j,
    ``per_good_payments[i, j]`` the expected payment attributed to good j,
    and ``payments[i]`` the bidder's total. ``supply_capped=False`` lifts the
    per-good sum constraint for unlimited-supply settings.
    """

    allocations: np.ndarray
    payments: np.ndarray
    per_good_payments: np.ndarray
    supply_capped: bool = True

    def __post_init__(self):
        q = _frozen_matrix(self.allocations, "allocations")
        tg = _frozen_matrix(self.per_good_payments, "per_good_payments")
        t = np.asarray(self.payments, dtype=float).copy()
        t.setflags(write=False)
        if t.ndim != 1 or t.shape[0] != q.shape[0] or tg.shape != q.shape:
            raise InputError("outcome arrays have inconsistent shapes")
        if np.any(q < -FEAS_EPS) or np.any(q > 1.0 + FEAS_EPS):
            raise InputError("allocation probabilities must lie in [0, 1]")
        if self.supply_capped and np.any(q.sum(axis=0) > 1.0 + FEAS_EPS):
            raise InputError("allocations for a good exceed unit supply")
        if np.any(np.abs(tg.sum(axis=1) - t) > 1e-12):
            raise InputError("per-good payments do not sum to totals")
        object.__setattr__(self, "allocations", q)
        object.__setattr__(self, "payments", t)
        object.__setattr__(self, "per_good_payments", tg)

    @property
    def total_revenue(self) -> float:
        return float(self.payments.sum())


@dataclass(frozen=True)
class RealizedOutcome:
    """One sampled execution of the reserve auction.

    ``winners[j]`` is the winning bidder index for good j or None,
    ``prices[j]`` the realized payment (0 when unsold), and
    ``reserves_drawn[i, j]`` the reserve faced by bidder i on good j
    (NaN where no reserve was relevant).
    """

    winners: tuple
    prices: np.ndarray
    reserves_drawn: np.ndarray

    def __post_init__(self):
        prices = np.asarray(self.prices, dtype=float).copy()
        prices.setflags(write=False)
        reserves = _frozen_matrix(self.reserves_drawn, "reserves_drawn")
        object.__setattr__(self, "winners", tuple(self.winners))
        object.__setattr__(self, "prices", prices)
        object.__setattr__(self, "reserves_drawn", reserves)
        for j, w in enumerate(self.winners):
            if w is None and prices[j] != 0.0:
                raise InputError("unsold good must have zero price")

    @property
    def total_revenue(self) -> float:
        return float(self.prices.sum())


def validate_config(raw_bounds) -> MarketConfig:
    """Check a raw bounds matrix and wrap it in a :class:`MarketConfig`.

    Rejects negative, NaN or infinite entries and all-zero matrices.
    """
    arr = np.asarray(raw_bounds, dtype=float)
    if arr.ndim == 1:
        raise InputError("bounds must be a matrix with one row per bidder")
    arr = _frozen_matrix(arr, "upper_bounds")
    if np.any(~np.isfinite(arr)):
        raise NonFiniteBoundError("upper bounds must be finite")
    if np.any(arr < 0):
        raise NegativeBoundError("upper bounds must be non-negative")
    if not np.any(arr > 0):
        raise AllZeroBoundsError("at least one upper bound must be positive")
    return MarketConfig(arr)


def load_config(path: Union[str, Path]) -> MarketConfig:
    """Load a market config from a TOML or JSON file.

    The document must contain a single key ``upper_bounds`` holding a
    row-major matrix (rows are bidders).
    """
    path = Path(path)
    text = path.read_bytes()
    if path.suffix.lower() == ".json":
        doc = json.loads(text)
    else:
        try:
            import tomllib  # python >= 3.11
        except ImportError:
            import tomli as tomllib
        doc = tomllib.loads(text.decode("utf-8"))
    if "upper_bounds" not in doc:
        raise InputError(f"{path}: missing required key 'upper_bounds'")
    return validate_config(doc["upper_bounds"])


def validate_profile(
    config: MarketConfig,
    values,
    atol: float = 0.0,
) -> ValueProfile:
    """Check a value matrix against the config's box constraints.

    ``atol`` is the opt-in slack for sampler-produced profiles (rounding at
    the top of the equal-revenue support); validation is exact by default.
    """
    arr = np.asarray(values, dtype=float)
    if arr.shape != config.upper_bounds.shape:
        raise ProfileOutOfBoundsError(
            f"profile shape {arr.shape} does not match bounds shape {config.upper_bounds.shape}"
        )
    if np.any(~np.isfinite(arr)):
        raise ProfileOutOfBoundsError("profile entries must be finite")
    if np.any(arr < -atol) or np.any(arr > config.upper_bounds + atol):
        raise ProfileOutOfBoundsError("profile entry outside [0, upper bound]")
    return ValueProfile(np.clip(arr, 0.0, config.upper_bounds))


def full_surplus(config: MarketConfig, profile: ValueProfile) -> float:
    """Complete-information revenue: sum over goods of the highest value."""
    validate_profile(config, profile.values)
    return float(profile.values.max(axis=0).sum())


def regret_cap_formula(config: MarketConfig) -> float:
    """Closed-form worst-case expected regret: sum_j max_i vbar[i, j] / e."""
    return float(config.upper_bounds.max(axis=0).sum() / E)


def scale_config(config: MarketConfig, scale: float) -> MarketConfig:
    """Multiply every upper bound by a positive factor."""
    if not (isinstance(scale, (int, float)) and math.isfinite(scale) and scale > 0):
        raise NonPositiveScaleError(f"scale must be a positive finite real, got {scale!r}")
    return MarketConfig(config.upper_bounds * float(scale))
