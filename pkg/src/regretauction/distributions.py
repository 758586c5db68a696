"""Adversarial and comparison value distributions.

The central object is the equal-revenue marginal on [vbar/e, vbar] with an
atom of mass 1/e at vbar: any posted price in the support earns exactly
vbar/e. The adversarial joint distribution picks, per good, one bidder with
the highest bound, gives that bidder comonotonic equal-revenue values across
their picked goods (one common uniform z per bidder), zeros everywhere else,
and independent z's across bidders.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np

from .errors import InputError, QuantileRangeError
from .market import E, MarketConfig, ValueProfile, validate_profile
from .rng import uniform_block

#: Quantile of the atom: z at or above this maps to the upper bound.
ATOM_QUANTILE = 1.0 - 1.0 / E


@dataclass(frozen=True)
class SelectionMap:
    """Which bidder is picked for each good.

    ``picked[j]`` is the bidder index receiving positive values for good j
    (or None for a good whose bounds are all zero); ``goods_of[i]`` is the
    disjoint set of goods picked for bidder i.
    """

    picked: tuple
    goods_of: Dict[int, frozenset]

    def __post_init__(self):
        object.__setattr__(self, "picked", tuple(self.picked))
        object.__setattr__(
            self, "goods_of", {i: frozenset(g) for i, g in self.goods_of.items()}
        )


@dataclass(frozen=True)
class EqualRevenueMarginal:
    """Single equal-revenue marginal with support [vbar/e, vbar]."""

    upper_bound: float

    def __post_init__(self):
        if not (self.upper_bound > 0 and math.isfinite(self.upper_bound)):
            raise QuantileRangeError("upper bound must be positive and finite")

    def quantile(self, z: float) -> float:
        return er_quantile(self.upper_bound, z)

    def cdf(self, v: float) -> float:
        return er_cdf(self.upper_bound, v)


def select_bidders(config: MarketConfig) -> SelectionMap:
    """Pick, per good, a bidder with the maximal upper bound.

    Ties break to the lowest bidder index so exactly one bidder is picked
    per good. Goods whose bounds are all zero are left unpicked; they carry
    no value under the adversarial distribution.
    """
    vbar = config.upper_bounds
    picked: List = []
    goods_of: Dict[int, set] = {i: set() for i in range(config.bidder_count)}
    for j in range(config.good_count):
        col = vbar[:, j]
        if col.max() <= 0.0:
            picked.append(None)
            continue
        i = int(np.argmax(col))  # argmax returns the first (lowest) index on ties
        picked.append(i)
        goods_of[i].add(j)
    return SelectionMap(tuple(picked), goods_of)


def er_quantile(vbar: float, z: float) -> float:
    """Inverse CDF of the equal-revenue marginal.

    Returns vbar/(e(1-z)) below the atom quantile 1 - 1/e, and vbar at or
    above it.
    """
    if not (vbar > 0 and math.isfinite(vbar)):
        raise QuantileRangeError(f"upper bound must be positive and finite, got {vbar!r}")
    if not (0.0 <= z <= 1.0):
        raise QuantileRangeError(f"quantile must lie in [0, 1], got {z!r}")
    if z >= ATOM_QUANTILE:
        return float(vbar)
    return min(float(vbar), vbar / (E * (1.0 - z)))


def er_cdf(vbar: float, v: float) -> float:
    """CDF of the equal-revenue marginal (right-continuous)."""
    if not (vbar > 0 and math.isfinite(vbar)):
        raise QuantileRangeError(f"upper bound must be positive and finite, got {vbar!r}")
    if v < vbar / E:
        return 0.0
    if v >= vbar:
        return 1.0
    return 1.0 - vbar / (E * v)


def er_cdf_left(vbar: float, v: float) -> float:
    """Left limit of the CDF; differs from :func:`er_cdf` only at the atom."""
    if not (vbar > 0 and math.isfinite(vbar)):
        raise QuantileRangeError(f"upper bound must be positive and finite, got {vbar!r}")
    if v <= vbar / E:
        return 0.0
    if v > vbar:
        return 1.0
    return 1.0 - vbar / (E * v)


def _er_quantile_array(vbar: float, z: np.ndarray) -> np.ndarray:
    """Vectorized equal-revenue inverse CDF for a fixed upper bound."""
    out = np.full(z.shape, float(vbar))
    cont = z < ATOM_QUANTILE
    out[cont] = np.minimum(vbar, vbar / (E * (1.0 - z[cont])))
    return out


def worst_case_values_from_z(
    config: MarketConfig, selection: SelectionMap, z: np.ndarray
) -> np.ndarray:
    """Map per-bidder quantiles to value matrices under the adversarial law.

    ``z`` has shape (n, I); the result has shape (n, I, J) with, per good,
    exactly one positive entry in the picked bidder's row.
    """
    z = np.asarray(z, dtype=float)
    n = z.shape[0]
    vbar = config.upper_bounds
    values = np.zeros((n, config.bidder_count, config.good_count))
    for j, i in enumerate(selection.picked):
        if i is None:
            continue
        values[:, i, j] = _er_quantile_array(vbar[i, j], z[:, i])
    return values


def sample_worst_case(
    config: MarketConfig, selection: SelectionMap, n: int, seed: int
) -> List[ValueProfile]:
    """Draw ``n`` profiles from the adversarial joint distribution."""
    return [ValueProfile(v) for v in sample_worst_case_array(config, selection, n, seed)]


def sample_worst_case_array(
    config: MarketConfig, selection: SelectionMap, n: int, seed: int, start: int = 0
) -> np.ndarray:
    """Array form of :func:`sample_worst_case`, shape (n, I, J).

    ``start`` is the absolute index of the first sample; generation over
    disjoint index ranges concatenates bit-identically.
    """
    if n < 1:
        raise InputError("sample count must be at least 1")
    z = uniform_block(seed, start, n, config.bidder_count)
    return worst_case_values_from_z(config, selection, z)


def single_bidder_target(config: MarketConfig) -> int:
    """Bidder with the largest row sum of bounds (lowest index on ties)."""
    return int(np.argmax(config.upper_bounds.sum(axis=1)))


def sample_single_bidder_comonotonic(
    config: MarketConfig, n: int, seed: int
) -> List[ValueProfile]:
    """Tempting but weaker adversary: one bidder, comonotonic across all goods.

    Only the bidder with the largest total bound has nonzero values; their
    values are comonotonic equal-revenue across every good with a positive
    bound. The implied regret floor max_i sum_j vbar[i, j]/e falls short of
    the true cap whenever no single bidder holds every per-good maximum.
    """
    return [
        ValueProfile(v)
        for v in sample_single_bidder_comonotonic_array(config, n, seed)
    ]


def sample_single_bidder_comonotonic_array(
    config: MarketConfig, n: int, seed: int, start: int = 0
) -> np.ndarray:
    if n < 1:
        raise InputError("sample count must be at least 1")
    istar = single_bidder_target(config)
    z = uniform_block(seed, start, n, 1)[:, 0]
    vbar = config.upper_bounds
    values = np.zeros((n, config.bidder_count, config.good_count))
    for j in range(config.good_count):
        if vbar[istar, j] > 0:
            values[:, istar, j] = _er_quantile_array(vbar[istar, j], z)
    return values


def sample_iid_uniform(config: MarketConfig, n: int, seed: int) -> List[ValueProfile]:
    """Each value independent uniform on [0, vbar[i, j]]."""
    return [ValueProfile(v) for v in sample_iid_uniform_array(config, n, seed)]


def sample_iid_uniform_array(
    config: MarketConfig, n: int, seed: int, start: int = 0
) -> np.ndarray:
    if n < 1:
        raise InputError("sample count must be at least 1")
    width = config.bidder_count * config.good_count
    u = uniform_block(seed, start, n, width)
    shaped = u.reshape(n, config.bidder_count, config.good_count)
    return shaped * config.upper_bounds


#: Distribution tags accepted by the CLI and the Monte Carlo engine.
DISTRIBUTION_TAGS = ("worst_case", "single_bidder_comonotonic", "iid_uniform")


def sample_array_by_tag(
    tag: str, config: MarketConfig, n: int, seed: int, start: int = 0
) -> np.ndarray:
    """Dispatch sampling by distribution tag; returns an (n, I, J) array."""
    if tag == "worst_case":
        return sample_worst_case_array(config, select_bidders(config), n, seed, start)
    if tag == "single_bidder_comonotonic":
        return sample_single_bidder_comonotonic_array(config, n, seed, start)
    if tag == "iid_uniform":
        return sample_iid_uniform_array(config, n, seed, start)
    raise InputError(f"unknown distribution tag {tag!r}; expected one of {DISTRIBUTION_TAGS}")


def export_profiles_csv(
    profiles: Union[np.ndarray, Sequence[ValueProfile]],
    out: Union[str, Path, io.TextIOBase],
) -> None:
    """Write sampled profiles in long form: sample_id, bidder, good, value."""
    if not isinstance(profiles, np.ndarray):
        profiles = np.stack([p.values for p in profiles])
    closing = isinstance(out, (str, Path))
    fh = open(out, "w", newline="") if closing else out
    try:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "bidder", "good", "value"])
        n, nbidders, ngoods = profiles.shape
        for k in range(n):
            for i in range(nbidders):
                for j in range(ngoods):
                    writer.writerow([k, i, j, repr(float(profiles[k, i, j]))])
    finally:
        if closing:
            fh.close()
