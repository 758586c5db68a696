"""Auction mechanisms as pure maps from reported profiles to outcomes.

The flagship format sells each good in its own second-price auction with a
bidder-specific random reserve whose CDF is G(r) = 1 + ln(r / vbar) on
[vbar/e, vbar]. In expectation this gives the unique highest reporter an
allocation probability 1 + ln(v / vbar) and an expected payment

    v - vbar/e                     when the runner-up is below vbar/e,
    v + v2 * ln(v2 / vbar)         when vbar/e <= v2 < v,

both special cases of t = v + a * ln(a / vbar) with a = max(v2, vbar/e).
On a tie, the good goes to the tied-and-eligible bidder with the lowest
upper bound (lowest index as the final tie-break), at q = 1 + ln(v / vbar)
and t = v + v * ln(v / vbar).

Variants: an anonymous-reserve version scaling reserves by the good's
maximal bound across bidders, a single-bidder randomized grand bundle, and
a per-bidder posted-price rule for unlimited-supply (digital) goods.
"""

from __future__ import annotations

import enum
import math
from typing import List, Optional, Tuple

import numpy as np

from .errors import (
    NotSingleBidderError,
    ProfileOutOfBoundsError,
    ShapeMismatchError,
)
from .market import (
    E,
    MarketConfig,
    Outcome,
    RealizedOutcome,
    ValueProfile,
    validate_profile,
)
from .rng import uniform_block


class Mechanism(enum.Enum):
    """Registry of implemented mechanisms, keyed by CLI tag."""

    SSPRR = "ssprr"
    ANONYMOUS_SSPRR = "anonymous"
    GRAND_BUNDLE_1B = "bundle1b"
    DIGITAL_GOODS = "digital"
    POSTED_SEPARATE_1B = "posted1b"

    @classmethod
    def from_tag(cls, tag: str) -> "Mechanism":
        for m in cls:
            if m.value == tag:
                return m
        raise ShapeMismatchError(
            f"unknown mechanism tag {tag!r}; expected one of "
            f"{[m.value for m in cls]}"
        )


def _resolve_good(
    values: np.ndarray,
    vbar: np.ndarray,
    anonymous: bool,
) -> Tuple[Optional[int], float, float]:
    """Winner, allocation probability and expected payment for one good.

    ``values`` and ``vbar`` are the column for this good. With
    ``anonymous=True`` the reserve reference is the column's maximal bound
    for every bidder; otherwise each bidder faces their own bound.
    """
    n = len(values)
    top = float(values.max())
    ref_anon = float(vbar.max())
    maxers = [s for s in range(n) if values[s] == top]

    if len(maxers) == 1:
        w = maxers[0]
        ref = ref_anon if anonymous else float(vbar[w])
        if ref <= 0.0 or vbar[w] <= 0.0 or values[w] < ref / E:
            return None, 0.0, 0.0
        others = np.delete(values, w)
        o = float(others.max()) if others.size else 0.0
        a = max(o, ref / E)
        q = 1.0 + math.log(values[w] / ref)
        t = values[w] + a * math.log(a / ref)
        return w, q, t

    # Tied highest reporters: keep those at or above their reserve's lower
    # support point, then award to the lowest reference bound.
    eligible = []
    for s in maxers:
        ref = ref_anon if anonymous else float(vbar[s])
        if ref > 0.0 and vbar[s] > 0.0 and values[s] >= ref / E:
            eligible.append(s)
    if not eligible:
        return None, 0.0, 0.0
    if anonymous:
        w = min(eligible)
    else:
        w = min(eligible, key=lambda s: (vbar[s], s))
    ref = ref_anon if anonymous else float(vbar[w])
    v = float(values[w])
    q = 1.0 + math.log(v / ref)
    t = v + v * math.log(v / ref)
    return w, q, t


def _separate_expected_outcome(
    config: MarketConfig, report: ValueProfile, anonymous: bool
) -> Outcome:
    values = report.values
    nb, ng = config.bidder_count, config.good_count
    q = np.zeros((nb, ng))
    tg = np.zeros((nb, ng))
    for j in range(ng):
        w, qw, tw = _resolve_good(values[:, j], config.upper_bounds[:, j], anonymous)
        if w is not None:
            q[w, j] = qw
            tg[w, j] = tw
    return Outcome(q, tg.sum(axis=1), tg)


def ssprr_expected_outcome(config: MarketConfig, report: ValueProfile) -> Outcome:
    """Separate second-price auctions with bidder-specific random reserves."""
    validate_profile(config, report.values)
    return _separate_expected_outcome(config, report, anonymous=False)


def anonymous_ssprr_expected_outcome(
    config: MarketConfig, report: ValueProfile
) -> Outcome:
    """Variant with reserves scaled by the good's maximal bound across bidders.

    The winner's allocation is 1 + ln(v / W) with W = max_i vbar[i, j],
    gated on v >= W/e; the payment follows the same envelope form as the
    bidder-specific auction with W as the reference bound.
    """
    validate_profile(config, report.values)
    return _separate_expected_outcome(config, report, anonymous=True)


def _realize_from_uniforms(
    config: MarketConfig, report: ValueProfile, u: np.ndarray
) -> RealizedOutcome:
    """Execute the reserve auction with explicit uniforms, one per (i, j)."""
    values = report.values
    nb, ng = config.bidder_count, config.good_count
    winners: List[Optional[int]] = [None] * ng
    prices = np.zeros(ng)
    reserves = np.full((nb, ng), np.nan)
    for j in range(ng):
        w, _, _ = _resolve_good(values[:, j], config.upper_bounds[:, j], anonymous=False)
        if w is None:
            continue
        r = config.upper_bounds[w, j] * math.exp(u[w, j] - 1.0)
        reserves[w, j] = r
        if values[w, j] >= r:
            others = np.delete(values[:, j], w)
            o = float(others.max()) if others.size else 0.0
            winners[j] = w
            prices[j] = max(o, r)
    return RealizedOutcome(winners, prices, reserves)


def ssprr_sampled_outcome(
    config: MarketConfig, report: ValueProfile, seed: int
) -> RealizedOutcome:
    """One realized execution: draw reserves r = vbar * exp(u - 1), u ~ U[0,1].

    The candidate winner per good (highest reporter, ties as in the expected
    form) buys at max(runner-up, reserve) whenever their bid is at or above
    the reserve.
    """
    validate_profile(config, report.values)
    u = uniform_block(seed, 0, 1, config.bidder_count * config.good_count)
    u = u.reshape(config.bidder_count, config.good_count)
    return _realize_from_uniforms(config, report, u)


def ssprr_sampled_batch(
    config: MarketConfig, report: ValueProfile, n: int, seed: int, start: int = 0
) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized realized draws for a fixed report.

    Returns (sold, prices), each of shape (n, J). Sample k uses the same
    uniforms as ``ssprr_sampled_outcome(config, report, seed)`` would at
    absolute index k, so chunked generation is bit-reproducible.
    """
    validate_profile(config, report.values)
    nb, ng = config.bidder_count, config.good_count
    u = uniform_block(seed, start, n, nb * ng).reshape(n, nb, ng)
    sold = np.zeros((n, ng), dtype=bool)
    prices = np.zeros((n, ng))
    for j in range(ng):
        w, _, _ = _resolve_good(
            report.values[:, j], config.upper_bounds[:, j], anonymous=False
        )
        if w is None:
            continue
        r = config.upper_bounds[w, j] * np.exp(u[:, w, j] - 1.0)
        win = report.values[w, j] >= r
        others = np.delete(report.values[:, j], w)
        o = float(others.max()) if others.size else 0.0
        sold[:, j] = win
        prices[win, j] = np.maximum(o, r[win])
    return sold, prices


def grand_bundle_outcome_1b(config: MarketConfig, report: ValueProfile) -> Outcome:
    """Randomized grand bundling for a single buyer.

    With b the reported bundle value and B the summed bounds, the bundle is
    allocated with probability 1 + ln(b / B) at expected payment b - B/e
    whenever b exceeds B/e, and withheld otherwise. Per-good payments are
    attributed proportionally to the good's share of the bundle bid.
    """
    if config.bidder_count != 1:
        raise NotSingleBidderError("grand bundling is defined for a single bidder")
    validate_profile(config, report.values)
    b = float(report.values.sum())
    bound_sum = float(config.upper_bounds.sum())
    ng = config.good_count
    if b > bound_sum / E:
        prob = 1.0 + math.log(b / bound_sum)
        t = b - bound_sum / E
        q = np.full((1, ng), prob)
        tg = (report.values / b) * t
    else:
        q = np.zeros((1, ng))
        tg = np.zeros((1, ng))
    return Outcome(q, tg.sum(axis=1), tg)


def digital_goods_outcome(bounds, report) -> Outcome:
    """Per-bidder posted-price rule for an unlimited-supply good.

    Bidder i receives the good with probability 1 + ln(v_i / vbar_i) and
    pays v_i - vbar_i/e whenever v_i is at or above vbar_i/e; allocations
    are not capped across bidders. Outcome arrays have one column: a single
    good in unlimited supply.
    """
    vbar = np.asarray(bounds, dtype=float)
    v = np.asarray(report, dtype=float)
    if vbar.ndim != 1 or v.shape != vbar.shape:
        raise ShapeMismatchError("bounds and report must be equal-length vectors")
    if np.any(~np.isfinite(v)) or np.any(v < 0) or np.any(v > vbar):
        raise ProfileOutOfBoundsError("report entry outside [0, upper bound]")
    n = len(vbar)
    q = np.zeros(n)
    t = np.zeros(n)
    active = (vbar > 0) & (v >= vbar / E)
    q[active] = 1.0 + np.log(v[active] / vbar[active])
    t[active] = v[active] - vbar[active] / E
    return Outcome(q[:, None], t, t[:, None], supply_capped=False)


def require_diagonal_digital_config(config: MarketConfig) -> np.ndarray:
    """Digital goods in matrix form: square config, off-diagonal bounds zero.

    Bidder i demands only good i, which stands in for one unit of the
    unlimited-supply good. Returns the diagonal bound vector.
    """
    vbar = config.upper_bounds
    if vbar.shape[0] != vbar.shape[1]:
        raise ShapeMismatchError(
            "digital goods need a square config (one good per bidder)"
        )
    if np.any(vbar[~np.eye(vbar.shape[0], dtype=bool)] != 0):
        raise ShapeMismatchError("digital goods config must be diagonal")
    return np.diag(vbar).copy()


def expected_outcome(
    mechanism: Mechanism, config: MarketConfig, report: ValueProfile
) -> Outcome:
    """Dispatch a reported profile through the chosen mechanism."""
    if mechanism is Mechanism.SSPRR:
        return ssprr_expected_outcome(config, report)
    if mechanism is Mechanism.ANONYMOUS_SSPRR:
        return anonymous_ssprr_expected_outcome(config, report)
    if mechanism is Mechanism.GRAND_BUNDLE_1B:
        return grand_bundle_outcome_1b(config, report)
    if mechanism is Mechanism.POSTED_SEPARATE_1B:
        if config.bidder_count != 1:
            raise NotSingleBidderError("separate posted pricing is the single-bidder case")
        return ssprr_expected_outcome(config, report)
    if mechanism is Mechanism.DIGITAL_GOODS:
        vbar = require_diagonal_digital_config(config)
        validate_profile(config, report.values)
        flat = digital_goods_outcome(vbar, np.diag(report.values).copy())
        n = len(vbar)
        q = np.zeros((n, n))
        tg = np.zeros((n, n))
        np.fill_diagonal(q, flat.allocations[:, 0])
        np.fill_diagonal(tg, flat.per_good_payments[:, 0])
        return Outcome(q, tg.sum(axis=1), tg, supply_capped=False)
    raise ShapeMismatchError(f"unsupported mechanism {mechanism!r}")
