"""Ex-post and expected regret, plus adversarial verification of the cap.

Ex-post regret at a value profile is the full surplus (sum over goods of the
highest value) minus the revenue the mechanism collects there under
truth-telling. The worst case over profiles for the separate reserve auction
is sum_j max_i vbar[i, j] / e, which the adversarial search must attain and
never exceed.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple, Union

import numpy as np

from .distributions import sample_array_by_tag, select_bidders, worst_case_values_from_z
from .errors import DimensionTooLargeError, InputError, ShapeMismatchError
from .market import E, MarketConfig, ValueProfile, validate_profile
from .mechanisms import (
    Mechanism,
    _resolve_good,
    expected_outcome,
    require_diagonal_digital_config,
)
from .rng import uniform_block


@dataclass(frozen=True)
class RegretReport:
    """Per-good and total regret, with estimator noise for Monte Carlo runs."""

    per_good: np.ndarray
    total: float
    estimator_se: Optional[float] = None
    n_samples: Optional[int] = None

    def __post_init__(self):
        pg = np.asarray(self.per_good, dtype=float).copy()
        pg.setflags(write=False)
        object.__setattr__(self, "per_good", pg)
        if abs(float(pg.sum()) - self.total) > 1e-9:
            raise InputError("per-good regrets do not sum to the total")

    def to_json_dict(self) -> dict:
        return {
            "per_good": [float(x) for x in self.per_good],
            "total": float(self.total),
            "se": None if self.estimator_se is None else float(self.estimator_se),
            "n": self.n_samples,
        }


def ex_post_regret(
    mechanism: Mechanism, config: MarketConfig, profile: ValueProfile
) -> RegretReport:
    """Truth-telling regret at one profile: surplus minus collected revenue."""
    outcome = expected_outcome(mechanism, config, profile)
    per_good = profile.values.max(axis=0) - outcome.per_good_payments.sum(axis=0)
    return RegretReport(per_good, float(per_good.sum()))


def grand_bundle_full_info_revenue(profile: ValueProfile) -> float:
    """Best complete-information revenue from selling only the grand bundle.

    Whatever the bundle mechanism, its ex-post regret at this profile is at
    least the full surplus minus this quantity.
    """
    return float(profile.values.sum(axis=1).max())


# ---------------------------------------------------------------------------
# Vectorized per-good kernel. Mirrors mechanisms._resolve_good over a batch
# of value columns; equality with the scalar path is asserted in the tests.
# ---------------------------------------------------------------------------


def resolve_good_batch(
    values: np.ndarray, vbar: np.ndarray, anonymous: bool
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Winner index (-1 for none), allocation and payment per sampled column.

    ``values`` has shape (S, I); ``vbar`` is the bound column (I,).
    """
    S, I = values.shape
    w_anon = float(vbar.max())
    refs = np.full(I, w_anon) if anonymous else np.asarray(vbar, dtype=float)
    thresholds = refs / E

    top = values.max(axis=1)
    is_top = values == top[:, None]
    n_top = is_top.sum(axis=1)
    if I >= 2:
        second = np.partition(values, I - 2, axis=1)[:, I - 2]
    else:
        second = np.zeros(S)

    eligible = is_top & (vbar > 0)[None, :] & (refs > 0)[None, :]
    eligible &= values >= thresholds[None, :]

    winner_unique = np.argmax(values, axis=1)
    if anonymous:
        winner_tie = np.argmax(eligible, axis=1)
    else:
        key = np.where(eligible, np.broadcast_to(vbar, values.shape), np.inf)
        key_min = key.min(axis=1)
        winner_tie = np.argmax(key == key_min[:, None], axis=1)

    winner = np.where(n_top == 1, winner_unique, winner_tie)
    v_w = np.take_along_axis(values, winner[:, None], axis=1)[:, 0]
    ref_w = refs[winner]
    valid_unique = (n_top == 1) & (vbar[winner] > 0) & (ref_w > 0)
    valid_unique &= v_w >= thresholds[winner]
    valid = valid_unique | ((n_top > 1) & eligible.any(axis=1))

    ref_safe = np.where(ref_w > 0, ref_w, 1.0)
    v_safe = np.where(valid, v_w, 1.0)
    a = np.maximum(second, ref_safe / E)
    q = np.where(valid, 1.0 + np.log(v_safe / ref_safe), 0.0)
    t = np.where(valid, v_w + a * np.log(np.where(valid, a, 1.0) / ref_safe), 0.0)
    return np.where(valid, winner, -1), q, t


def pergood_regret_batch(
    mechanism: Mechanism, config: MarketConfig, values: np.ndarray
) -> np.ndarray:
    """Truth-telling per-good regret for a batch of profiles, shape (S, J)."""
    vbar = config.upper_bounds
    S = values.shape[0]
    if mechanism in (Mechanism.SSPRR, Mechanism.ANONYMOUS_SSPRR, Mechanism.POSTED_SEPARATE_1B):
        if mechanism is Mechanism.POSTED_SEPARATE_1B and config.bidder_count != 1:
            raise ShapeMismatchError("separate posted pricing is the single-bidder case")
        anonymous = mechanism is Mechanism.ANONYMOUS_SSPRR
        out = np.empty((S, config.good_count))
        for j in range(config.good_count):
            _, _, t = resolve_good_batch(values[:, :, j], vbar[:, j], anonymous)
            out[:, j] = values[:, :, j].max(axis=1) - t
        return out
    if mechanism is Mechanism.GRAND_BUNDLE_1B:
        if config.bidder_count != 1:
            raise ShapeMismatchError("grand bundling is defined for a single bidder")
        v = values[:, 0, :]
        b = v.sum(axis=1)
        bound_sum = float(vbar.sum())
        t = np.where(b > bound_sum / E, b - bound_sum / E, 0.0)
        share = np.divide(t, b, out=np.zeros_like(b), where=b > 0)
        return v - v * share[:, None]
    if mechanism is Mechanism.DIGITAL_GOODS:
        diag = require_diagonal_digital_config(config)
        idx = np.arange(len(diag))
        v = values[:, idx, idx]
        return np.where((diag > 0) & (v >= diag / E), diag / E, v)
    raise ShapeMismatchError(f"unsupported mechanism {mechanism!r}")


# ---------------------------------------------------------------------------
# Monte Carlo and quadrature estimators.
# ---------------------------------------------------------------------------

SamplerLike = Union[str, Callable[[MarketConfig, int, int, int], np.ndarray]]

_MC_CHUNK = 1 << 16


def expected_regret_mc(
    mechanism: Mechanism,
    sampler: SamplerLike,
    config: MarketConfig,
    n: int,
    seed: int,
    threads: int = 1,
) -> RegretReport:
    """Sample-mean regret under a distribution tag or sampler callable.

    The sampler callable receives (config, count, seed, start) and must be a
    pure function of the absolute sample indices, so the estimate is
    independent of chunking and thread count. The standard error reported is
    the sample standard deviation of the per-profile total over sqrt(n).
    """
    if n < 100:
        raise InputError("Monte Carlo estimates need at least 100 samples")
    if isinstance(sampler, str):
        tag = sampler

        def draw(cfg, count, sd, start):
            return sample_array_by_tag(tag, cfg, count, sd, start)

    else:
        draw = sampler

    chunks = [(s, min(s + _MC_CHUNK, n)) for s in range(0, n, _MC_CHUNK)]

    def run_chunk(bounds_pair):
        start, stop = bounds_pair
        vals = draw(config, stop - start, seed, start)
        pg = pergood_regret_batch(mechanism, config, vals)
        totals = pg.sum(axis=1)
        return pg.sum(axis=0), totals.sum(), (totals * totals).sum()

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            partials = list(pool.map(run_chunk, chunks))
    else:
        partials = [run_chunk(c) for c in chunks]

    # Deterministic reduction: combine in chunk order regardless of workers.
    pg_sum = np.zeros(config.good_count)
    tot_sum = 0.0
    sq_sum = 0.0
    for pg, ts, sq in partials:
        pg_sum += pg
        tot_sum += ts
        sq_sum += sq

    mean_pg = pg_sum / n
    mean_tot = tot_sum / n
    var = max(0.0, (sq_sum - n * mean_tot * mean_tot) / (n - 1)) if n > 1 else 0.0
    se = math.sqrt(var / n)
    # Rescale per-good means so they sum exactly to the reported total.
    mean_pg = mean_pg + (mean_tot - mean_pg.sum()) / config.good_count
    return RegretReport(mean_pg, mean_tot, estimator_se=se, n_samples=n)


def expected_regret_quadrature_worst_case(
    mechanism: Mechanism, config: MarketConfig, grid_size: int
) -> float:
    """Midpoint-rule expected regret under the adversarial distribution.

    Integrates truth-telling regret over the quantile cube of the picked
    bidders (one axis per bidder with picked goods); unpicked bidders hold
    zero values and contribute no axis.
    """
    if grid_size < 64:
        raise InputError("quadrature grid must have at least 64 points per axis")
    selection = select_bidders(config)
    effective = sorted(i for i, goods in selection.goods_of.items() if goods)
    dims = len(effective)
    if dims > 4:
        raise DimensionTooLargeError(
            "tensor-grid quadrature supports at most four picked bidders"
        )
    if dims == 0:
        return 0.0

    total_points = grid_size**dims
    pg_sum = np.zeros(config.good_count)
    step = 1.0 / grid_size
    chunk = max(1, _MC_CHUNK // max(1, config.bidder_count))
    for start in range(0, total_points, chunk):
        idx = np.arange(start, min(start + chunk, total_points))
        coords = np.unravel_index(idx, (grid_size,) * dims)
        z = np.zeros((len(idx), config.bidder_count))
        for d, bidder in enumerate(effective):
            z[:, bidder] = (coords[d] + 0.5) * step
        vals = worst_case_values_from_z(config, selection, z)
        pg_sum += pergood_regret_batch(mechanism, config, vals).sum(axis=0)
    return float(pg_sum.sum() / total_points)


# ---------------------------------------------------------------------------
# Adversarial profile search.
# ---------------------------------------------------------------------------

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_N_STARTS = 64
_N_PASSES = 3
_GOLDEN_STEPS = 200


def _total_regret_scalar(
    mechanism: Mechanism, config: MarketConfig, values: np.ndarray
) -> float:
    """Fast truth-telling total regret for one profile (no object overhead)."""
    vbar = config.upper_bounds
    if mechanism in (Mechanism.SSPRR, Mechanism.ANONYMOUS_SSPRR, Mechanism.POSTED_SEPARATE_1B):
        anonymous = mechanism is Mechanism.ANONYMOUS_SSPRR
        total = 0.0
        for j in range(config.good_count):
            col = values[:, j]
            _, _, t = _resolve_good(col, vbar[:, j], anonymous)
            total += col.max() - t
        return float(total)
    return float(pergood_regret_batch(mechanism, config, values[None, :, :]).sum())


def adversarial_profile_search(
    mechanism: Mechanism,
    config: MarketConfig,
    budget: int = 5000,
    seed: int = 0,
) -> Tuple[ValueProfile, float]:
    """Maximize truth-telling regret over the bounds box.

    Random multi-start (``budget`` probes) followed by coordinatewise
    golden-section refinement of the best starts. Deterministic given the
    seed; returns the best profile found and its regret.
    """
    if budget < 1000:
        raise InputError("search budget must be at least 1000 probes")
    nb, ng = config.bidder_count, config.good_count
    vbar = config.upper_bounds

    u = uniform_block(seed, 0, budget, nb * ng).reshape(budget, nb, ng)
    probes = u * vbar
    probe_regret = pergood_regret_batch(mechanism, config, probes).sum(axis=1)

    order = np.argsort(probe_regret)[::-1][: min(_N_STARTS, budget)]
    best_val = float(probe_regret[order[0]])
    best_x = probes[order[0]].copy()

    coords = [(i, j) for i in range(nb) for j in range(ng) if vbar[i, j] > 0]

    def objective(x: np.ndarray) -> float:
        return _total_regret_scalar(mechanism, config, x)

    for k in order:
        x = probes[k].copy()
        for _ in range(_N_PASSES):
            for (i, j) in coords:
                lo, hi = 0.0, float(vbar[i, j])
                span_tol = 1e-12 * hi

                def f(t: float) -> float:
                    x[i, j] = t
                    return objective(x)

                keep = float(x[i, j])
                cand_t = [lo, hi, keep]
                cand_v = [f(lo), f(hi), f(keep)]
                a, b = lo, hi
                c = b - _GOLDEN * (b - a)
                d = a + _GOLDEN * (b - a)
                fc, fd = f(c), f(d)
                for _step in range(_GOLDEN_STEPS):
                    if b - a <= span_tol:
                        break
                    if fc >= fd:
                        b, d, fd = d, c, fc
                        c = b - _GOLDEN * (b - a)
                        fc = f(c)
                    else:
                        a, c, fc = c, d, fd
                        d = a + _GOLDEN * (b - a)
                        fd = f(d)
                cand_t.extend([c, d])
                cand_v.extend([fc, fd])
                t_best = cand_t[int(np.argmax(cand_v))]
                x[i, j] = t_best
            val = objective(x)
            if val > best_val:
                best_val = val
                best_x = x.copy()

    profile = validate_profile(config, best_x)
    return profile, float(best_val)
