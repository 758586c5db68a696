"""Grid-based incentive audits: truthfulness, participation, dominance.

These are finite certificates, not proofs: each check sweeps a deviation
grid at a configurable resolution and tolerance. For the good-separable
auctions the sweep runs per good (utility is additive across goods and each
good's outcome depends only on that good's reports), which is equivalent to
full-profile, full-vector-deviation checking; the tests assert that
equivalence exhaustively on small instances. The single-buyer bundle check
runs on the bundle-bid line, the only coordinate its outcome depends on.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import InputError, ShapeMismatchError
from .market import E, MarketConfig, ValueProfile, validate_profile
from .mechanisms import (
    Mechanism,
    expected_outcome,
    require_diagonal_digital_config,
)
from .regret import resolve_good_batch

DEFAULT_TOLERANCE = 1e-9
_MAX_RECORDED = 25


@dataclass(frozen=True)
class DeviationGrid:
    """Resolution of the audit grid on each (bidder, good) axis.

    Each axis spans [0, vbar] with ``points`` uniform nodes plus the two
    special points vbar/e (lower reserve support) and vbar.
    """

    points: int = 50
    includes_boundary: bool = True

    def __post_init__(self):
        if self.points < 2:
            raise InputError("deviation grid needs at least 2 points per axis")

    def axis(self, vbar: float) -> np.ndarray:
        if vbar <= 0:
            return np.array([0.0])
        if self.includes_boundary:
            base = np.linspace(0.0, vbar, self.points)
        else:
            base = np.linspace(0.0, vbar, self.points + 2)[1:-1]
        return np.unique(np.concatenate([base, [vbar / E, vbar]]))


@dataclass(frozen=True)
class AuditReport:
    """Outcome of one grid audit.

    ``max_violation`` is the largest deviation gain (truthfulness) or
    payoff shortfall (participation) observed; negative values mean the
    property held with slack everywhere.
    """

    mechanism: Mechanism
    check: str
    grid_points: int
    tolerance: float
    checks: int
    max_violation: float
    violation_count: int
    violations: Tuple[dict, ...]

    @property
    def passed(self) -> bool:
        return self.violation_count == 0

    def to_json_dict(self) -> dict:
        return {
            "mechanism": self.mechanism.value,
            "check": self.check,
            "grid_resolution": self.grid_points,
            "tolerance": self.tolerance,
            "checks": self.checks,
            "max_violation": float(self.max_violation),
            "violation_count": self.violation_count,
            "violations": list(self.violations),
        }


@dataclass(frozen=True)
class DominanceReport:
    """Pointwise regret comparison between two mechanisms on the grid."""

    weakly_dominated_everywhere: bool
    strict_witnesses: Tuple[ValueProfile, ...]
    max_violation: float
    strict_witness_count: int
    per_good_max_gap: Tuple[float, ...]

    def to_json_dict(self) -> dict:
        return {
            "weakly_dominated_everywhere": self.weakly_dominated_everywhere,
            "max_violation": float(self.max_violation),
            "strict_witness_count": self.strict_witness_count,
            "strict_witnesses": [
                [[float(x) for x in row] for row in w.values]
                for w in self.strict_witnesses[:_MAX_RECORDED]
            ],
            "per_good_max_gap": [float(x) for x in self.per_good_max_gap],
        }


def _cartesian(axes: List[np.ndarray]) -> np.ndarray:
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def _record(violations: list, entry: dict) -> None:
    if len(violations) < _MAX_RECORDED:
        violations.append(entry)


def _separable_utility_scan(
    config: MarketConfig,
    grid: DeviationGrid,
    anonymous: bool,
    tolerance: float,
):
    """Yield per-good truthfulness data for the separate reserve auctions.

    For each good: the grid columns, truth utilities per bidder, and the
    best deviation gain per bidder with its witness.
    """
    vbar = config.upper_bounds
    for j in range(config.good_count):
        axes = [grid.axis(float(vbar[i, j])) for i in range(config.bidder_count)]
        columns = _cartesian(axes)
        w, q, t = resolve_good_batch(columns, vbar[:, j], anonymous)
        yield j, axes, columns, w, q, t


def verify_dsic(
    mechanism: Mechanism,
    config: MarketConfig,
    grid: DeviationGrid = DeviationGrid(),
    tolerance: float = DEFAULT_TOLERANCE,
) -> AuditReport:
    """Check that no grid deviation beats truthful reporting.

    A violation is a (profile, bidder, deviation) triple whose deviation
    utility exceeds the truthful utility by more than the tolerance.
    """
    violations: List[dict] = []
    max_gain = -np.inf
    checks = 0

    if mechanism in (Mechanism.SSPRR, Mechanism.ANONYMOUS_SSPRR, Mechanism.POSTED_SEPARATE_1B):
        if mechanism is Mechanism.POSTED_SEPARATE_1B and config.bidder_count != 1:
            raise ShapeMismatchError("separate posted pricing is the single-bidder case")
        anonymous = mechanism is Mechanism.ANONYMOUS_SSPRR
        vbar = config.upper_bounds
        for j, axes, columns, w, q, t in _separable_utility_scan(
            config, grid, anonymous, tolerance
        ):
            for i in range(config.bidder_count):
                vi = columns[:, i]
                u_true = np.where(w == i, vi * q - t, 0.0)
                for d in axes[i]:
                    mod = columns.copy()
                    mod[:, i] = d
                    wd, qd, td = resolve_good_batch(mod, vbar[:, j], anonymous)
                    gains = np.where(wd == i, vi * qd - td, 0.0) - u_true
                    checks += gains.size
                    g = float(gains.max())
                    max_gain = max(max_gain, g)
                    if g > tolerance:
                        for k in np.flatnonzero(gains > tolerance)[:3]:
                            _record(
                                violations,
                                {
                                    "good": j,
                                    "bidder": i,
                                    "column": [float(x) for x in columns[k]],
                                    "deviation": float(d),
                                    "gain": float(gains[k]),
                                },
                            )
    elif mechanism is Mechanism.DIGITAL_GOODS:
        diag = require_diagonal_digital_config(config)
        for i, vb in enumerate(diag):
            axis = grid.axis(float(vb))
            if vb > 0:
                active = axis >= vb / E
                qv = np.where(active, 1.0 + np.log(np.where(active, axis / vb, 1.0)), 0.0)
                tv = np.where(active, axis - vb / E, 0.0)
            else:
                qv = np.zeros_like(axis)
                tv = np.zeros_like(axis)
            u_dev = axis[:, None] * qv[None, :] - tv[None, :]
            u_true = axis * qv - tv
            gains = u_dev - u_true[:, None]
            checks += gains.size
            g = float(gains.max())
            max_gain = max(max_gain, g)
            if g > tolerance:
                vi_idx, d_idx = np.unravel_index(np.argmax(gains), gains.shape)
                _record(
                    violations,
                    {
                        "good": i,
                        "bidder": i,
                        "column": [float(axis[vi_idx])],
                        "deviation": float(axis[d_idx]),
                        "gain": g,
                    },
                )
    elif mechanism is Mechanism.GRAND_BUNDLE_1B:
        if config.bidder_count != 1:
            raise ShapeMismatchError("grand bundling is defined for a single bidder")
        bound_sum = float(config.upper_bounds.sum())
        axis = grid.axis(bound_sum)
        sale = axis > bound_sum / E
        qb = np.where(sale, 1.0 + np.log(np.where(sale, axis, 1.0) / bound_sum), 0.0)
        tb = np.where(sale, axis - bound_sum / E, 0.0)
        u_dev = axis[:, None] * qb[None, :] - tb[None, :]
        u_true = axis * qb - tb
        gains = u_dev - u_true[:, None]
        checks += gains.size
        max_gain = float(gains.max())
        if max_gain > tolerance:
            b_idx, d_idx = np.unravel_index(np.argmax(gains), gains.shape)
            _record(
                violations,
                {
                    "good": None,
                    "bidder": 0,
                    "column": [float(axis[b_idx])],
                    "deviation": float(axis[d_idx]),
                    "gain": max_gain,
                },
            )
    else:
        raise ShapeMismatchError(f"unsupported mechanism {mechanism!r}")

    return AuditReport(
        mechanism=mechanism,
        check="dsic",
        grid_points=grid.points,
        tolerance=tolerance,
        checks=checks,
        max_violation=float(max_gain),
        violation_count=len(violations),
        violations=tuple(violations),
    )


def verify_participation_security(
    mechanism: Mechanism,
    config: MarketConfig,
    grid: DeviationGrid = DeviationGrid(),
    tolerance: float = 1e-12,
) -> AuditReport:
    """Check the all-zeros report guarantees exactly zero ex-post payoff,
    and that truthful reporting never yields payoff below -tolerance."""
    violations: List[dict] = []
    worst = -np.inf
    checks = 0

    if mechanism in (Mechanism.SSPRR, Mechanism.ANONYMOUS_SSPRR, Mechanism.POSTED_SEPARATE_1B):
        if mechanism is Mechanism.POSTED_SEPARATE_1B and config.bidder_count != 1:
            raise ShapeMismatchError("separate posted pricing is the single-bidder case")
        anonymous = mechanism is Mechanism.ANONYMOUS_SSPRR
        vbar = config.upper_bounds
        for j, axes, columns, w, q, t in _separable_utility_scan(
            config, grid, anonymous, tolerance
        ):
            for i in range(config.bidder_count):
                vi = columns[:, i]
                u_true = np.where(w == i, vi * q - t, 0.0)
                checks += u_true.size
                shortfall = float(-u_true.min())
                worst = max(worst, shortfall)
                if shortfall > tolerance:
                    k = int(np.argmin(u_true))
                    _record(
                        violations,
                        {
                            "kind": "truthful_payoff",
                            "good": j,
                            "bidder": i,
                            "column": [float(x) for x in columns[k]],
                            "payoff": float(u_true[k]),
                        },
                    )
                mod = columns.copy()
                mod[:, i] = 0.0
                wd, qd, td = resolve_good_batch(mod, vbar[:, j], anonymous)
                u_zero = np.where(wd == i, 0.0 * qd - td, 0.0)
                checks += u_zero.size
                nonzero = float(np.abs(u_zero).max())
                worst = max(worst, nonzero)
                if nonzero > tolerance:
                    k = int(np.argmax(np.abs(u_zero)))
                    _record(
                        violations,
                        {
                            "kind": "zero_report_payoff",
                            "good": j,
                            "bidder": i,
                            "column": [float(x) for x in columns[k]],
                            "payoff": float(u_zero[k]),
                        },
                    )
    elif mechanism is Mechanism.DIGITAL_GOODS:
        diag = require_diagonal_digital_config(config)
        for i, vb in enumerate(diag):
            axis = grid.axis(float(vb))
            checks += axis.size + 1
            if vb > 0:
                active = axis >= vb / E
                qv = np.where(active, 1.0 + np.log(np.where(active, axis, 1.0) / vb), 0.0)
                tv = np.where(active, axis - vb / E, 0.0)
                u_true = axis * qv - tv
            else:
                u_true = np.zeros_like(axis)
            shortfall = float(-u_true.min())
            worst = max(worst, shortfall, 0.0)
            if shortfall > tolerance:
                k = int(np.argmin(u_true))
                _record(
                    violations,
                    {"kind": "truthful_payoff", "bidder": i, "value": float(axis[k]), "payoff": float(u_true[k])},
                )
    elif mechanism is Mechanism.GRAND_BUNDLE_1B:
        if config.bidder_count != 1:
            raise ShapeMismatchError("grand bundling is defined for a single bidder")
        bound_sum = float(config.upper_bounds.sum())
        axis = grid.axis(bound_sum)
        sale = axis > bound_sum / E
        qb = np.where(sale, 1.0 + np.log(np.where(sale, axis, 1.0) / bound_sum), 0.0)
        tb = np.where(sale, axis - bound_sum / E, 0.0)
        u_true = axis * qb - tb
        checks += axis.size + 1
        worst = max(float(-u_true.min()), 0.0)
        if worst > tolerance:
            k = int(np.argmin(u_true))
            _record(
                violations,
                {"kind": "truthful_payoff", "bidder": 0, "value": float(axis[k]), "payoff": float(u_true[k])},
            )
    else:
        raise ShapeMismatchError(f"unsupported mechanism {mechanism!r}")

    return AuditReport(
        mechanism=mechanism,
        check="participation_security",
        grid_points=grid.points,
        tolerance=tolerance,
        checks=checks,
        max_violation=float(worst),
        violation_count=len(violations),
        violations=tuple(violations),
    )


def compare_ex_post_regret(
    mech_a: Mechanism,
    mech_b: Mechanism,
    config: MarketConfig,
    grid: DeviationGrid = DeviationGrid(),
    tolerance: float = DEFAULT_TOLERANCE,
) -> DominanceReport:
    """Pointwise truth-telling regret comparison of two separable auctions.

    Reports whether mechanism A's regret is weakly below B's at every grid
    profile, with strict witnesses where A is strictly better. Because both
    mechanisms decompose per good, the grid maximum of the regret gap over
    full profiles equals the sum over goods of per-column maxima.
    """
    separable = (Mechanism.SSPRR, Mechanism.ANONYMOUS_SSPRR, Mechanism.POSTED_SEPARATE_1B)
    if mech_a not in separable or mech_b not in separable:
        raise ShapeMismatchError(
            "regret comparison is defined for the good-separable auctions"
        )
    vbar = config.upper_bounds
    per_good_max: List[float] = []
    witnesses: List[ValueProfile] = []
    witness_count = 0

    for j in range(config.good_count):
        axes = [grid.axis(float(vbar[i, j])) for i in range(config.bidder_count)]
        columns = _cartesian(axes)
        top = columns.max(axis=1)
        _, _, t_a = resolve_good_batch(
            columns, vbar[:, j], mech_a is Mechanism.ANONYMOUS_SSPRR
        )
        _, _, t_b = resolve_good_batch(
            columns, vbar[:, j], mech_b is Mechanism.ANONYMOUS_SSPRR
        )
        gap = (top - t_a) - (top - t_b)
        per_good_max.append(float(gap.max()))
        strict = np.flatnonzero(gap < -tolerance)
        witness_count += strict.size
        for k in strict[: max(0, _MAX_RECORDED - len(witnesses))]:
            values = np.zeros((config.bidder_count, config.good_count))
            values[:, j] = columns[k]
            witnesses.append(validate_profile(config, values))

    max_violation = float(sum(per_good_max))
    return DominanceReport(
        weakly_dominated_everywhere=max_violation <= tolerance,
        strict_witnesses=tuple(witnesses),
        max_violation=max_violation,
        strict_witness_count=witness_count,
        per_good_max_gap=tuple(per_good_max),
    )


def verify_dsic_exhaustive(
    mechanism: Mechanism,
    config: MarketConfig,
    grid: DeviationGrid,
    tolerance: float = DEFAULT_TOLERANCE,
) -> Tuple[int, float]:
    """Full-factorial truthfulness check (profiles x vector deviations).

    Brute-force reference for the separable scan; only tractable for tiny
    grids. Returns (violation count, max gain).
    """
    vbar = config.upper_bounds
    nb, ng = config.bidder_count, config.good_count
    axes = [[grid.axis(float(vbar[i, j])) for j in range(ng)] for i in range(nb)]
    profile_axes = [axes[i][j] for i in range(nb) for j in range(ng)]
    violations = 0
    max_gain = -np.inf
    for flat in itertools.product(*profile_axes):
        values = np.array(flat).reshape(nb, ng)
        profile = validate_profile(config, values)
        outcome = expected_outcome(mechanism, config, profile)
        for i in range(nb):
            u_true = float(values[i] @ outcome.allocations[i] - outcome.payments[i])
            for dev in itertools.product(*axes[i]):
                mod = values.copy()
                mod[i] = dev
                out_d = expected_outcome(mechanism, config, validate_profile(config, mod))
                u_dev = float(values[i] @ out_d.allocations[i] - out_d.payments[i])
                gain = u_dev - u_true
                max_gain = max(max_gain, gain)
                if gain > tolerance:
                    violations += 1
    return violations, float(max_gain)
