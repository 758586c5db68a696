"""Dense two-phase tableau simplex for small linear programs.

Solves  maximize c.x  subject to  A x <= b,  0 <= x <= upper  with a dense
numpy tableau. Variable upper bounds are handled implicitly by the usual
column-flip device (a variable parked at its upper bound is stored as its
complement), so box constraints cost no extra rows. Entering variables
follow Dantzig's rule; after a run of degenerate pivots the solver switches
to Bland's rule, which cannot cycle. Heavily degenerate problems (many zero
right-hand sides) are handled by an optional deterministic right-hand-side
perturbation that makes pivots strictly improving; it shifts the optimal
value by at most the dual mass times the perturbation, far below the
tolerances used anywhere in this package.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import NumericalFailure


class UnboundedProblem(NumericalFailure):
    """The objective can be increased without bound."""


class InfeasibleProblem(NumericalFailure):
    """No point satisfies the constraints."""


@dataclass(frozen=True)
class LPSolution:
    x: np.ndarray
    objective: float
    iterations: int


_STALL_LIMIT = 64


class _Tableau:
    """Dense simplex tableau with implicit variable upper bounds."""

    def __init__(self, tableau, basis, upper, tol):
        self.t = tableau
        self.basis = basis
        self.upper = upper  # aligned with tableau columns (inf = unbounded)
        self.flipped = np.zeros(len(upper), dtype=bool)
        self.tol = tol

    def flip(self, col: int) -> None:
        """Re-express column ``col`` through its complement u - x."""
        u = self.upper[col]
        self.t[:, -1] -= u * self.t[:, col]
        self.t[:, col] *= -1.0
        self.flipped[col] = ~self.flipped[col]

    def pivot(self, row: int, col: int) -> None:
        t = self.t
        t[row] /= t[row, col]
        factors = t[:, col]
        # Rank-1 update restricted to rows that actually change; early
        # tableaus are sparse and this keeps pivots cheap until fill-in.
        touched = np.flatnonzero(factors)
        touched = touched[touched != row]
        if touched.size:
            t[touched] -= np.outer(factors[touched], t[row])
        t[:, col] = 0.0
        t[row, col] = 1.0
        self.basis[row] = col

    def run(self, ncols: int, maxiter: int) -> int:
        """Drive the (maximization-form) objective row to optimality."""
        t, tol = self.t, self.tol
        m = t.shape[0] - 1
        iters = 0
        stall = 0
        bland = False
        last_obj = t[-1, -1]
        enterable = self.upper[:ncols] > tol  # zero-width variables stay fixed
        while True:
            red = t[-1, :ncols]
            if bland:
                candidates = np.flatnonzero((red < -tol) & enterable)
                if candidates.size == 0:
                    return iters
                col = int(candidates[0])
            else:
                masked = np.where(enterable, red, 0.0)
                col = int(np.argmin(masked))
                if masked[col] >= -tol:
                    return iters

            d = t[:m, col]
            rhs = t[:m, -1]
            ratios = np.full(m, np.inf)
            pos = d > tol
            ratios[pos] = rhs[pos] / d[pos]
            ub_basis = self.upper[self.basis]
            neg = (d < -tol) & np.isfinite(ub_basis)
            ratios[neg] = (rhs[neg] - ub_basis[neg]) / d[neg]
            np.maximum(ratios, 0.0, out=ratios)  # rounding can nudge rhs past a bound
            row = int(np.argmin(ratios))
            bound = self.upper[col]
            if not np.isfinite(ratios[row]) and not np.isfinite(bound):
                raise UnboundedProblem("no ratio bound for entering column")

            if bound <= ratios[row]:
                self.flip(col)  # entering variable parks at its other bound
            else:
                if bland:
                    tied = np.flatnonzero(
                        np.abs(ratios - ratios[row]) <= tol * (1 + abs(ratios[row]))
                    )
                    row = int(tied[np.argmin(self.basis[tied])])
                if d[row] < 0:
                    # Leaving variable exits at its upper bound: flip it (the
                    # row sign restores its basic column to a unit vector).
                    self.flip(self.basis[row])
                    t[row] *= -1.0
                self.pivot(row, col)

            iters += 1
            obj = t[-1, -1]
            if abs(obj - last_obj) <= tol * (1.0 + abs(last_obj)):
                stall += 1
                if stall >= _STALL_LIMIT:
                    bland = True
            else:
                stall = 0
                bland = False
            last_obj = obj
            if iters >= maxiter:
                raise NumericalFailure(f"simplex exceeded {maxiter} iterations")


def simplex_maximize(
    c,
    a_ub,
    b_ub,
    upper=None,
    maxiter: int = 200_000,
    tol: float = 1e-9,
    dtype=np.float64,
    perturb: float = 0.0,
) -> LPSolution:
    """Maximize c.x subject to a_ub x <= b_ub and 0 <= x <= upper.

    ``upper`` may be None (all unbounded) or a vector with np.inf for
    unbounded entries. ``perturb`` > 0 relaxes each right-hand side by a
    deterministic ramp of that magnitude to break degeneracy. Raises
    :class:`InfeasibleProblem` / :class:`UnboundedProblem` on pathological
    inputs and :class:`NumericalFailure` when the pivot limit is hit.
    """
    c = np.asarray(c, dtype=dtype)
    a = np.asarray(a_ub, dtype=dtype)
    b = np.asarray(b_ub, dtype=dtype).copy()
    m, n = a.shape
    if c.shape != (n,) or b.shape != (m,):
        raise ValueError("inconsistent LP dimensions")
    if upper is None:
        ub = np.full(n, np.inf, dtype=dtype)
    else:
        ub = np.asarray(upper, dtype=dtype).copy()
        if ub.shape != (n,) or np.any(ub < 0):
            raise ValueError("upper bounds must be a nonnegative length-n vector")
    if perturb > 0.0:
        scale = 1.0 + float(np.abs(b).max(initial=0.0))
        b = b + perturb * scale * (1.0 + np.arange(m, dtype=dtype)) / m

    # Standard form rows A x + s = b with b >= 0; rows with negative b are
    # negated and get artificial variables for phase 1.
    a = a.copy()
    neg = b < 0
    a[neg] *= -1.0
    b[neg] *= -1.0
    slack_sign = np.where(neg, -1.0, 1.0)
    n_art = int(neg.sum())

    ncols = n + m + n_art
    tableau = np.zeros((m + 1, ncols + 1), dtype=dtype)
    tableau[:m, :n] = a
    tableau[:m, n : n + m] = np.diag(slack_sign)
    col_upper = np.concatenate([ub, np.full(m + n_art, np.inf, dtype=dtype)])
    basis = np.empty(m, dtype=int)
    art_cols = []
    k = 0
    for i in range(m):
        if neg[i]:
            col = n + m + k
            tableau[i, col] = 1.0
            basis[i] = col
            art_cols.append(col)
            k += 1
        else:
            basis[i] = n + i
    tableau[:m, -1] = b

    state = _Tableau(tableau, basis, col_upper, tol)
    total_iters = 0
    if n_art:
        # Phase 1: minimize the sum of artificials.
        tableau[-1, :] = 0.0
        for col in art_cols:
            tableau[-1, col] = 1.0
        for i in range(m):
            if neg[i]:
                tableau[-1, :] -= tableau[i, :]
        total_iters += state.run(ncols, maxiter)
        if tableau[-1, -1] < -tol * (1 + abs(b).max()):
            raise InfeasibleProblem("phase 1 ended with positive infeasibility")
        # Drive any artificial still in the basis out of it; phase 2 never
        # prices artificial columns, so ones stuck on a redundant row at
        # value zero are simply ignored when the solution is read off.
        art_set = set(art_cols)
        for i in range(m):
            if basis[i] in art_set:
                pivot_col = next(
                    (j for j in range(n + m) if abs(tableau[i, j]) > tol),
                    None,
                )
                if pivot_col is not None:
                    state.pivot(i, pivot_col)

    # Phase 2: maximize c.x. Flipped columns keep their flipped sign, so the
    # raw cost row is built in original coordinates first, then re-expressed.
    tableau[-1, :] = 0.0
    tableau[-1, :n] = -c
    tableau[-1, :n][state.flipped[:n]] *= -1.0
    tableau[-1, -1] = float(c[state.flipped[:n]] @ ub[state.flipped[:n]])
    for i in range(m):
        if tableau[-1, basis[i]] != 0.0:
            tableau[-1, :] -= tableau[-1, basis[i]] * tableau[i, :]
    total_iters += state.run(n + m, maxiter)

    x = np.zeros(n, dtype=dtype)
    for i in range(m):
        if basis[i] < n:
            x[basis[i]] = tableau[i, -1]
    flipped_struct = state.flipped[:n]
    x[flipped_struct] = ub[flipped_struct] - x[flipped_struct]
    x = np.clip(x, 0.0, None)
    return LPSolution(
        x=np.asarray(x, dtype=float),
        objective=float(np.asarray(c, dtype=float) @ np.asarray(x, dtype=float)),
        iterations=total_iters,
    )
