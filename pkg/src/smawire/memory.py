"""Hysteresis branch memory: the stack of nested minor-loop branches.

Each level k holds the loading/unloading branch pair of one nested loop,
sampled at the reference temperature T0 on a uniform phase-fraction grid
over the loop's admissible range [x_lo, x_hi].  Temperature enters every
evaluation through the shared sensitivity term sigma_S(x)*(T - T0), added
after any scaling, so the separable structure of the outer interpolators
is preserved at every level.

Reversal bookkeeping follows the memory-wiping rule of return-point
(Madelung) hysteresis: a reversal at (x_rev, sigma_rev) opens level k+1
whose departing branch is the parent's branch of the same kind rescaled
affinely in stress so that it passes through the reversal point and meets
the parent at the opposite range endpoint; the branch of the other kind is
inherited.  Closing a loop (phase fraction returning to the range bound it
started from) pops two levels, landing exactly on the grandparent curves.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TextIO

import numpy as np

from . import constitutive as law
from .errors import (BranchRangeError, ClosureUnderflowError,
                     DegenerateReversalError)
from .params import MaterialParams

GRID_SIZE_DEFAULT = 201
RANGE_TOL = 1e-9         # admissible-range slack for queries
DEGENERATE_TOL = 1e-6    # minimum distance of a reversal from a range endpoint

KIND_A = "A"  # loading branch (austenite -> martensite)
KIND_M = "M"  # unloading branch (martensite -> austenite)


def _node_derivative(grid: np.ndarray, curve: np.ndarray) -> np.ndarray:
    """Central differences at interior nodes, one-sided at the ends."""
    d = np.empty_like(curve)
    h = grid[1] - grid[0]
    d[1:-1] = (curve[2:] - curve[:-2]) / (2.0 * h)
    d[0] = (curve[1] - curve[0]) / h
    d[-1] = (curve[-1] - curve[-2]) / h
    return d


@dataclass
class BranchRecord:
    """One nested loop level: T0-referenced branch curves over [x_lo, x_hi]."""

    level: int
    x_lo: float
    x_hi: float
    grid: np.ndarray
    curve_A: np.ndarray      # loading branch at T0 [Pa]
    curve_M: np.ndarray      # unloading branch at T0 [Pa]
    reversal_eps: float      # effective strain at the creating reversal

    def __post_init__(self):
        self.dcurve_A = _node_derivative(self.grid, self.curve_A)
        self.dcurve_M = _node_derivative(self.grid, self.curve_M)

    def curve(self, kind: str) -> np.ndarray:
        return self.curve_A if kind == KIND_A else self.curve_M

    def dcurve(self, kind: str) -> np.ndarray:
        return self.dcurve_A if kind == KIND_A else self.dcurve_M


class BranchMemory:
    """Stack of hysteresis branch records, bottom = outermost loop."""

    def __init__(self, params: MaterialParams, grid_size: int = GRID_SIZE_DEFAULT):
        if grid_size < 3:
            raise ValueError("grid_size must be >= 3")
        self.params = params
        self.grid_size = grid_size
        grid = np.linspace(0.0, 1.0, grid_size)
        self.stack: list[BranchRecord] = [BranchRecord(
            level=1, x_lo=0.0, x_hi=1.0, grid=grid,
            curve_A=np.asarray(law.sigma_A0(grid, params)),
            curve_M=np.asarray(law.sigma_M0(grid, params)),
            reversal_eps=0.0,
        )]

    # -- bookkeeping ---------------------------------------------------

    @property
    def top(self) -> BranchRecord:
        return self.stack[-1]

    @property
    def n_l(self) -> int:
        return self.stack[-1].level

    def clone(self) -> "BranchMemory":
        dup = BranchMemory.__new__(BranchMemory)
        dup.params = self.params
        dup.grid_size = self.grid_size
        dup.stack = [BranchRecord(r.level, r.x_lo, r.x_hi, r.grid,
                                  r.curve_A.copy(), r.curve_M.copy(),
                                  r.reversal_eps)
                     for r in self.stack]
        return dup

    def _check_range(self, x_M: float) -> float:
        rec = self.top
        if x_M < rec.x_lo - RANGE_TOL or x_M > rec.x_hi + RANGE_TOL:
            raise BranchRangeError(
                f"x_M={x_M} outside branch range [{rec.x_lo}, {rec.x_hi}] "
                f"at level {rec.level}")
        return min(max(x_M, rec.x_lo), rec.x_hi)

    # -- evaluation ----------------------------------------------------

    def eval0(self, kind: str, x_M) -> np.ndarray:
        """T0-referenced branch stress of the current loop (no range check)."""
        rec = self.top
        return np.interp(x_M, rec.grid, rec.curve(kind))

    def branch_eval(self, kind: str, x_M: float, T: float) -> float:
        """Branch stress sigma_kind^(n_l)(x_M, T) [Pa]."""
        x = self._check_range(x_M)
        dT = T - self.params.T0
        return float(self.eval0(kind, x) + law.sigma_S(x, self.params) * dT)

    def branch_partials(self, kind: str, x_M: float, T: float) -> tuple[float, float]:
        """(d/dx_M, d/dT) of the current branch at (x_M, T).

        The scaled T0-curve has no closed form, so its slope comes from
        grid finite differences; the temperature term is analytic.
        """
        rec = self.top
        x = self._check_range(x_M)
        dT = T - self.params.T0
        d_dx = (np.interp(x, rec.grid, rec.dcurve(kind))
                + law.sigma_S_dx(x, self.params) * dT)
        d_dT = law.sigma_S(x, self.params)
        return float(d_dx), float(d_dT)

    def strain_bounds(self, T: float) -> tuple[float, float, float, float]:
        """Strain range limits (lo_A, hi_A, lo_M, hi_M) of the current loop.

        The limit h(x) = compliance(x)*sigma_branch(x, T) + eps_T*x is the
        wire strain at which the mixture stress sits exactly on the branch;
        evaluated at both range endpoints for both branch kinds.
        """
        p = self.params
        rec = self.top

        def chart(kind, x):
            return float(law.compliance(x, p) * self.branch_eval(kind, x, T)
                         + p.eps_T * x)

        return (chart(KIND_A, rec.x_lo), chart(KIND_A, rec.x_hi),
                chart(KIND_M, rec.x_lo), chart(KIND_M, rec.x_hi))

    # -- reversal / closure bookkeeping ---------------------------------

    def push_reversal(self, x_M_rev: float, T: float, new_kind: str) -> None:
        """Open loop level n_l + 1 at a reversal point.

        new_kind is the branch the trajectory departs on after the
        reversal: KIND_M after a loading reversal (new loop below the
        reversal), KIND_A after an unloading reversal (new loop above).
        """
        parent = self.top
        if not (parent.x_lo + DEGENERATE_TOL < x_M_rev < parent.x_hi - DEGENERATE_TOL):
            raise DegenerateReversalError(
                f"reversal at x_M={x_M_rev} within {DEGENERATE_TOL} of range "
                f"[{parent.x_lo}, {parent.x_hi}]: no room for a minor loop")
        if new_kind == KIND_M:
            x_lo, x_hi = parent.x_lo, x_M_rev
            anchor, opposite = x_M_rev, parent.x_lo
        elif new_kind == KIND_A:
            x_lo, x_hi = x_M_rev, parent.x_hi
            anchor, opposite = x_M_rev, parent.x_hi
        else:
            raise ValueError(f"unknown branch kind {new_kind!r}")

        grid = np.linspace(x_lo, x_hi, self.grid_size)
        inherit = KIND_A if new_kind == KIND_M else KIND_M
        scaled_parent = np.interp(grid, parent.grid, parent.curve(new_kind))
        # Affine stress rescale: through the departure point (where the two
        # parent branches meet the trajectory) and the parent's own value at
        # the opposite endpoint.
        y_anchor = float(np.interp(anchor, parent.grid, parent.curve(inherit)))
        y_opp = float(np.interp(opposite, parent.grid, parent.curve(new_kind)))
        denom = float(np.interp(anchor, parent.grid, parent.curve(new_kind))) - y_opp
        if abs(denom) < 1e-6 * max(1.0, abs(y_anchor - y_opp)):
            raise DegenerateReversalError(
                f"parent branch flat between x={opposite} and x={anchor}")
        a = (y_anchor - y_opp) / denom
        b = y_opp * (1.0 - a)
        scaled = a * scaled_parent + b

        inherited = np.interp(grid, parent.grid, parent.curve(inherit))
        # The rescale can overshoot the inherited branch near the anchor
        # when the parent curve is locally steeper there; clamp onto the
        # inherited envelope so loading stays above unloading everywhere.
        scaled = (np.minimum(scaled, inherited) if new_kind == KIND_M
                  else np.maximum(scaled, inherited))
        curve_A, curve_M = ((inherited, scaled) if new_kind == KIND_M
                            else (scaled, inherited))
        sig_rev = float(np.interp(anchor, parent.grid, parent.curve(inherit))
                        + law.sigma_S(anchor, self.params) * (T - self.params.T0))
        rev_eps = float(law.compliance(x_M_rev, self.params) * sig_rev
                        + self.params.eps_T * x_M_rev)
        self.stack.append(BranchRecord(
            level=parent.level + 1, x_lo=x_lo, x_hi=x_hi, grid=grid,
            curve_A=np.asarray(curve_A), curve_M=np.asarray(curve_M),
            reversal_eps=rev_eps))

    def push_copy(self, x_M_rev: float, T: float) -> None:
        """Open level n_l + 1 as an exact copy of the parent curves.

        Used for direction reversals at a range endpoint (full-martensite
        turnaround), where the affine rescale degenerates to the identity.
        """
        parent = self.top
        sig_rev = self.branch_eval(KIND_A, min(max(x_M_rev, parent.x_lo),
                                               parent.x_hi), T)
        rev_eps = float(law.compliance(x_M_rev, self.params) * sig_rev
                        + self.params.eps_T * x_M_rev)
        self.stack.append(BranchRecord(
            level=parent.level + 1, x_lo=parent.x_lo, x_hi=parent.x_hi,
            grid=parent.grid.copy(), curve_A=parent.curve_A.copy(),
            curve_M=parent.curve_M.copy(), reversal_eps=rev_eps))

    def pop_closure(self) -> None:
        """Close the current inner loop: n_l -> n_l - 2."""
        if self.n_l < 3:
            raise ClosureUnderflowError(
                f"loop closure needs n_l >= 3, have n_l={self.n_l}")
        del self.stack[-2:]

    def reset_to_outer(self) -> None:
        """Wipe all minor loops (full transformation reached)."""
        del self.stack[1:]

    # -- diagnostics -----------------------------------------------------

    def dump(self, stream: TextIO) -> None:
        """Write the branch stack as plottable structured text."""
        for rec in self.stack:
            stream.write(f"level {rec.level}  x_lo {rec.x_lo:.9f}  "
                         f"x_hi {rec.x_hi:.9f}  reversal_eps {rec.reversal_eps:.9f}\n")
            stream.write("x_M " + " ".join(f"{x:.6f}" for x in rec.grid) + "\n")
            stream.write("sigma_A0 " + " ".join(f"{y:.6e}" for y in rec.curve_A) + "\n")
            stream.write("sigma_M0 " + " ".join(f"{y:.6e}" for y in rec.curve_M) + "\n")
