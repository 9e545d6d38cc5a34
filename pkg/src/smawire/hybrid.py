"""Event-driven hybrid reformulation of the SMA wire model.

The stiff phase-fraction kinetics are replaced by algebraic branch
attachment: while transforming, the mixture stress sits on the active
hysteresis branch, so x_M follows from a scalar root solve and only strain
and temperature flow continuously.  The discrete state (q, s, n_l) selects
one of five operative modes:

    AM0  tensioned loading      (q=+1, s=0)   stress on the loading branch
    MA0  tensioned unloading    (q=-1, s=0)   stress on the unloading branch
    M    full martensite        (q= 0, s=0)   x_M = 1, elastic
    MA1  slack, recovering      (q=-1, s=1)   zero stress, unloading branch
    AM1  slack, reorienting     (q=+1, s=1)   zero stress, loading branch

Transitions between modes are expressed as 16 guarded jump maps g1..g16;
the flow/jump predicates below mirror that automaton.  Loading modes carry
odd inner-loop indices n_l, unloading modes even ones, and every reversal
increments n_l while a loop closure decrements it by two.

Solutions are intended to be generated with flow priority: the state flows
while the flow conditions hold and jumps when a guard becomes active.
Between branch attachment and detachment the phase-fraction root can leave
the admissible range (elastic segments, guard overshoot during trial
steps); queries then clamp to the nearest range endpoint and report the
side, and the transformation rate is zero while clamped.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from . import constitutive as law
from .errors import (DegenerateReversalError, ModeInconsistencyError,
                     MultipleRootsError, NoRootError,
                     SingularDenominatorError)
from .memory import DEGENERATE_TOL, KIND_A, KIND_M, BranchMemory
from .params import MaterialParams

Q_AM = 1
Q_MA = -1
Q_M = 0

# Tolerance bands for guard predicates (flow-priority semantics: the
# boundary belongs to the flow set, jumps fire strictly past it).
PHI_TOL = 1e-12      # transformation-rate band [1/s]
EPS_TOL = 1e-9       # strain band [-]
STRESS_TOL = 10.0    # stress band [Pa]; covers root-refinement residual
XM_EVENT_TOL = 1e-9  # phase-fraction closeness for range-exit guards
# Slack entry fires this far above zero stress (tens of ns early at test
# strain rates) so reported stresses stay nonnegative to the sample.
SLACK_ENTRY_MARGIN = 1.0

JUMP_TARGETS = {
    1: "MA0", 2: "M", 3: "AM1", 4: "AM0", 5: "AM0", 6: "MA1", 7: "MA0",
    8: "MA0", 9: "MA1", 10: "MA1", 11: "MA0", 12: "AM1", 13: "AM1",
    14: "AM0", 15: "M", 16: "MA1",
}

# Jump priority groups: slack toggles, then mode reversals, then closures.
_SLACK_JUMPS = (3, 6, 9, 11, 14)
_REVERSAL_JUMPS = (1, 2, 5, 8, 12, 15, 16)
_CLOSURE_JUMPS = (4, 7, 10, 13)


def _priority(m: int) -> tuple[int, int]:
    if m in _SLACK_JUMPS:
        return (0, m)
    if m in _REVERSAL_JUMPS:
        return (1, m)
    return (2, m)


@dataclass
class DiscreteState:
    """Branch type q, slack flag s, inner-loop index n_l."""

    q: int
    s: int
    n_l: int

    def __post_init__(self):
        if self.q not in (Q_AM, Q_MA, Q_M):
            raise ValueError(f"q must be one of +1/-1/0, got {self.q}")
        if self.s not in (0, 1):
            raise ValueError(f"s must be 0 or 1, got {self.s}")
        if self.n_l < 1:
            raise ValueError(f"n_l must be >= 1, got {self.n_l}")
        if self.q == Q_M and (self.s != 0 or self.n_l != 1):
            raise ValueError("mode M requires s=0 and n_l=1")
        if self.q == Q_AM and self.n_l % 2 == 0:
            raise ValueError("loading modes carry odd n_l")
        if self.q == Q_MA and self.n_l % 2 == 1:
            raise ValueError("unloading modes carry even n_l")

    @property
    def mode(self) -> str:
        if self.q == Q_M:
            return "M"
        return ("AM" if self.q == Q_AM else "MA") + str(self.s)


@dataclass
class ContinuousState:
    """Strain and temperature, the only continuously flowing quantities."""

    eps: float
    T: float

    def __post_init__(self):
        if self.T <= 0.0:
            raise ValueError("temperature must be positive")


@dataclass
class HybridState:
    x_C: ContinuousState
    x_D: DiscreteState
    mem: BranchMemory

    def __post_init__(self):
        if self.mem.n_l != self.x_D.n_l:
            raise ModeInconsistencyError(
                f"branch memory at level {self.mem.n_l} but n_l={self.x_D.n_l}")

    @property
    def mode(self) -> str:
        return self.x_D.mode

    def clone(self) -> "HybridState":
        return HybridState(replace(self.x_C), replace(self.x_D), self.mem.clone())


def initial_state(p: MaterialParams, eps0: float = 0.0,
                  T_init: float = 298.0, mem: Optional[BranchMemory] = None,
                  grid_size: Optional[int] = None) -> HybridState:
    """Fresh full-austenite state on the outermost loading branch."""
    if mem is None:
        mem = BranchMemory(p) if grid_size is None else BranchMemory(p, grid_size)
    return HybridState(ContinuousState(eps0, T_init),
                       DiscreteState(Q_AM, 0, 1), mem)


def resolve_initial_mode(state: HybridState, u: tuple[float, float, float],
                         p: MaterialParams, limit: int = 8) -> HybridState:
    """Assign a guard-consistent operative mode to an initial condition.

    A user-supplied discrete state may sit inside a jump guard (a cold
    wire handed to the automaton as tensioned austenite, say); applying
    the jump maps until no guard is active yields the mode the automaton
    would select.  This is initial-condition resolution, not part of the
    simulated hybrid time domain.
    """
    for _ in range(limit):
        active = jump_check(state, u, p)
        if not active:
            return state
        state = jump_map(state, active[0], u, p)
    raise ModeInconsistencyError(
        f"initial mode did not settle within {limit} jump applications")


# ---------------------------------------------------------------------------
# Threshold stresses of the full-martensite mode
# ---------------------------------------------------------------------------

def sigma_bar(T: float, p: MaterialParams) -> float:
    """Loading-branch end stress sigma_A(1, T) [Pa]."""
    return float(law.sigma_A0(1.0, p) + law.sigma_S(1.0, p) * (T - p.T0))


def sigma_bar_S(p: MaterialParams) -> float:
    """Temperature sensitivity sigma_S(1) [Pa/K]."""
    return float(law.sigma_S(1.0, p))


def strain_threshold(T: float, p: MaterialParams) -> float:
    """Strain at which the loading branch ends in full martensite."""
    return sigma_bar(T, p) / p.E_M + p.eps_T


# ---------------------------------------------------------------------------
# Algebraic phase-fraction recovery
# ---------------------------------------------------------------------------

def _zeta_solve(state: HybridState, p: MaterialParams) -> tuple[float, int]:
    """Root of the branch-attachment equation; returns (x_M, side).

    side = 0 for an interior root, -1/+1 when no sign change exists and the
    value is clamped to the low/high range endpoint.
    """
    q, s = state.x_D.q, state.x_D.s
    if q == Q_M:
        return 1.0, 0
    rec = state.mem.top
    kind = KIND_A if q == Q_AM else KIND_M
    dT = state.x_C.T - p.T0
    curve0 = rec.curve(kind)
    g = curve0 + law.sigma_S(rec.grid, p) * dT
    if s == 0:
        g = g - law.stress(state.x_C.eps, rec.grid, p)

    sign = np.sign(g)
    exact = np.nonzero(sign == 0.0)[0]
    flips = np.nonzero(sign[:-1] * sign[1:] < 0.0)[0]
    hits = sorted(set(exact.tolist()) | set(flips.tolist()))
    if not hits:
        side = -1 if g[0] > 0.0 else 1
        return (rec.x_lo, side) if side < 0 else (rec.x_hi, side)
    if hits[-1] - hits[0] > 1:
        raise MultipleRootsError(
            f"branch attachment has multiple roots in "
            f"[{rec.x_lo}, {rec.x_hi}] (mode {state.mode}): calibration "
            f"does not guarantee unique phase-fraction recovery here")
    i = hits[0]
    if sign[i] == 0.0:
        return float(rec.grid[i]), 0

    def residual(x: float) -> float:
        val = (float(np.interp(x, rec.grid, curve0))
               + float(law.sigma_S(x, p)) * dT)
        if s == 0:
            val -= float(law.stress(state.x_C.eps, x, p))
        return val

    root = brentq(residual, rec.grid[i], rec.grid[i + 1], xtol=1e-10)
    return float(root), 0


def zeta_xM(state: HybridState, p: MaterialParams) -> float:
    """Phase fraction recovered from the mode's branch-attachment identity.

    Raises NoRootError when the bracketing sweep over the branch grid finds
    no sign change (miscalibrated parameters or inconsistent mode).
    """
    x, side = _zeta_solve(state, p)
    if side != 0:
        raise NoRootError(
            f"no phase-fraction root on the level-{state.x_D.n_l} branch "
            f"in mode {state.mode} (eps={state.x_C.eps}, T={state.x_C.T})")
    return x


# ---------------------------------------------------------------------------
# Flow quantities
# ---------------------------------------------------------------------------

@dataclass
class FlowQuantities:
    """Everything the flow map and the guards need at one state."""

    x_M: float
    side: int            # 0 on-branch, else clamped range end
    sigma: float         # mixture stress at (eps, x_M) [Pa]
    sigma_out: float     # reported stress: 0 during slack [Pa]
    branch: float        # active branch stress at (x_M, T) [Pa]
    dbr_dx: float
    dbr_dT: float
    Lam: float           # no-transformation heating rate [K/s]
    phi_xM_raw: float    # rate formula value (attachment tendency) [1/s]
    phi_xM: float        # flowed transformation rate (0 while clamped) [1/s]
    phi_eps: float
    phi_T: float
    phi_branch: float    # d/dt of the active branch stress [Pa/s]
    eps_eff: float
    phi_eps_eff: float


def flow_quantities(state: HybridState, u: tuple[float, float, float],
                    p: MaterialParams) -> FlowQuantities:
    v, J, T_E = u
    eps, T = state.x_C.eps, state.x_C.T
    q, s = state.x_D.q, state.x_D.s
    Lam = (J - p.lambda_h * p.A_S * (T - T_E)) / (p.Omega * p.rho_V * p.c_V)
    phi_eps = v / p.l0

    if q == Q_M:
        sig = float(law.stress(eps, 1.0, p))
        dT = T - p.T0
        dbr_dx = float(law.sigma_A0_dx(1.0, p) + law.sigma_S_dx(1.0, p) * dT)
        dbr_dT = sigma_bar_S(p)
        phi_T = Lam
        return FlowQuantities(
            x_M=1.0, side=0, sigma=sig, sigma_out=sig, branch=sigma_bar(T, p),
            dbr_dx=dbr_dx, dbr_dT=dbr_dT, Lam=Lam, phi_xM_raw=0.0, phi_xM=0.0,
            phi_eps=phi_eps, phi_T=phi_T,
            phi_branch=dbr_dT * phi_T, eps_eff=eps, phi_eps_eff=phi_eps)

    x, side = _zeta_solve(state, p)
    kind = KIND_A if q == Q_AM else KIND_M
    dbr_dx, dbr_dT = state.mem.branch_partials(kind, x, T)
    dsig_deps, dsig_dx = law.stress_partials(eps, x, p)
    sig = float(law.stress(eps, x, p))
    branch = state.mem.branch_eval(kind, x, T)

    if s == 0:
        num = dsig_deps * phi_eps - dbr_dT * Lam
        den = dbr_dx - dsig_dx + dbr_dT * p.h_M / p.c_V
    else:
        num = -dbr_dT * Lam
        den = dbr_dx + dbr_dT * p.h_M / p.c_V
    if abs(den) < 1e-12:
        raise SingularDenominatorError(
            f"branch slope degeneracy in mode {state.mode} at x_M={x}")
    phi_raw = num / den
    phi = 0.0 if side != 0 else phi_raw
    phi_T = Lam + p.h_M / p.c_V * phi
    eps_eff = eps * (1 - s) + x * p.eps_T * s
    phi_eff = phi_eps * (1 - s) + phi * p.eps_T * s
    return FlowQuantities(
        x_M=x, side=side, sigma=sig, sigma_out=0.0 if s == 1 else sig,
        branch=branch, dbr_dx=dbr_dx, dbr_dT=dbr_dT, Lam=Lam,
        phi_xM_raw=phi_raw, phi_xM=phi, phi_eps=phi_eps, phi_T=phi_T,
        phi_branch=dbr_dx * phi + dbr_dT * phi_T,
        eps_eff=eps_eff, phi_eps_eff=phi_eff)


def phi_xM(state: HybridState, u: tuple[float, float, float],
           p: MaterialParams) -> float:
    """Mode-specific transformation rate dx_M/dt [1/s]."""
    return flow_quantities(state, u, p).phi_xM


def flow_map(state: HybridState, u: tuple[float, float, float],
             p: MaterialParams) -> tuple[float, float, float, float, float]:
    """Flow of the full state: only strain and temperature move."""
    fq = flow_quantities(state, u, p)
    return (fq.phi_eps, fq.phi_T, 0.0, 0.0, 0.0)


def effective_strain(state: HybridState, u: tuple[float, float, float],
                     p: MaterialParams) -> tuple[float, float]:
    """Residual strain of the wire and its rate; equals (eps, v/l0) when
    tensioned and (x_M*eps_T, phi_xM*eps_T) during slack."""
    fq = flow_quantities(state, u, p)
    return fq.eps_eff, fq.phi_eps_eff


# ---------------------------------------------------------------------------
# Flow conditions
# ---------------------------------------------------------------------------

def in_flow_set(state: HybridState, u: tuple[float, float, float],
                p: MaterialParams,
                fq: Optional[FlowQuantities] = None) -> tuple[bool, str]:
    """Do the flow conditions of the current mode hold?  Returns (ok, why);
    why names the first violated condition when not ok."""
    fq = fq if fq is not None else flow_quantities(state, u, p)
    q, s, n_l = state.x_D.q, state.x_D.s, state.x_D.n_l
    eps = state.x_C.eps
    thresh = strain_threshold(state.x_C.T, p)

    if q == Q_AM:
        if fq.phi_xM < -PHI_TOL:
            return False, "Cq: phi_xM < 0 in a loading mode"
        if s == 0 and eps > thresh + EPS_TOL:
            return False, "Cq: strain beyond the full-martensite threshold"
    elif q == Q_MA:
        if fq.phi_xM > PHI_TOL:
            return False, "Cq: phi_xM > 0 in an unloading mode"
    else:
        if eps < thresh - EPS_TOL:
            return False, "Cq: strain below the full-martensite threshold"

    if s == 0:
        if fq.sigma < -STRESS_TOL:
            return False, "Cs: negative stress while tensioned"
    else:
        if eps > fq.eps_eff + EPS_TOL:
            return False, "Cs: imposed strain beyond the residual strain in slack"

    if n_l >= 3:
        rec = state.mem.top
        if not (rec.x_lo - XM_EVENT_TOL <= fq.x_M <= rec.x_hi + XM_EVENT_TOL):
            return False, "Cnl: phase fraction outside the inner-loop range"
        lo_A, hi_A, lo_M, hi_M = state.mem.strain_bounds(state.x_C.T)
        lo, hi = (lo_A, hi_A) if q == Q_AM else (lo_M, hi_M)
        if not (lo - EPS_TOL <= fq.eps_eff <= hi + EPS_TOL):
            return False, "Cnl: effective strain outside the inner-loop range"
    return True, ""


# ---------------------------------------------------------------------------
# Jump conditions
# ---------------------------------------------------------------------------

def _range_exit(state: HybridState, fq: FlowQuantities,
                p: MaterialParams) -> bool:
    """Inner-loop range exit guard (loop closure trigger) for n_l >= 3."""
    rec = state.mem.top
    exit_lo = (fq.x_M <= rec.x_lo + XM_EVENT_TOL and fq.phi_xM_raw <= PHI_TOL)
    exit_hi = (fq.x_M >= rec.x_hi - XM_EVENT_TOL and fq.phi_xM_raw >= -PHI_TOL)
    if exit_lo or exit_hi:
        return True
    lo_A, hi_A, lo_M, hi_M = state.mem.strain_bounds(state.x_C.T)
    lo, hi = (lo_A, hi_A) if state.x_D.q == Q_AM else (lo_M, hi_M)
    return ((fq.eps_eff <= lo and fq.phi_eps_eff <= PHI_TOL)
            or (fq.eps_eff >= hi and fq.phi_eps_eff >= -PHI_TOL))


def jump_check(state: HybridState, u: tuple[float, float, float],
               p: MaterialParams,
               fq: Optional[FlowQuantities] = None) -> list[int]:
    """Active jump indices, sorted by priority (slack, reversal, closure)."""
    fq = fq if fq is not None else flow_quantities(state, u, p)
    q, s, n_l = state.x_D.q, state.x_D.s, state.x_D.n_l
    eps, T = state.x_C.eps, state.x_C.T
    v = u[0]
    thresh = strain_threshold(T, p)
    rate_thresh = sigma_bar_S(p) * fq.Lam / p.E_M
    v_rate = v / p.l0
    active: list[int] = []

    if q == Q_AM and s == 0:
        if fq.phi_xM_raw < -PHI_TOL and eps <= thresh + EPS_TOL:
            active.append(1)
        if eps >= thresh and v_rate >= rate_thresh:
            active.append(2)
        if fq.sigma <= SLACK_ENTRY_MARGIN and fq.phi_branch <= 0.0 and (
                fq.sigma < -STRESS_TOL or fq.phi_branch < -PHI_TOL):
            active.append(3)
        if n_l >= 3 and _range_exit(state, fq, p):
            active.append(4)
    elif q == Q_MA and s == 0:
        if fq.phi_xM_raw > PHI_TOL:
            active.append(5)
        if fq.sigma <= SLACK_ENTRY_MARGIN and fq.phi_branch <= 0.0 and (
                fq.sigma < -STRESS_TOL or fq.phi_branch < -PHI_TOL):
            active.append(6)
        if n_l >= 3 and _range_exit(state, fq, p):
            active.append(7)
    elif q == Q_M:
        if eps <= thresh and v_rate <= rate_thresh:
            # Exit from full martensite: slack variant when the unloading
            # branch starts below zero stress at the current temperature.
            unload_start = float(law.sigma_M0(1.0, p)
                                 + law.sigma_S(1.0, p) * (T - p.T0))
            active.append(8 if unload_start >= 0.0 else 9)
    elif q == Q_MA and s == 1:
        if n_l >= 3 and _range_exit(state, fq, p):
            active.append(10)
        if (eps >= fq.eps_eff + EPS_TOL
                and v_rate >= fq.phi_xM * p.eps_T - PHI_TOL):
            active.append(11)
        if fq.phi_xM_raw > PHI_TOL:
            active.append(12)
    elif q == Q_AM and s == 1:
        if n_l >= 3 and _range_exit(state, fq, p):
            active.append(13)
        if (eps >= fq.eps_eff + EPS_TOL
                and v_rate >= fq.phi_xM * p.eps_T - PHI_TOL):
            active.append(14)
        if eps >= thresh and v_rate >= rate_thresh:
            active.append(15)
        if fq.phi_xM_raw < -PHI_TOL and eps <= thresh + EPS_TOL:
            active.append(16)

    return sorted(active, key=_priority)


# ---------------------------------------------------------------------------
# Jump maps
# ---------------------------------------------------------------------------

def _reversal_push(mem: BranchMemory, x_rev: float, T: float,
                   new_kind: str) -> None:
    """Open a new loop at a reversal, retracing the parent when the
    reversal sits at a range endpoint of an outermost-level loop."""
    rec = mem.top
    interior = (rec.x_lo + DEGENERATE_TOL < x_rev < rec.x_hi - DEGENERATE_TOL)
    if interior:
        mem.push_reversal(x_rev, T, new_kind)
        return
    if mem.n_l >= 3:
        # A reversal at an inner-loop bound coincides with a closure; let
        # the closure jump handle it.
        raise DegenerateReversalError(
            f"reversal at inner-loop bound x_M={x_rev} (level {mem.n_l})")
    mem.push_copy(x_rev, T)


def jump_map(state: HybridState, active: int,
             u: tuple[float, float, float], p: MaterialParams) -> HybridState:
    """Apply jump map g_active; continuous state is unchanged, the branch
    memory is pushed/popped to keep its level equal to the new n_l."""
    q, s, n_l = state.x_D.q, state.x_D.s, state.x_D.n_l
    T = state.x_C.T
    mem = state.mem
    fq = flow_quantities(state, u, p)
    x = fq.x_M

    if active == 1 or active == 16:
        _reversal_push(mem, x, T, KIND_M)
        new = DiscreteState(Q_MA, s, n_l + 1)
    elif active == 2 or active == 15:
        mem.reset_to_outer()
        new = DiscreteState(Q_M, 0, 1)
    elif active == 3:
        new = DiscreteState(Q_AM, 1, n_l)
    elif active == 4 or active == 13:
        mem.pop_closure()
        new = DiscreteState(Q_AM, s, n_l - 2)
    elif active == 5 or active == 12:
        if x <= DEGENERATE_TOL:
            # Fully austenitic turnaround: return to the outermost branch.
            mem.reset_to_outer()
            new = DiscreteState(Q_AM, s, 1)
        else:
            _reversal_push(mem, x, T, KIND_A)
            new = DiscreteState(Q_AM, s, n_l + 1)
    elif active == 6:
        new = DiscreteState(Q_MA, 1, n_l)
    elif active == 7 or active == 10:
        mem.pop_closure()
        new = DiscreteState(Q_MA, s, n_l - 2)
    elif active == 8 or active == 9:
        mem.push_copy(1.0, T)
        new = DiscreteState(Q_MA, 1 if active == 9 else 0, 2)
    elif active == 11:
        new = DiscreteState(Q_MA, 0, n_l)
    elif active == 14:
        new = DiscreteState(Q_AM, 0, n_l)
    else:
        raise ValueError(f"unknown jump index {active}")

    if mem.n_l != new.n_l:
        raise ModeInconsistencyError(
            f"jump g{active}: memory level {mem.n_l} cannot realize n_l={new.n_l}")
    return HybridState(state.x_C, new, mem)
