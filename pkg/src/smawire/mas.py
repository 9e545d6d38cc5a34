"""Stiff baseline model with thermally activated transformation kinetics.

The full state (eps, x_M, T) is integrated as one ODE system: the phase
fraction evolves through forward/reverse layer transition probabilities
whose Boltzmann exponents make the system numerically stiff (the rates
switch between 0 and 1/tau_x within a few kPa of the active hysteresis
branch).  An implicit/adaptive stiff-capable integrator is therefore used.

The same branch memory as the hybrid model supplies the transformation
stresses; reversal and closure bookkeeping is driven by zero crossings of
dx_M/dt detected as integration events.  Slack is deliberately not
modeled: the mixture stress may go negative, which is exactly the regime
the hybrid reformulation fixes.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy.integrate import solve_ivp

from . import constitutive as law
from .errors import SolverFailure
from .memory import DEGENERATE_TOL, KIND_A, KIND_M, BranchMemory
from .params import DriveInput, MaterialParams

# Stress-gap thresholds [Pa] for transformation-episode bookkeeping.  An
# episode ends (reversal point) when the stress detaches this far from the
# active branch; attachment is declared below the smaller threshold, the
# hysteresis between the two suppressing chatter.  At the detach gap the
# Boltzmann factor has dropped to ~1e-20/s, so the crossing coincides with
# a transformation-rate zero crossing within microseconds, but the gap is
# a smooth function of the state, which event localization needs (the
# exponential rate itself is not).
DETACH_GAP = 1e5
ATTACH_GAP = 5e4
# Exponent clip; beyond this the transition probability underflows anyway.
_EXP_CLIP = 700.0


@dataclass
class MasState:
    eps: float
    x_M: float
    T: float

    def __post_init__(self):
        if not (-law.XM_TOL <= self.x_M <= 1.0 + law.XM_TOL):
            raise ValueError(f"x_M must lie in [0, 1], got {self.x_M}")
        if self.T <= 0.0:
            raise ValueError("temperature must be positive")


def delta_g(sigma: float, x_M: float, T: float, mem: BranchMemory,
            direction: str) -> float:
    """Free-energy density barrier [J/m^3] for one transformation direction.

    Driving-force form: proportional to the stress gap between the active
    branch and the mixture stress, vanishing exactly on the branch, which
    reproduces the high-gain threshold behavior of the kinetics.
    """
    p = mem.params
    x = min(max(x_M, mem.top.x_lo), mem.top.x_hi)
    if direction == "AM":
        gap = mem.branch_eval(KIND_A, x, T) - sigma
    elif direction == "MA":
        gap = sigma - mem.branch_eval(KIND_M, x, T)
    else:
        raise ValueError(f"direction must be 'AM' or 'MA', got {direction!r}")
    return p.eps_T * max(0.0, gap)


def transition_probs(sigma: float, x_M: float, T: float,
                     mem: BranchMemory) -> tuple[float, float]:
    """Layer transition rates (p_MA, p_AM) [1/s]."""
    if T <= 0.0:
        raise ValueError("temperature must be positive")
    p = mem.params
    scale = p.V_L / (p.k_B * T)
    arg_MA = min(_EXP_CLIP, scale * delta_g(sigma, x_M, T, mem, "MA"))
    arg_AM = min(_EXP_CLIP, scale * delta_g(sigma, x_M, T, mem, "AM"))
    return np.exp(-arg_MA) / p.tau_x, np.exp(-arg_AM) / p.tau_x


def _rhs_raw(eps: float, x_M: float, T: float,
             u: tuple[float, float, float], p: MaterialParams,
             mem: BranchMemory) -> tuple[float, float, float]:
    """Flow equations on raw floats; tolerant of integrator trial states
    (x_M clipped to [0, 1], temperature floored at 1 K in the kinetics)."""
    v, J, T_E = u
    x = min(max(x_M, 0.0), 1.0)
    sigma = float(law.stress(eps, x, p))
    p_MA, p_AM = transition_probs(sigma, x, max(T, 1.0), mem)
    dxm = -p_MA * x + p_AM * (1.0 - x)
    deps = v / p.l0
    dT = ((J - p.lambda_h * p.A_S * (T - T_E))
          / (p.Omega * p.rho_V * p.c_V) + p.h_M * dxm / p.c_V)
    return deps, dxm, dT


def mas_rhs(state: MasState, u: tuple[float, float, float],
            p: MaterialParams, mem: BranchMemory) -> tuple[float, float, float]:
    """Flow of the baseline model: (deps/dt, dx_M/dt, dT/dt)."""
    return _rhs_raw(state.eps, state.x_M, state.T, u, p, mem)


@dataclass
class MasTrajectory:
    """Sampled baseline trajectory plus branch diagnostics."""

    t: np.ndarray
    eps: np.ndarray
    x_M: np.ndarray
    T: np.ndarray
    sigma: np.ndarray
    f: np.ndarray
    R: np.ndarray
    branch_A: np.ndarray        # active loading-branch stress at samples
    branch_M: np.ndarray        # active unloading-branch stress at samples
    dxm: np.ndarray             # transformation rate at samples
    wall_time: float = 0.0
    reversals: list = field(default_factory=list)   # (t, x_M, event, level)

    def final_state(self) -> MasState:
        return MasState(float(self.eps[-1]), float(np.clip(self.x_M[-1], 0, 1)),
                        float(self.T[-1]))

    def to_csv(self, path: Union[str, Path]) -> None:
        header = "t,eps,x_M,T,sigma,f,R"
        data = np.column_stack([self.t, self.eps, self.x_M, self.T,
                                self.sigma, self.f, self.R])
        np.savetxt(path, data, delimiter=",", header=header, comments="")

    def summary_text(self) -> str:
        lines = [
            "model = mas",
            f"samples = {self.t.size}",
            f"t_end_s = {self.t[-1]:.6f}",
            f"reversal_events = {len(self.reversals)}",
            f"wall_time_s = {self.wall_time:.3f}",
        ]
        return "\n".join(lines) + "\n"


def _segment_outputs(ts, ys, p, mem, drive):
    eps, x, T = ys
    xc = np.clip(x, mem.top.x_lo, mem.top.x_hi)
    dT = T - p.T0
    sig = law.stress(eps, np.clip(x, 0.0, 1.0), p)
    sigS = law.sigma_S(xc, p)
    brA = mem.eval0(KIND_A, xc) + sigS * dT
    brM = mem.eval0(KIND_M, xc) + sigS * dT
    f, _ = law.force_length(eps, sig, p)
    R = law.resistance(eps, np.clip(x, 0.0, 1.0), T, p)
    dxm = np.array([_rhs_raw(e, xi, Ti, drive(ti), p, mem)[1]
                    for ti, e, xi, Ti in zip(ts, eps, x, T)])
    return sig, f, R, brA, brM, dxm


def simulate_mas(initial: MasState, drive: DriveInput, p: MaterialParams,
                 t_end: float, rtol: float = 1e-6, atol: float = 1e-9,
                 sample_dt: float = 1e-3, mem: Optional[BranchMemory] = None,
                 method: str = "BDF",
                 grid_size: Optional[int] = None) -> MasTrajectory:
    """Integrate the baseline model with reversal/closure bookkeeping.

    The integration is restarted at drive corners and at memory events
    (transformation-direction reversals, inner-loop range exits, full
    transformation).  Wall-clock integration time is recorded.
    """
    if rtol <= 0.0 or atol <= 0.0:
        raise ValueError("tolerances must be positive")
    if mem is None:
        mem = BranchMemory(p) if grid_size is None else BranchMemory(p, grid_size)
    t_grid = np.arange(0.0, t_end, sample_dt)
    t_grid = np.append(t_grid, t_end)
    corners = list(drive.breakpoints(t_end)) + [t_end]

    def rhs(t, y):
        return _rhs_raw(y[0], y[1], y[2], drive(t), p, mem)

    started = time.perf_counter()
    t_cur = 0.0
    y_cur = np.array([initial.eps, initial.x_M, initial.T], dtype=float)

    out_t, out_y = [np.array([0.0])], [y_cur.reshape(3, 1).copy()]
    out_extra = []
    reversals: list = []

    def flush_segment(ts, ys):
        ts = np.asarray(ts, dtype=float)
        if ts.size:
            ys = np.asarray(ys, dtype=float).reshape(3, ts.size)
            out_t.append(ts)
            out_y.append(ys)
            out_extra.append(_segment_outputs(ts, ys, p, mem, drive))

    out_extra.append(_segment_outputs(out_t[0], out_y[0], p, mem, drive))

    # A reversal point is the end of a transformation episode, detected as
    # the stress detaching from the branch it was attached to.  The new
    # branch is anchored where the episode stopped, so reverse motion
    # departs from the reversal point without a dead band (matching the
    # branch-attachment behavior the hybrid reformulation assumes).
    def _gap(kind, y):
        x = min(max(y[1], mem.top.x_lo), mem.top.x_hi)
        branch = float(mem.eval0(kind, x)
                       + law.sigma_S(x, p) * (y[2] - p.T0))
        sigma = float(law.stress(y[0], min(max(y[1], 0.0), 1.0), p))
        return branch - sigma if kind == KIND_A else sigma - branch

    def ev_detach_A(t, y):
        return _gap(KIND_A, y) - DETACH_GAP
    ev_detach_A.terminal = True
    ev_detach_A.direction = 1

    def ev_detach_M(t, y):
        return _gap(KIND_M, y) - DETACH_GAP
    ev_detach_M.terminal = True
    ev_detach_M.direction = 1

    def ev_attach_A(t, y):
        return _gap(KIND_A, y) - ATTACH_GAP
    ev_attach_A.terminal = True
    ev_attach_A.direction = -1

    def ev_attach_M(t, y):
        return _gap(KIND_M, y) - ATTACH_GAP
    ev_attach_M.terminal = True
    ev_attach_M.direction = -1

    # Which branch the transformation is currently attached to: KIND_A
    # while forward (loading), KIND_M while reverse, None in the frozen
    # elastic band between branches.  Recomputed from the gaps at every
    # restart (with hysteresis) so stray events cannot desynchronize it.
    def _reattach(previous):
        g_A, g_M = _gap(KIND_A, y_cur), _gap(KIND_M, y_cur)
        if previous == KIND_A and g_A < DETACH_GAP:
            return KIND_A
        if previous == KIND_M and g_M < DETACH_GAP:
            return KIND_M
        if g_A < ATTACH_GAP:
            return KIND_A
        if g_M < ATTACH_GAP:
            return KIND_M
        return None

    attached = _reattach(None)

    for corner in corners:
        while t_cur < corner - 1e-12:
            attached = _reattach(attached)
            rec = mem.top
            if attached == KIND_A:
                events = [ev_detach_A]
            elif attached == KIND_M:
                events = [ev_detach_M]
            else:
                events = [ev_attach_A, ev_attach_M]
            n_detach = len(events)
            if mem.n_l >= 2:
                lo_bound = max(rec.x_lo, DEGENERATE_TOL)
                hi_bound = min(rec.x_hi, 1.0 - DEGENERATE_TOL)

                def ev_exit_lo(t, y, _b=lo_bound):
                    return y[1] - _b
                ev_exit_lo.terminal = True
                ev_exit_lo.direction = -1

                def ev_exit_hi(t, y, _b=hi_bound):
                    return y[1] - _b
                ev_exit_hi.terminal = True
                ev_exit_hi.direction = 1
                events = events + [ev_exit_lo, ev_exit_hi]

            t_eval = t_grid[(t_grid > t_cur + 1e-15) & (t_grid <= corner)]
            try:
                sol = solve_ivp(rhs, (t_cur, corner), y_cur, method=method,
                                rtol=rtol, atol=atol, t_eval=t_eval,
                                events=events, dense_output=False)
            except ValueError:
                # Restarted exactly on an event root: scipy's event solve
                # can lose the bracket to interpolant noise.  Advance a
                # hair without events and resume.
                t_tiny = min(corner, t_cur + 1e-7)
                sol = solve_ivp(rhs, (t_cur, t_tiny), y_cur, method=method,
                                rtol=rtol, atol=atol)
                t_cur = t_tiny
                y_cur = sol.y[:, -1].copy()
                continue
            if not sol.success:
                raise SolverFailure(f"baseline integration failed at "
                                    f"t={t_cur}: {sol.message}")
            flush_segment(sol.t, sol.y)

            if sol.status != 1:
                t_cur = corner
                y_cur = sol.y[:, -1].copy() if sol.y.size else y_cur
                continue

            which = next(i for i, te in enumerate(sol.t_events) if te.size)
            t_new = float(sol.t_events[which][0])
            if t_new <= t_cur + 1e-12:
                t_new = t_cur + 1e-12   # zero-length segment guard
            t_cur = t_new
            y_cur = sol.y_events[which][0].copy()
            x_ev = float(np.clip(y_cur[1], 0.0, 1.0))
            T_ev = float(y_cur[2])
            if which < n_detach:
                if attached == KIND_A:
                    # Loading episode ended: open an unloading loop.
                    _handle_reversal(mem, x_ev, T_ev, +1, reversals, t_cur)
                    attached = None   # re-derived from the gaps at restart
                elif attached == KIND_M:
                    _handle_reversal(mem, x_ev, T_ev, -1, reversals, t_cur)
                    attached = None
                else:
                    # Attachment event: transformation (re)starts on a branch.
                    attached = KIND_A if which == 0 else KIND_M
            elif mem.n_l >= 3:
                mem.pop_closure()
                reversals.append((t_cur, x_ev, "closure", mem.n_l))
            else:
                # A level-2 loop rejoining the outer loop.
                mem.reset_to_outer()
                reversals.append((t_cur, x_ev, "wipe", mem.n_l))

    wall = time.perf_counter() - started

    t_all = np.concatenate(out_t)
    y_all = np.concatenate(out_y, axis=1)
    extras = [np.concatenate([e[i] if np.ndim(e[i]) else np.atleast_1d(e[i])
                              for e in out_extra]) for i in range(6)]
    return MasTrajectory(t=t_all, eps=y_all[0], x_M=y_all[1], T=y_all[2],
                         sigma=extras[0], f=extras[1], R=extras[2],
                         branch_A=extras[3], branch_M=extras[4],
                         dxm=extras[5], wall_time=wall, reversals=reversals)


def _handle_reversal(mem: BranchMemory, x_rev: float, T: float,
                     direction: int, log: list, t: float) -> None:
    """Memory bookkeeping for a transformation-direction flip."""
    rec = mem.top
    new_kind = KIND_M if direction > 0 else KIND_A
    if x_rev >= rec.x_hi - DEGENERATE_TOL or x_rev <= rec.x_lo + DEGENERATE_TOL:
        at_lo = x_rev <= rec.x_lo + DEGENERATE_TOL
        if mem.n_l >= 3:
            mem.pop_closure()
            log.append((t, x_rev, "closure", mem.n_l))
        elif at_lo and rec.x_lo <= DEGENERATE_TOL:
            mem.reset_to_outer()
            log.append((t, x_rev, "wipe", mem.n_l))
        else:
            mem.push_copy(x_rev, T)
            log.append((t, x_rev, "turnaround", mem.n_l))
    else:
        mem.push_reversal(x_rev, T, new_kind)
        log.append((t, x_rev, "reversal", mem.n_l))
