"""Parameter calibration from tensile/heating test records.

Three-stage pipeline:

1. Slow-rate stress records calibrate the mechanical, convection, and
   outer-loop amplitude parameters through derivative-free simplex
   minimization of the mean (100 - FIT) objective; c_V and h_M barely
   affect slow tests and are excluded here.
2. Fast-rate stress records then tune c_V and h_M with the same machinery.
3. Resistance records are linear in the electrical unknowns, so the
   resistivities and their temperature-coefficient products come from one
   ordinary least-squares solve.

The FIT accuracy index is the normalized root-mean-square error expressed
as a percentage, clipped at zero: FIT = max(0, 100*(1 - ||y-yhat|| /
||y-mean(y)||)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from . import constitutive as law
from . import hybrid as hy
from .errors import DegenerateSignalError, RankDeficiencyError
from .params import FIXED_A_PRIORI, DriveInput, MaterialParams
from .solver import grid_view, integrate_hybrid

# Default free parameters of the slow-rate stage: stiffnesses, offsets and
# amplitudes move; the lambda_*/x0S* shape constants of the outer loop stay
# frozen (they set the interpolator geometry, which calibration keeps).
MECHANICAL_FREE_DEFAULT = (
    "E_A", "E_M", "eps_T", "lambda_h",
    "E_AL", "E_AR", "E_AC", "sigma_AB",
    "E_ML", "E_MR", "E_MC", "sigma_MB",
    "E_SL", "E_SR", "E_SC", "sigma_SB",
)
THERMAL_FREE = ("c_V", "h_M")


def fit_index(measured: np.ndarray, simulated: np.ndarray) -> float:
    """Accuracy percentage of a simulated series against a measured one.

    Negative raw values (fit worse than the mean predictor) are reported
    as zero.
    """
    y = np.asarray(measured, dtype=float)
    yh = np.asarray(simulated, dtype=float)
    if y.shape != yh.shape or y.ndim != 1 or y.size < 2:
        raise ValueError("series must be 1-D, equal length, >= 2 samples")
    spread = np.linalg.norm(y - y.mean())
    if spread == 0.0:
        raise DegenerateSignalError("measured series is constant")
    return max(0.0, 100.0 * (1.0 - np.linalg.norm(y - yh) / spread))


@dataclass
class Dataset:
    """One test record: drive input plus a measured output series."""

    drive: DriveInput
    t: np.ndarray
    measured: np.ndarray       # stress [Pa] or resistance [Ohm]
    weight: float = 1.0
    eps0: float = 0.0
    T_init: float = 298.0
    label: str = ""

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.measured = np.asarray(self.measured, dtype=float)
        if self.t.shape != self.measured.shape:
            raise ValueError("time and measurement series must match")


@dataclass
class FitReport:
    stage: str
    free: tuple[str, ...]
    fit_before: list[float]
    fit_after: list[float]
    params_before: dict[str, float]
    params_after: dict[str, float]
    objective_trace: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = True

    def to_text(self) -> str:
        lines = [f"stage = {self.stage}", f"converged = {self.converged}",
                 f"iterations = {self.iterations}",
                 "fit_before_pct = " + " ".join(f"{v:.2f}" for v in self.fit_before),
                 "fit_after_pct = " + " ".join(f"{v:.2f}" for v in self.fit_after)]
        for name in self.free:
            lines.append(f"{name}: {self.params_before[name]:.6e} -> "
                         f"{self.params_after[name]:.6e}")
        return "\n".join(lines) + "\n"


def simulate_sigma(p: MaterialParams, ds: Dataset, rtol: float,
                   atol: float) -> np.ndarray:
    """Hybrid-model stress series on the dataset's sample times."""
    t_end = float(ds.t[-1])
    dt = float(np.median(np.diff(ds.t)))
    traj = integrate_hybrid(hy.initial_state(p, eps0=ds.eps0, T_init=ds.T_init),
                            ds.drive, p, t_end, rtol=rtol, atol=atol,
                            sample_dt=dt)
    view = grid_view(traj)
    return np.interp(ds.t, view["t"], view["sigma"])


def _encode(p: MaterialParams, free: Sequence[str]) -> tuple[np.ndarray, Callable]:
    """Scale-normalized vectorization; positive quantities move in log space
    so the simplex cannot cross zero."""
    base = [getattr(p, name) for name in free]
    logmask = [v > 0.0 for v in base]
    z0 = np.array([math.log(v) if m else v / max(1.0, abs(v))
                   for v, m in zip(base, logmask)])
    scales = np.array([1.0 if m else max(1.0, abs(v))
                       for v, m in zip(base, logmask)])

    def decode(z: np.ndarray, ref: MaterialParams) -> MaterialParams:
        vals = {name: (math.exp(zi) if m else zi * sc)
                for name, zi, m, sc in zip(free, z, logmask, scales)}
        return ref.with_values(**vals)

    return z0, decode


def _check_free(free: Sequence[str]) -> tuple[str, ...]:
    names = {f.name for f in fields(MaterialParams)}
    for name in free:
        if name not in names:
            raise ValueError(f"unknown parameter {name!r}")
        if name in FIXED_A_PRIORI:
            raise ValueError(f"parameter {name!r} is known a priori and "
                             f"must not be identified")
    return tuple(free)


def _fit_stage(stage: str, datasets: Sequence[Dataset], p0: MaterialParams,
               free: Sequence[str], max_iter: int, rtol: float,
               atol: float) -> tuple[MaterialParams, FitReport]:
    if not datasets:
        raise ValueError(f"{stage}: at least one dataset required")
    free = _check_free(free)
    z0, decode = _encode(p0, free)
    trace: list[float] = []

    def fits(p: MaterialParams) -> list[float]:
        out = []
        for ds in datasets:
            try:
                out.append(fit_index(ds.measured, simulate_sigma(p, ds, rtol, atol)))
            except Exception:
                out.append(0.0)
        return out

    weights = np.array([ds.weight for ds in datasets], dtype=float)
    weights = weights / weights.sum()

    def objective(z: np.ndarray) -> float:
        try:
            p = decode(z, p0)
        except Exception:
            return 1e6
        val = float(np.dot(weights, 100.0 - np.array(fits(p))))
        trace.append(val)
        return val

    fit0 = fits(p0)
    res = minimize(objective, z0, method="Nelder-Mead",
                   options={"maxiter": max_iter, "xatol": 1e-4,
                            "fatol": 1e-3, "adaptive": len(free) > 4})
    p_best = decode(res.x, p0)
    report = FitReport(
        stage=stage, free=free, fit_before=fit0, fit_after=fits(p_best),
        params_before={k: getattr(p0, k) for k in free},
        params_after={k: getattr(p_best, k) for k in free},
        objective_trace=trace, iterations=int(res.nit),
        converged=bool(res.success))
    return p_best, report


def fit_mechanical(datasets: Sequence[Dataset], p0: MaterialParams,
                   free: Sequence[str] = MECHANICAL_FREE_DEFAULT,
                   max_iter: int = 400, rtol: float = 1e-5,
                   atol: float = 1e-8) -> tuple[MaterialParams, FitReport]:
    """Simplex calibration on slow-rate stress records (c_V, h_M excluded)."""
    if "c_V" in free or "h_M" in free:
        raise ValueError("c_V and h_M are tuned on fast-rate records")
    return _fit_stage("mechanical", datasets, p0, free, max_iter, rtol, atol)


def fit_thermal_fast(datasets: Sequence[Dataset], p: MaterialParams,
                     max_iter: int = 200, rtol: float = 1e-5,
                     atol: float = 1e-8) -> tuple[MaterialParams, FitReport]:
    """Tune c_V and h_M on fast-rate stress records."""
    return _fit_stage("thermal", datasets, p, THERMAL_FREE, max_iter, rtol, atol)


@dataclass
class ElectricalFit:
    rho_eA0: float
    rho_eM0: float
    alpha_A: float
    alpha_M: float
    residual: float


def fit_electrical(datasets: Sequence[Dataset], p: MaterialParams,
                   trajectories: Sequence[dict]) -> tuple[MaterialParams, ElectricalFit]:
    """Least-squares estimate of the electrical parameters.

    Resistance is linear in (rho_eA0, rho_eM0, rho_eA0*alpha_A,
    rho_eM0*alpha_M) once the state trajectory (eps, x_M, T) is known, so a
    single regression recovers all four; the temperature coefficients
    follow by dividing out the resistivities.
    """
    if len(datasets) != len(trajectories):
        raise ValueError("need one state trajectory per dataset")
    rows, rhs = [], []
    for ds, st in zip(datasets, trajectories):
        eps = np.interp(ds.t, st["t"], st["eps"])
        x = np.interp(ds.t, st["t"], st["x_M"])
        T = np.interp(ds.t, st["t"], st["T"])
        geom = p.l0 * (1.0 + eps) / (p.area * (1.0 - p.nu * eps))
        dT = T - p.T0
        rows.append(np.column_stack([geom * (1.0 - x), geom * x,
                                     geom * (1.0 - x) * dT, geom * x * dT]))
        rhs.append(ds.measured)
    A = np.vstack(rows)
    b = np.concatenate(rhs)
    rank = np.linalg.matrix_rank(A, tol=None)
    if rank < 4:
        raise RankDeficiencyError(
            f"electrical regression rank {rank} < 4: insufficient excitation "
            f"(phase fraction or temperature barely varies)")
    theta, res, *_ = np.linalg.lstsq(A, b, rcond=None)
    rho_A, rho_M, prod_A, prod_M = (float(v) for v in theta)
    fit = ElectricalFit(rho_eA0=rho_A, rho_eM0=rho_M,
                        alpha_A=prod_A / rho_A, alpha_M=prod_M / rho_M,
                        residual=float(res[0]) if np.size(res) else 0.0)
    p_new = p.with_values(rho_eA0=fit.rho_eA0, rho_eM0=fit.rho_eM0,
                          alpha_A=fit.alpha_A, alpha_M=fit.alpha_M)
    return p_new, fit


def run_pipeline(slow: Sequence[Dataset], fast: Sequence[Dataset],
                 electrical: Sequence[Dataset], p0: MaterialParams,
                 free_mechanical: Sequence[str] = ("E_A", "E_M", "eps_T", "lambda_h"),
                 max_iter: int = 400, rtol: float = 1e-5,
                 atol: float = 1e-8) -> tuple[MaterialParams, list[FitReport]]:
    """Full three-stage identification; returns final params and reports."""
    reports: list[FitReport] = []
    p1, rep1 = fit_mechanical(slow, p0, free=free_mechanical,
                              max_iter=max_iter, rtol=rtol, atol=atol)
    reports.append(rep1)
    if fast:
        p2, rep2 = fit_thermal_fast(fast, p1, max_iter=max_iter,
                                    rtol=rtol, atol=atol)
        reports.append(rep2)
    else:
        p2 = p1
    if electrical:
        trajs = []
        for ds in electrical:
            traj = integrate_hybrid(
                hy.initial_state(p2, eps0=ds.eps0, T_init=ds.T_init),
                ds.drive, p2, float(ds.t[-1]), rtol=rtol, atol=atol,
                sample_dt=float(np.median(np.diff(ds.t))))
            view = grid_view(traj)
            trajs.append({"t": view["t"], "eps": view["eps_eff"],
                          "x_M": view["x_M"], "T": view["T"]})
        p3, efit = fit_electrical(electrical, p2, trajs)
        reports.append(FitReport(
            stage="electrical", free=("rho_eA0", "rho_eM0", "alpha_A", "alpha_M"),
            fit_before=[], fit_after=[],
            params_before={k: getattr(p2, k) for k in
                           ("rho_eA0", "rho_eM0", "alpha_A", "alpha_M")},
            params_after={k: getattr(p3, k) for k in
                          ("rho_eA0", "rho_eM0", "alpha_A", "alpha_M")}))
    else:
        p3 = p2
    return p3, reports
