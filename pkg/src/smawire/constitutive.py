"""Thermo-electro-mechanical constitutive laws of the SMA wire.

Pure functions of strain, martensite phase fraction x_M, and temperature.
The stress law treats the wire as a series austenite/martensite mixture
with a transformation-strain offset; the outer hysteresis loop is given by
log/sigmoid interpolators in x_M whose temperature dependence enters
through a shared affine sensitivity term.  All functions broadcast over
numpy arrays in x_M, which the branch-memory grids rely on.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError
from .params import MaterialParams

# Phase fractions within this distance of [0, 1] are clamped; integrator
# roundoff must not trigger hard errors.
XM_TOL = 1e-9


def _check_xm(x_M):
    x = np.asarray(x_M, dtype=float)
    if np.any(x < -XM_TOL) or np.any(x > 1.0 + XM_TOL):
        raise DomainError(f"phase fraction outside [0, 1]: {x_M}")
    return np.clip(x, 0.0, 1.0)


def compliance(x_M, p: MaterialParams):
    """Series mixture compliance x_M/E_M + (1 - x_M)/E_A [1/Pa]."""
    return x_M / p.E_M + (1.0 - x_M) / p.E_A


def stress(eps, x_M, p: MaterialParams):
    """Axial stress [Pa] of the phase mixture at strain eps.

    May be negative; slack semantics are the caller's concern.
    """
    x = _check_xm(x_M)
    return (eps - p.eps_T * x) / compliance(x, p)


def stress_partials(eps, x_M, p: MaterialParams):
    """Closed-form (d sigma/d eps, d sigma/d x_M) of the stress law."""
    x = _check_xm(x_M)
    K = compliance(x, p)
    dK = 1.0 / p.E_M - 1.0 / p.E_A
    sig = (eps - p.eps_T * x) / K
    return 1.0 / K, -(p.eps_T + sig * dK) / K


def force_length(eps, sigma, p: MaterialParams):
    """Wire force [N] and current length [m] from strain and stress."""
    return p.area * sigma, p.l0 * (1.0 + eps)


# ---------------------------------------------------------------------------
# Outer hysteresis loop interpolators
# ---------------------------------------------------------------------------

def _log_guard(arg, who: str):
    if np.any(arg <= 0.0):
        raise DomainError(f"nonpositive log argument in {who}: invalid interpolator coefficients")
    return np.log(arg)


def sigma_A0(x_M, p: MaterialParams):
    """Loading-branch stress at the reference temperature [Pa]."""
    x = np.asarray(x_M, dtype=float)
    return (p.E_AL * _log_guard(1.0 + p.lambda_AL * x, "loading branch")
            + p.E_AR * _log_guard(1.0 + p.lambda_AR * (1.0 - x), "loading branch")
            + p.E_AC * x + p.sigma_AB)


def sigma_M0(x_M, p: MaterialParams):
    """Unloading-branch stress at the reference temperature [Pa]."""
    x = np.asarray(x_M, dtype=float)
    return (p.E_ML * _log_guard(1.0 + p.lambda_ML * x, "unloading branch")
            + p.E_MR * _log_guard(1.0 + p.lambda_MR * (1.0 - x), "unloading branch")
            + p.E_MC * x + p.sigma_MB)


def sigma_S(x_M, p: MaterialParams):
    """Shared temperature sensitivity of both branches [Pa/K]."""
    x = np.asarray(x_M, dtype=float)
    return (p.E_SL / (1.0 + np.exp(-p.lambda_SL * (x - p.x0SL)))
            + p.E_SR / (1.0 + np.exp(p.lambda_SR * (x - p.x0SR)))
            + p.E_SC * x + p.sigma_SB)


def sigma_A0_dx(x_M, p: MaterialParams):
    x = np.asarray(x_M, dtype=float)
    return (p.E_AL * p.lambda_AL / (1.0 + p.lambda_AL * x)
            - p.E_AR * p.lambda_AR / (1.0 + p.lambda_AR * (1.0 - x)) + p.E_AC)


def sigma_M0_dx(x_M, p: MaterialParams):
    x = np.asarray(x_M, dtype=float)
    return (p.E_ML * p.lambda_ML / (1.0 + p.lambda_ML * x)
            - p.E_MR * p.lambda_MR / (1.0 + p.lambda_MR * (1.0 - x)) + p.E_MC)


def sigma_S_dx(x_M, p: MaterialParams):
    x = np.asarray(x_M, dtype=float)
    eL = np.exp(-p.lambda_SL * (x - p.x0SL))
    eR = np.exp(p.lambda_SR * (x - p.x0SR))
    return (p.E_SL * p.lambda_SL * eL / (1.0 + eL) ** 2
            - p.E_SR * p.lambda_SR * eR / (1.0 + eR) ** 2 + p.E_SC)


def sigma_A_outer(x_M, T, p: MaterialParams):
    """Outermost loading branch sigma_A(x_M, T) [Pa]."""
    x = _check_xm(x_M)
    return sigma_A0(x, p) + sigma_S(x, p) * (T - p.T0)


def sigma_M_outer(x_M, T, p: MaterialParams):
    """Outermost unloading branch sigma_M(x_M, T) [Pa]."""
    x = _check_xm(x_M)
    return sigma_M0(x, p) + sigma_S(x, p) * (T - p.T0)


# ---------------------------------------------------------------------------
# Electrical resistance
# ---------------------------------------------------------------------------

def resistivities(T, p: MaterialParams):
    """Temperature-corrected resistivities (rho_eA, rho_eM) [Ohm m]."""
    dT = T - p.T0
    return p.rho_eA0 * (1.0 + p.alpha_A * dT), p.rho_eM0 * (1.0 + p.alpha_M * dT)


def resistance(eps, x_M, T, p: MaterialParams):
    """Wire resistance [Ohm]: phase-weighted resistivity over the deformed
    geometry (length stretched by eps, section necked by nu*eps)."""
    x = _check_xm(x_M)
    shrink = 1.0 - p.nu * np.asarray(eps, dtype=float)
    if np.any(shrink <= 0.0):
        raise DomainError("strain too large: 1 - nu*eps must stay positive")
    rho_A, rho_M = resistivities(T, p)
    geom = p.l0 * (1.0 + eps) / (p.area * shrink)
    return geom * (rho_M * x + rho_A * (1.0 - x))
