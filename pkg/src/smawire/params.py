"""Material parameters and drive inputs for SMA wire simulations.

``MaterialParams`` collects every constitutive constant of the wire model
(mechanical, thermal, kinetic, electrical, and the outer hysteresis loop
interpolator coefficients) in SI units.  Parameter sets are serialized to a
flat ``key = value`` text file with one key per symbol; a calibrated set for
a 75 um quasi-plastic NiTi wire ships with the package
(``smawire.data/dynalloy_75um.params``).

Drive inputs are the deformation rate ``v`` [m/s], Joule heating power ``J``
[W], and environment temperature ``T_E`` [K].  Each is a simple signal
object (constant, piecewise linear between breakpoints with constant
extrapolation, or piecewise constant for triangular strain-rate profiles).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import DomainError

# Parameters known a priori for a given setup; the identification pipeline
# refuses to optimize these.
FIXED_A_PRIORI = ("r0", "l0", "rho_V", "nu", "T0", "tau_x", "V_L", "k_B")

_POSITIVE = (
    "r0", "l0", "E_A", "E_M", "eps_T", "rho_V", "c_V",
    "lambda_h", "tau_x", "V_L", "k_B",
)


@dataclass(frozen=True)
class MaterialParams:
    """Constitutive constants of a polycrystalline SMA wire (SI units)."""

    # Geometry and mechanics
    r0: float        # wire radius [m]
    l0: float        # austenitic reference length [m]
    E_A: float       # austenite Young's modulus [Pa]
    E_M: float       # martensite Young's modulus [Pa]
    eps_T: float     # transformation strain [-]
    nu: float        # Poisson ratio [-]

    # Thermal
    rho_V: float     # density [kg/m^3]
    c_V: float       # specific heat [J/(kg K)]
    h_M: float       # specific latent heat [J/kg]
    lambda_h: float  # convection coefficient [W/(K m^2)]
    T0: float        # reference temperature of the interpolators [K]

    # Thermal-activation kinetics
    tau_x: float     # activation time constant [s]
    V_L: float       # mesoscopic layer volume [m^3]
    k_B: float       # Boltzmann constant [J/K]

    # Electrical
    rho_eA0: float   # austenite resistivity at T0 [Ohm m]
    rho_eM0: float   # martensite resistivity at T0 [Ohm m]
    alpha_A: float   # austenite resistivity temperature coefficient [1/K]
    alpha_M: float   # martensite resistivity temperature coefficient [1/K]

    # Outer hysteresis loop: loading branch at T0
    E_AL: float
    E_AR: float
    E_AC: float
    lambda_AL: float
    lambda_AR: float
    sigma_AB: float

    # Outer hysteresis loop: unloading branch at T0
    E_ML: float
    E_MR: float
    E_MC: float
    lambda_ML: float
    lambda_MR: float
    sigma_MB: float

    # Outer hysteresis loop: temperature sensitivity
    E_SL: float
    E_SR: float
    E_SC: float
    lambda_SL: float
    lambda_SR: float
    x0SL: float
    x0SR: float
    sigma_SB: float

    def __post_init__(self) -> None:
        for name in _POSITIVE:
            if getattr(self, name) <= 0.0:
                raise DomainError(f"material parameter {name} must be > 0")
        if self.eps_T <= 0.0:
            raise DomainError("eps_T must be > 0")
        # Log arguments of the branch interpolators must stay positive on
        # x_M in [0, 1]; the worst case sits at an interval endpoint.
        for lam, name in (
            (self.lambda_AL, "lambda_AL"), (self.lambda_AR, "lambda_AR"),
            (self.lambda_ML, "lambda_ML"), (self.lambda_MR, "lambda_MR"),
        ):
            if 1.0 + min(0.0, lam) <= 1e-12:
                raise DomainError(f"{name} makes a branch log argument nonpositive")

    # Derived geometry, consistent with r0/l0 by construction.
    @property
    def area(self) -> float:
        """Cross section pi*r0^2 [m^2]."""
        return math.pi * self.r0 ** 2

    @property
    def Omega(self) -> float:
        """Wire volume pi*r0^2*l0 [m^3]."""
        return self.area * self.l0

    @property
    def A_S(self) -> float:
        """Lateral heat-exchange surface 2*pi*r0*l0 [m^2]."""
        return 2.0 * math.pi * self.r0 * self.l0

    def with_values(self, **updates: float) -> "MaterialParams":
        """Copy with the given fields replaced (re-validated)."""
        return replace(self, **updates)

    def to_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def save(self, path: Union[str, Path]) -> None:
        """Write the parameter set as a flat key = value text file."""
        lines = ["# SMA wire material parameters (SI units)"]
        lines += [f"{k} = {v!r}" for k, v in self.to_dict().items()]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "MaterialParams":
        """Read a parameter set from a flat key = value text file."""
        data = parse_keyvalue_text(Path(path).read_text(), str(path))
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise DomainError(f"{path}: unknown parameter keys {sorted(unknown)}")
        missing = known - set(data)
        if missing:
            raise DomainError(f"{path}: missing parameter keys {sorted(missing)}")
        return cls(**{k: float(v) for k, v in data.items()})


def parse_keyvalue_text(text: str, origin: str = "<string>") -> dict[str, str]:
    """Parse ``key = value`` lines; '#' starts a comment, blanks ignored."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DomainError(f"{origin}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise DomainError(f"{origin}:{lineno}: empty key or value")
        if key in out:
            raise DomainError(f"{origin}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def bundled_params() -> MaterialParams:
    """Calibrated parameter set for the bundled 75 um NiTi wire."""
    ref = resources.files("smawire.data") / "dynalloy_75um.params"
    with resources.as_file(ref) as path:
        return MaterialParams.load(path)


# ---------------------------------------------------------------------------
# Drive signals
# ---------------------------------------------------------------------------

class Constant:
    """Time-invariant signal."""

    def __init__(self, value: float):
        self.value = float(value)

    def __call__(self, t: float) -> float:
        return self.value

    def breakpoints(self) -> np.ndarray:
        return np.empty(0)


class PiecewiseLinear:
    """Linear interpolation between (time, value) breakpoints.

    Constant extrapolation outside the breakpoint span, which matches how
    scheduled power/temperature profiles are held before and after a test.
    """

    def __init__(self, times: Sequence[float], values: Sequence[float]):
        self.times = np.asarray(times, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if self.times.ndim != 1 or self.times.shape != self.values.shape:
            raise DomainError("breakpoint times and values must be 1-D and equal length")
        if self.times.size < 1:
            raise DomainError("at least one breakpoint required")
        if np.any(np.diff(self.times) <= 0.0):
            raise DomainError("breakpoint times must be strictly increasing")

    def __call__(self, t: float):
        return np.interp(t, self.times, self.values)

    def breakpoints(self) -> np.ndarray:
        return self.times.copy()


class PiecewiseConstant:
    """Step signal: value[i] on [edges[i], edges[i+1]), 0 outside the span.

    Used for the deformation rate of triangular strain profiles, where the
    rate is a square wave with instantaneous sign flips at the corners.
    """

    def __init__(self, edges: Sequence[float], values: Sequence[float]):
        self.edges = np.asarray(edges, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if self.edges.size != self.values.size + 1:
            raise DomainError("need len(edges) == len(values) + 1")
        if np.any(np.diff(self.edges) <= 0.0):
            raise DomainError("segment edges must be strictly increasing")

    def __call__(self, t: float):
        t = np.asarray(t, dtype=float)
        idx = np.clip(np.searchsorted(self.edges, t, side="right") - 1, 0,
                      self.values.size - 1)
        out = np.where((t < self.edges[0]) | (t >= self.edges[-1]), 0.0,
                       self.values[idx])
        return out if out.ndim else float(out)

    def breakpoints(self) -> np.ndarray:
        return self.edges.copy()


Signal = Union[Constant, PiecewiseLinear, PiecewiseConstant]


def as_signal(spec: Union[float, Signal]) -> Signal:
    return Constant(spec) if isinstance(spec, (int, float)) else spec


@dataclass(frozen=True)
class DriveInput:
    """External inputs of the wire model: v [m/s], J [W], T_E [K]."""

    v: Signal
    J: Signal
    T_E: Signal

    def __post_init__(self):
        for name in ("v", "J", "T_E"):
            object.__setattr__(self, name, as_signal(getattr(self, name)))
        for t in self.J.breakpoints():
            if self.J(t) < 0.0:
                raise DomainError("Joule power must be nonnegative")
        for t in self.T_E.breakpoints():
            if self.T_E(t) <= 0.0:
                raise DomainError("environment temperature must be positive")

    def __call__(self, t: float) -> tuple[float, float, float]:
        return float(self.v(t)), float(self.J(t)), float(self.T_E(t))

    def breakpoints(self, t_end: float) -> np.ndarray:
        """Sorted corner times in (0, t_end) where any signal has a kink."""
        pts = np.concatenate([self.v.breakpoints(), self.J.breakpoints(),
                              self.T_E.breakpoints()])
        pts = np.unique(pts[(pts > 0.0) & (pts < t_end)])
        return pts


def triangular_drive(max_strain: float, strain_rate: float, cycles: int,
                     params: MaterialParams,
                     power: Union[float, Signal] = 0.0,
                     ambient: Union[float, Signal] = 298.0,
                     min_strain: float = 0.0) -> tuple[DriveInput, float]:
    """Triangular strain profile between min_strain and max_strain.

    Returns the drive (square-wave deformation rate, analytic corners) and
    the total test duration.  The wire starts at min_strain.
    """
    if not (0.0 < max_strain <= 0.06):
        raise DomainError("max_strain must lie in (0, 0.06]")
    if strain_rate <= 0.0:
        raise DomainError("strain_rate must be > 0")
    if cycles < 1:
        raise DomainError("cycle count must be >= 1")
    if not (0.0 <= min_strain < max_strain):
        raise DomainError("need 0 <= min_strain < max_strain")
    half = (max_strain - min_strain) / strain_rate
    n_half = 2 * cycles
    edges = half * np.arange(n_half + 1)
    rates = params.l0 * strain_rate * np.where(np.arange(n_half) % 2 == 0, 1.0, -1.0)
    drive = DriveInput(v=PiecewiseConstant(edges, rates), J=as_signal(power),
                       T_E=as_signal(ambient))
    return drive, float(edges[-1])


def strain_path_drive(times: Sequence[float], strains: Sequence[float],
                      params: MaterialParams,
                      power: Union[float, Signal] = 0.0,
                      ambient: Union[float, Signal] = 298.0) -> DriveInput:
    """Deformation-rate drive realizing a piecewise-linear strain path."""
    t = np.asarray(times, dtype=float)
    e = np.asarray(strains, dtype=float)
    if t.size < 2 or np.any(np.diff(t) <= 0.0):
        raise DomainError("strain path times must be strictly increasing, >= 2 points")
    rates = params.l0 * np.diff(e) / np.diff(t)
    return DriveInput(v=PiecewiseConstant(t, rates), J=as_signal(power),
                      T_E=as_signal(ambient))
