"""Simulation and calibration of polycrystalline SMA wire actuators.

Two interchangeable wire models share one hysteresis branch memory: a
stiff baseline with thermally activated transformation kinetics, and an
event-driven hybrid model that replaces the stiff kinetics with algebraic
branch attachment plus a five-mode automaton (and gains wire-slack
handling in the bargain).  A three-stage identification pipeline fits
material parameters to tensile/heating test records.
"""

from .params import (MaterialParams, DriveInput, Constant, PiecewiseLinear,
                     PiecewiseConstant, bundled_params, triangular_drive,
                     strain_path_drive)
from .constitutive import (stress, stress_partials, force_length,
                           sigma_A_outer, sigma_M_outer, resistance)
from .memory import BranchMemory, BranchRecord, KIND_A, KIND_M
from .mas import MasState, simulate_mas, mas_rhs, transition_probs, delta_g
from .hybrid import (HybridState, DiscreteState, ContinuousState,
                     initial_state, zeta_xM, phi_xM, flow_map, in_flow_set,
                     jump_check, jump_map, effective_strain)
from .solver import (HybridTrajectory, integrate_hybrid, compare_models,
                     grid_view)
from .identification import (Dataset, fit_index, fit_mechanical,
                             fit_thermal_fast, fit_electrical, run_pipeline)

__version__ = "0.1.0"
