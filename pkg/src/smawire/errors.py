"""Exception types raised by the smawire package."""


class SmaError(Exception):
    """Base class for all smawire-specific errors."""


class DomainError(SmaError, ValueError):
    """Constitutive-law input outside its physical domain."""


class BranchRangeError(SmaError, ValueError):
    """Phase fraction outside the admissible range of the current branch."""


class DegenerateReversalError(SmaError, ValueError):
    """Reversal too close to a range endpoint to open a minor loop."""


class ClosureUnderflowError(SmaError, ValueError):
    """Loop closure requested below the outermost hysteresis level."""


class NoRootError(SmaError, RuntimeError):
    """Phase-fraction recovery found no sign change on the branch grid."""


class MultipleRootsError(SmaError, RuntimeError):
    """Phase-fraction recovery bracketed more than one root."""


class SingularDenominatorError(SmaError, RuntimeError):
    """Branch slope degeneracy in a phase-fraction rate formula."""


class ModeInconsistencyError(SmaError, RuntimeError):
    """Discrete state and branch memory disagree after a jump."""


class ZenoError(SmaError, RuntimeError):
    """Chained-jump limit exceeded at a single time instant."""


class SolverFailure(SmaError, RuntimeError):
    """Numerical integration aborted (step-size collapse or model error)."""


class DegenerateSignalError(SmaError, ValueError):
    """Fit metric requested on a constant measured series."""


class RankDeficiencyError(SmaError, RuntimeError):
    """Least-squares regression matrix is rank deficient."""
