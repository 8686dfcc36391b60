"""Exception types raised by the solver and the experiment harness."""


class ZakharovError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(ZakharovError, ValueError):
    """Array shape does not match the grid."""


class GridMismatchError(ZakharovError, ValueError):
    """Two fields live on different grids."""


class NumericError(ZakharovError, FloatingPointError):
    """A mode-wise multiplier or field value is not finite."""

    def __init__(self, message, mode=None):
        super().__init__(message)
        self.mode = mode


class CFLError(ZakharovError):
    """The step-size restriction d*tau*K**2 <= c is violated."""

    def __init__(self, ratio, limit):
        super().__init__(f"CFL condition violated: d*tau*K^2 = {ratio:.6g} > c = {limit:.6g}")
        self.ratio = ratio
        self.limit = limit


class NumericBlowupError(ZakharovError, FloatingPointError):
    """NaN or overflow detected after a time step."""

    def __init__(self, step, time):
        super().__init__(f"non-finite values after step {step} (t = {time:.6g})")
        self.step = step
        self.time = time


class SingularRecoveryError(NumericError):
    """The discrete resolvent in the psi_P recovery is numerically singular."""


class ConfigurationError(ZakharovError, ValueError):
    """Inconsistent run or reference configuration."""


class AuditFailure(ZakharovError):
    """The transformed formulation deviates from the splitting beyond tolerance."""

    def __init__(self, step, deviation, tolerance):
        super().__init__(
            f"equivalence audit failed at step {step}: deviation {deviation:.3e} > {tolerance:.1e}"
        )
        self.step = step
        self.deviation = deviation
        self.tolerance = tolerance
