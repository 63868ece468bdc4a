"""Exception types raised across gmhd2d."""

from typing import Any, Dict, Optional, Tuple


class GMHDError(Exception):
    """Base class for all gmhd2d errors"""


class ConfigError(GMHDError, ValueError):
    """Invalid run configuration; the message names the offending section.key"""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


class CheckpointError(GMHDError, ValueError):
    """Malformed checkpoint file"""

    def __init__(self, field: str, offset: int, message: str):
        self.field = field
        self.offset = offset
        super().__init__(f"checkpoint field '{field}' at byte offset {offset}: {message}")


class NonFiniteInputError(GMHDError, ValueError):
    """A sampled field contains NaN or Inf"""

    def __init__(self, index: Tuple[int, ...], value: float):
        self.index = index
        self.value = value
        super().__init__(f"non-finite value {value!r} at grid point {index}")


class SymmetryError(GMHDError, ValueError):
    """Spectral coefficients are not Hermitian-symmetric within tolerance"""


class KernelQuadratureError(GMHDError):
    """Radial quadrature for the fractional heat kernel did not converge"""

    def __init__(self, beta: float, worst_radius: float, error: float):
        self.beta = beta
        self.worst_radius = worst_radius
        self.error = error
        super().__init__(
            f"kernel quadrature failed for beta={beta}: worst radius r={worst_radius:.6g} "
            f"(error estimate {error:.3e})"
        )


class NonConvergentTailError(GMHDError):
    """The tail of a kernel profile does not decay fast enough to be integrable"""


class BlowupDetected(GMHDError):
    """Non-finite values or runaway vorticity during time stepping.

    This is a result of the experiment, not a crash: the series recorded up to
    the event travels with the exception.
    """

    def __init__(
        self,
        time: float,
        reason: str,
        diagnostics: Optional[Dict[str, float]] = None,
        series: Any = None,
        state: Any = None,
    ):
        self.time = time
        self.reason = reason
        self.diagnostics = diagnostics or {}
        self.series = series
        self.state = state
        super().__init__(f"blow-up detected at t={time:.6g}: {reason}")
