"""
Time integration of the vorticity-current system.

The fractional dissipation is applied exactly through the multiplier
exp(-c |xi|^s dt) (integrating factor); the nonlinear terms go through
classical RK4 stages.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from gmhd2d.diagnostics import DiagnosticsConfig, NormSeries, record
from gmhd2d.dynamics import PhysicsParams, vorticity_current_nonlinear
from gmhd2d.errors import BlowupDetected
from gmhd2d.fields import FlowState, velocity_and_magnetic
from gmhd2d.spectral import SpectralField, inverse_transform

logger = logging.getLogger(__name__)

SCHEMES = ("if_rk4", "imex_euler")
VELOCITY_FLOOR = 1e-12


@dataclass(frozen=True)
class StepperConfig:
    """Integrator settings.

    ``dt_fixed`` bypasses the CFL rule (convergence studies); ``blowup_threshold``
    bounds the sup norm of omega before a run is declared blown up.
    """

    scheme: str = "if_rk4"
    cfl: float = 0.5
    dt_max: float = 1e-2
    t_end: float = 1.0
    dt_fixed: Optional[float] = None
    blowup_threshold: float = 1e12

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if not (0.0 < self.cfl <= 1.0):
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl}")
        if not (self.dt_max > 0 and np.isfinite(self.dt_max)):
            raise ValueError(f"dt_max must be positive, got {self.dt_max}")
        if not (self.t_end >= 0 and np.isfinite(self.t_end)):
            raise ValueError(f"t_end must be finite and >= 0, got {self.t_end}")
        if self.dt_fixed is not None and not (self.dt_fixed > 0 and np.isfinite(self.dt_fixed)):
            raise ValueError(f"dt_fixed must be positive, got {self.dt_fixed}")


def linear_propagator(F: SpectralField, s: float, c: float, dt: float) -> SpectralField:
    """Apply the semigroup exp(-c Lambda^s dt)."""
    if dt < 0:
        raise ValueError(f"propagator time step must be >= 0, got {dt}")
    if c < 0:
        raise ValueError(f"propagator coefficient must be >= 0, got {c}")
    if dt == 0 or c == 0:
        return F.with_coeffs(F.coeffs.copy())
    return F.with_coeffs(F.coeffs * np.exp(-c * dt * F.grid.power(s)))


def _ensure_finite(fields, time: float, stage: str):
    """``time`` is the end of the attempted step"""
    for F in fields:
        if not np.all(np.isfinite(F.coeffs)):
            raise BlowupDetected(time, f"non-finite coefficients in {stage}")


class _Propagators:
    """Per-step pair of integrating factors for omega and j."""

    def __init__(self, params: PhysicsParams):
        self.params = params

    def omega(self, F: SpectralField, dt: float) -> SpectralField:
        return linear_propagator(F, 2.0 * self.params.alpha, self.params.nu, dt)

    def j(self, F: SpectralField, dt: float) -> SpectralField:
        return linear_propagator(F, 2.0 * self.params.beta, self.params.kappa, dt)


def _step_if_rk4(state: FlowState, params: PhysicsParams, dt: float) -> FlowState:
    prop = _Propagators(params)
    half = 0.5 * dt
    w0, j0 = state.omega_hat, state.j_hat
    t = state.time

    k1w, k1j = vorticity_current_nonlinear(w0, j0)
    _ensure_finite((k1w, k1j), t + dt, "stage 1")

    w_half, j_half = prop.omega(w0, half), prop.j(j0, half)
    k2w, k2j = vorticity_current_nonlinear(
        prop.omega(w0 + k1w * half, half), prop.j(j0 + k1j * half, half)
    )
    _ensure_finite((k2w, k2j), t + dt, "stage 2")

    k3w, k3j = vorticity_current_nonlinear(w_half + k2w * half, j_half + k2j * half)
    _ensure_finite((k3w, k3j), t + dt, "stage 3")

    k4w, k4j = vorticity_current_nonlinear(
        prop.omega(w0, dt) + prop.omega(k3w, half) * dt,
        prop.j(j0, dt) + prop.j(k3j, half) * dt,
    )
    _ensure_finite((k4w, k4j), t + dt, "stage 4")

    omega = prop.omega(w0, dt) + (
        prop.omega(k1w, dt) + prop.omega(k2w + k3w, half) * 2.0 + k4w
    ) * (dt / 6.0)
    j = prop.j(j0, dt) + (prop.j(k1j, dt) + prop.j(k2j + k3j, half) * 2.0 + k4j) * (dt / 6.0)
    _ensure_finite((omega, j), t + dt, "update")
    return FlowState.build(omega, j, t + dt)


def _step_imex_euler(state: FlowState, params: PhysicsParams, dt: float) -> FlowState:
    n_omega, n_j = vorticity_current_nonlinear(state.omega_hat, state.j_hat)
    _ensure_finite((n_omega, n_j), state.time + dt, "stage 1")
    grid = state.grid

    def implicit(F: SpectralField, N: SpectralField, c: float, s: float) -> SpectralField:
        return F.with_coeffs((F.coeffs + dt * N.coeffs) / (1.0 + c * dt * grid.power(s)))

    omega = implicit(state.omega_hat, n_omega, params.nu, 2.0 * params.alpha)
    j = implicit(state.j_hat, n_j, params.kappa, 2.0 * params.beta)
    _ensure_finite((omega, j), state.time + dt, "update")
    return FlowState.build(omega, j, state.time + dt)


def step(state: FlowState, params: PhysicsParams, dt: float, scheme: str = "if_rk4") -> FlowState:
    """Advance ``state`` by ``dt``; raises BlowupDetected on non-finite stages."""
    if not (dt > 0 and np.isfinite(dt)):
        raise ValueError(f"time step must be positive, got {dt}")
    if scheme == "if_rk4":
        return _step_if_rk4(state, params, dt)
    if scheme == "imex_euler":
        return _step_imex_euler(state, params, dt)
    raise ValueError(f"unknown scheme {scheme!r}")


def max_speeds(state: FlowState):
    """(max |u|, max |b|) over the grid"""
    u_hat, b_hat = velocity_and_magnetic(state)
    u1, u2 = (inverse_transform(c) for c in u_hat)
    b1, b2 = (inverse_transform(c) for c in b_hat)
    return float(np.max(np.hypot(u1, u2))), float(np.max(np.hypot(b1, b2)))


def choose_dt(state: FlowState, params: PhysicsParams, config: StepperConfig) -> float:
    """Advective CFL step; dissipation is exact and never limits dt."""
    if config.dt_fixed is not None:
        return config.dt_fixed
    u_max, b_max = max_speeds(state)
    speed = max(u_max, b_max, VELOCITY_FLOOR)
    return min(config.dt_max, config.cfl * state.grid.spacing / speed)


def sup_vorticity(state: FlowState) -> float:
    """max |omega| over the grid"""
    return float(np.max(np.abs(inverse_transform(state.omega_hat))))


def _omega_bound(state: FlowState) -> float:
    return float(np.sum(np.abs(state.omega_hat.coeffs))) / state.grid.box_length ** 2


class RunResult(NamedTuple):
    series: NormSeries
    state: FlowState


RecordHook = Callable[[FlowState, NormSeries], None]


def run(
    initial: FlowState,
    params: PhysicsParams,
    stepper_config: StepperConfig,
    diagnostics_config: DiagnosticsConfig,
    series: Optional[NormSeries] = None,
    on_record: Optional[RecordHook] = None,
) -> RunResult:
    """Integrate from ``initial`` to ``stepper_config.t_end``, recording
    diagnostics every ``diagnostics_config.cadence`` time units.

    ``series`` lets a restarted run keep accumulating into an existing series.
    BlowupDetected propagates with the partial series and the last finite state.
    """
    cadence = diagnostics_config.cadence
    if series is None:
        series = NormSeries()
    state = initial
    t_end = stepper_config.t_end
    time_tol = 1e-12 * max(1.0, t_end)

    def _record(current: FlowState):
        record(current, params, series, diagnostics_config)
        if on_record is not None:
            on_record(current, series)

    try:
        if not series.times or state.time > series.times[-1] + time_tol:
            _record(state)

        index = math.floor(state.time / cadence + 1e-9) + 1
        next_record = min(index * cadence, t_end)
        steps = 0
        while state.time < t_end - time_tol:
            dt = choose_dt(state, params, stepper_config)
            remaining = next_record - state.time
            landing = dt >= remaining - time_tol
            if landing:
                dt = remaining
            state = step(state, params, dt, stepper_config.scheme)
            steps += 1
            if landing:
                state = FlowState(state.omega_hat, state.j_hat, next_record)
            logger.debug("step %d: t=%.6g dt=%.3e", steps, state.time, dt)

            if _omega_bound(state) > stepper_config.blowup_threshold:
                peak = sup_vorticity(state)
                if peak > stepper_config.blowup_threshold:
                    raise BlowupDetected(state.time, f"sup |omega| = {peak:.3e} exceeds threshold")

            if landing:
                _record(state)
                index += 1
                next_record = min(index * cadence, t_end)
        logger.info("run finished at t=%.6g after %d steps", state.time, steps)
        return RunResult(series, state)
    except BlowupDetected as exc:
        series.mark_blowup(exc.time)
        exc.series = series
        exc.state = state
        exc.diagnostics = series.last_record()
        logger.warning("%s", exc)
        raise
