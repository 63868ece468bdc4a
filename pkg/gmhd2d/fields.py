"""
Flow state and its interconversions: (u, b) <-> (omega, j), initial data.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from gmhd2d.spectral import (
    Grid2D,
    SpectralField,
    dealias,
    forward_transform,
    leray_project,
    spectral_derivative,
)

logger = logging.getLogger(__name__)

VectorField = Tuple[SpectralField, SpectralField]

MEAN_TOLERANCE = 1e-12
IC_KINDS = ("orszag_tang", "random_bandlimited", "single_mode", "from_file")


def _mean_is_zero(F: SpectralField) -> bool:
    scale = max(F.scale(), 1.0)
    return abs(F.mean_mode) <= MEAN_TOLERANCE * scale


@dataclass(frozen=True, eq=False)
class FlowState:
    """Vorticity and current coefficients at simulation time ``time``."""

    omega_hat: SpectralField
    j_hat: SpectralField
    time: float = 0.0

    def __post_init__(self):
        if not self.omega_hat.grid.same_as(self.j_hat.grid):
            raise ValueError("omega_hat and j_hat live on different grids")
        if not np.isfinite(self.time):
            raise ValueError(f"state time must be finite, got {self.time}")
        for name, F in (("omega", self.omega_hat), ("j", self.j_hat)):
            if not _mean_is_zero(F):
                raise ValueError(
                    f"{name} has nonzero mean mode {F.mean_mode:.3e}; states must be mean-free"
                )

    @property
    def grid(self) -> Grid2D:
        return self.omega_hat.grid

    @classmethod
    def build(cls, omega_hat: SpectralField, j_hat: SpectralField, time: float = 0.0) -> "FlowState":
        """Dealias both fields and pin their zero modes to 0 before wrapping."""
        omega = dealias(omega_hat).coeffs
        j = dealias(j_hat).coeffs
        omega[0, 0] = 0.0
        j[0, 0] = 0.0
        return cls(omega_hat.with_coeffs(omega), j_hat.with_coeffs(j), float(time))

    @classmethod
    def zeros(cls, grid: Grid2D, time: float = 0.0) -> "FlowState":
        return cls(SpectralField.zeros(grid), SpectralField.zeros(grid), float(time))


@dataclass(frozen=True)
class InitialCondition:
    """Recipe for initial data.

    ``magnetic_amplitude`` is the Orszag-Tang constant c for ``orszag_tang``
    and the current amplitude for ``single_mode``/``random_bandlimited``.
    """

    kind: str = "orszag_tang"
    amplitude: float = 1.0
    magnetic_amplitude: float = 1.0
    seed: int = 0
    k_min: int = 1
    k_max: int = 4
    mode: Tuple[int, int] = (1, 0)
    path: Optional[str] = None

    def __post_init__(self):
        if self.kind not in IC_KINDS:
            raise ValueError(f"unknown initial condition kind {self.kind!r}; expected one of {IC_KINDS}")
        if not (np.isfinite(self.amplitude) and np.isfinite(self.magnetic_amplitude)):
            raise ValueError("initial condition amplitudes must be finite")
        if self.kind == "random_bandlimited" and not (1 <= self.k_min <= self.k_max):
            raise ValueError(f"need 1 <= k_min <= k_max, got k_min={self.k_min}, k_max={self.k_max}")
        if self.kind == "single_mode" and tuple(self.mode) == (0, 0):
            raise ValueError("single_mode needs a nonzero mode")
        if self.kind == "from_file" and not self.path:
            raise ValueError("from_file initial condition needs a path")


def _check_mean_free(F: SpectralField, name: str):
    if not _mean_is_zero(F):
        raise ValueError(
            f"nonzero mean {name} ({F.mean_mode:.3e}): the inverse Laplacian is undefined on constants"
        )


def _invert_curl(curl_hat: SpectralField, name: str) -> VectorField:
    _check_mean_free(curl_hat, name)
    grid = curl_hat.grid
    stream = curl_hat.coeffs * grid.inv_xi_sq
    return (
        curl_hat.with_coeffs(1j * grid.xi2 * stream),
        curl_hat.with_coeffs(-1j * grid.xi1 * stream),
    )


def biot_savart(omega_hat: SpectralField) -> VectorField:
    """u = grad-perp Delta^{-1} omega, so that grad-perp . u = omega."""
    return _invert_curl(omega_hat, "vorticity")


def b_from_current(j_hat: SpectralField) -> VectorField:
    """b = grad-perp Delta^{-1} j"""
    return _invert_curl(j_hat, "current")


def divergence(v1: SpectralField, v2: SpectralField) -> SpectralField:
    return spectral_derivative(v1, 1) + spectral_derivative(v2, 2)


def perp_divergence(v1: SpectralField, v2: SpectralField) -> SpectralField:
    """grad-perp . v = -d2 v1 + d1 v2 (scalar curl)"""
    return spectral_derivative(v2, 1) - spectral_derivative(v1, 2)


def state_from_primitive(u_hat: VectorField, b_hat: VectorField, time: float = 0.0) -> FlowState:
    return FlowState.build(perp_divergence(*u_hat), perp_divergence(*b_hat), time)


def velocity_and_magnetic(state: FlowState) -> Tuple[VectorField, VectorField]:
    return biot_savart(state.omega_hat), b_from_current(state.j_hat)


def _orszag_tang(ic: InitialCondition, grid: Grid2D) -> FlowState:
    x1, x2 = grid.coordinates()
    scale = 2.0 * np.pi / grid.box_length
    a, c = ic.amplitude, ic.magnetic_amplitude
    u = (-a * np.sin(scale * x2), a * np.sin(scale * x1))
    b = (-c * np.sin(scale * x2), c * np.sin(2.0 * scale * x1))
    u_hat = leray_project(*(forward_transform(v, grid) for v in u))
    b_hat = leray_project(*(forward_transform(v, grid) for v in b))
    return state_from_primitive(u_hat, b_hat)


def _single_mode(ic: InitialCondition, grid: Grid2D) -> FlowState:
    m1, m2 = (int(m) for m in ic.mode)
    if max(abs(m1), abs(m2)) > grid.n / 3.0:
        raise ValueError(f"mode {ic.mode} lies outside the dealiased band of n={grid.n}")
    x1, x2 = grid.coordinates()
    scale = 2.0 * np.pi / grid.box_length
    profile = np.cos(scale * (m1 * x1 + m2 * x2))
    omega = forward_transform(ic.amplitude * profile, grid)
    j = forward_transform(ic.magnetic_amplitude * profile, grid)
    return FlowState.build(omega, j)


def _random_band(rng: np.random.Generator, grid: Grid2D, ic: InitialCondition, amplitude: float) -> SpectralField:
    if ic.k_max > grid.n / 3.0:
        raise ValueError(f"k_max={ic.k_max} lies outside the dealiased band of n={grid.n}")
    noise = forward_transform(rng.standard_normal(grid.shape), grid)
    radius = np.sqrt(grid.k1 ** 2 + grid.k2 ** 2)
    band = (radius >= ic.k_min) & (radius <= ic.k_max) & grid.dealias_mask
    F = noise.with_coeffs(np.where(band, noise.coeffs, 0.0))
    norm = np.sqrt(np.sum(np.abs(F.coeffs) ** 2)) / grid.box_length
    if norm == 0.0 or amplitude == 0.0:
        return SpectralField.zeros(grid)
    # L^2 norm of the field equals the requested amplitude
    return F * (amplitude / norm)


def _random_bandlimited(ic: InitialCondition, grid: Grid2D) -> FlowState:
    rng = np.random.default_rng(ic.seed)
    omega = _random_band(rng, grid, ic, ic.amplitude)
    j = _random_band(rng, grid, ic, ic.magnetic_amplitude)
    return FlowState.build(omega, j)


def make_initial_condition(ic: InitialCondition, grid: Grid2D) -> FlowState:
    """Realize ``ic`` on ``grid`` as a divergence-free, mean-free, dealiased state."""
    if ic.kind == "from_file":
        # lazy import: checkpoint depends on this module
        from gmhd2d.checkpoint import read_checkpoint

        state, _params = read_checkpoint(ic.path)
        if not state.grid.same_as(grid):
            raise ValueError(
                f"checkpoint grid n={state.grid.n}, L={state.grid.box_length} "
                f"does not match configured n={grid.n}, L={grid.box_length}"
            )
        return FlowState(
            SpectralField(grid, state.omega_hat.coeffs),
            SpectralField(grid, state.j_hat.coeffs),
            state.time,
        )

    builders = {
        "orszag_tang": _orszag_tang,
        "single_mode": _single_mode,
        "random_bandlimited": _random_bandlimited,
    }
    state = builders[ic.kind](ic, grid)
    logger.info("initial condition %s realized on n=%d", ic.kind, grid.n)
    return state
