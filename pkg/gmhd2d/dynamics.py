"""
Right-hand sides of the generalized MHD system

    u_t + u.grad u = -grad p + b.grad b - nu Lambda^{2 alpha} u
    b_t + u.grad b = b.grad u - kappa Lambda^{2 beta} b,   div u = div b = 0

in primitive form and in vorticity-current form. Nonlinear products are taken
pointwise on the grid and dealiased; pressure is removed by Leray projection.
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from gmhd2d.fields import (
    FlowState,
    VectorField,
    b_from_current,
    biot_savart,
    perp_divergence,
    state_from_primitive,
)
from gmhd2d.spectral import (
    SpectralField,
    fractional_laplacian,
    inner_product,
    inverse_transform,
    leray_project,
    spectral_derivative,
    to_spectral_dealiased,
)

logger = logging.getLogger(__name__)

DIVERGENCE_TOLERANCE = 1e-8


@dataclass(frozen=True)
class PhysicsParams:
    """Dissipation coefficients (nu, kappa) and exponents (alpha, beta)."""

    nu: float = 0.0
    alpha: float = 0.0
    kappa: float = 1.0
    beta: float = 1.5

    def __post_init__(self):
        for name in ("nu", "alpha", "kappa", "beta"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"physics parameter {name} must be finite and >= 0, got {value}")

    @classmethod
    def magnetic_diffusion(cls, beta: float, kappa: float = 1.0) -> "PhysicsParams":
        """Magnetic diffusion only: nu = 0, alpha = 0."""
        return cls(nu=0.0, alpha=0.0, kappa=kappa, beta=beta)

    def regime(self) -> str:
        """Name of a known global-regularity condition met by these parameters, or 'open'."""
        a, b = self.alpha, self.beta
        if self.kappa > 0 and b > 1 and self.nu == 0:
            return "magnetic_diffusion_beta_gt_1"
        if self.nu > 0 and self.kappa > 0:
            if a >= 1 and b > 0 and a + b >= 2:
                return "alpha_ge_1_sum_ge_2"
            if a >= 0.5 and b >= 1:
                return "alpha_ge_half_beta_ge_1"
            if a < 0.5 and 2 * a + b > 2:
                return "alpha_lt_half_2alpha_plus_beta_gt_2"
            if a < 0.5 and b >= 1 and 3 * a + 2 * b > 3:
                return "alpha_lt_half_3alpha_plus_2beta_gt_3"
        if self.nu > 0 and a >= 2 and b == 0:
            return "alpha_ge_2_beta_0"
        return "open"


def _check_divergence_free(v: VectorField, name: str):
    grid = v[0].grid
    div = np.abs(grid.xi1 * v[0].coeffs + grid.xi2 * v[1].coeffs)
    scale = float(np.max(np.sqrt(grid.xi_sq) * (np.abs(v[0].coeffs) + np.abs(v[1].coeffs))))
    if scale > 0 and float(np.max(div)) > DIVERGENCE_TOLERANCE * scale:
        raise ValueError(
            f"{name} is not divergence-free: relative divergence {float(np.max(div)) / scale:.3e}"
        )


def _gradient(F: SpectralField) -> Tuple[np.ndarray, np.ndarray]:
    return inverse_transform(spectral_derivative(F, 1)), inverse_transform(spectral_derivative(F, 2))


def _vector_gradient(v: VectorField):
    """Physical d_j v_i as grad[i][j] (0-based)"""
    return [_gradient(v[0]), _gradient(v[1])]


def _stress_physical(grad_u, grad_b) -> np.ndarray:
    """T(grad u, grad b) = 2 d1b1 (d1u2 + d2u1) + 2 d2u2 (d1b2 + d2b1)"""
    d1u1, d2u1 = grad_u[0]
    d1u2, d2u2 = grad_u[1]
    d1b1, d2b1 = grad_b[0]
    d1b2, d2b2 = grad_b[1]
    return 2.0 * d1b1 * (d1u2 + d2u1) + 2.0 * d2u2 * (d1b2 + d2b1)


def _dissipate(F: SpectralField, coefficient: float, exponent: float) -> SpectralField:
    """-coefficient * Lambda^{2 exponent} F"""
    if coefficient == 0.0:
        return SpectralField.zeros(F.grid)
    return fractional_laplacian(F, 2.0 * exponent) * (-coefficient)


def primitive_rhs(u_hat: VectorField, b_hat: VectorField, params: PhysicsParams) -> Tuple[VectorField, VectorField]:
    """Time derivatives (du, db) of the primitive system, pressure projected out."""
    _check_divergence_free(u_hat, "u")
    _check_divergence_free(b_hat, "b")
    grid = u_hat[0].grid
    u = [inverse_transform(c) for c in u_hat]
    b = [inverse_transform(c) for c in b_hat]
    grad_u = _vector_gradient(u_hat)
    grad_b = _vector_gradient(b_hat)

    momentum = []
    induction = []
    for i in range(2):
        u_dot_grad_ui = u[0] * grad_u[i][0] + u[1] * grad_u[i][1]
        b_dot_grad_bi = b[0] * grad_b[i][0] + b[1] * grad_b[i][1]
        u_dot_grad_bi = u[0] * grad_b[i][0] + u[1] * grad_b[i][1]
        b_dot_grad_ui = b[0] * grad_u[i][0] + b[1] * grad_u[i][1]
        momentum.append(to_spectral_dealiased(b_dot_grad_bi - u_dot_grad_ui, grid))
        induction.append(to_spectral_dealiased(b_dot_grad_ui - u_dot_grad_bi, grid))

    momentum = leray_project(*momentum)
    induction = leray_project(*induction)
    du = tuple(momentum[i] + _dissipate(u_hat[i], params.nu, params.alpha) for i in range(2))
    db = tuple(induction[i] + _dissipate(b_hat[i], params.kappa, params.beta) for i in range(2))
    return du, db


def div_form_magnetic_rhs(u_hat: VectorField, b_hat: VectorField, params: PhysicsParams) -> VectorField:
    """Induction equation written as b_t + kappa Lambda^{2 beta} b = sum_i d_i(b_i u - u_i b)."""
    _check_divergence_free(u_hat, "u")
    _check_divergence_free(b_hat, "b")
    grid = u_hat[0].grid
    u = [inverse_transform(c) for c in u_hat]
    b = [inverse_transform(c) for c in b_hat]
    db = []
    for m in range(2):
        total = SpectralField.zeros(grid)
        for i in range(2):
            flux = to_spectral_dealiased(b[i] * u[m] - u[i] * b[m], grid)
            total = total + spectral_derivative(flux, i + 1)
        db.append(total + _dissipate(b_hat[m], params.kappa, params.beta))
    return tuple(db)


def stress_term(u_hat: VectorField, b_hat: VectorField) -> SpectralField:
    """T(grad u, grad b), the extra source in the current equation."""
    grid = u_hat[0].grid
    return to_spectral_dealiased(_stress_physical(_vector_gradient(u_hat), _vector_gradient(b_hat)), grid)


def _zero_mean(F: SpectralField) -> SpectralField:
    coeffs = F.coeffs.copy()
    coeffs[0, 0] = 0.0
    return F.with_coeffs(coeffs)


def vorticity_current_nonlinear(omega_hat: SpectralField, j_hat: SpectralField) -> Tuple[SpectralField, SpectralField]:
    """Nonlinear parts of the omega and j equations:

        -u.grad omega + b.grad j,    -u.grad j + b.grad omega + T(grad u, grad b)
    """
    grid = omega_hat.grid
    u_hat = biot_savart(omega_hat)
    b_hat = b_from_current(j_hat)
    u = [inverse_transform(c) for c in u_hat]
    b = [inverse_transform(c) for c in b_hat]
    grad_omega = _gradient(omega_hat)
    grad_j = _gradient(j_hat)
    stress = _stress_physical(_vector_gradient(u_hat), _vector_gradient(b_hat))

    n_omega = (b[0] * grad_j[0] + b[1] * grad_j[1]) - (u[0] * grad_omega[0] + u[1] * grad_omega[1])
    n_j = (b[0] * grad_omega[0] + b[1] * grad_omega[1]) - (u[0] * grad_j[0] + u[1] * grad_j[1]) + stress
    return (
        _zero_mean(to_spectral_dealiased(n_omega, grid)),
        _zero_mean(to_spectral_dealiased(n_j, grid)),
    )


def vorticity_current_rhs(state: FlowState, params: PhysicsParams) -> Tuple[SpectralField, SpectralField]:
    """(d omega/dt, dj/dt) including dissipation."""
    n_omega, n_j = vorticity_current_nonlinear(state.omega_hat, state.j_hat)
    d_omega = n_omega + _dissipate(state.omega_hat, params.nu, params.alpha)
    d_j = n_j + _dissipate(state.j_hat, params.kappa, params.beta)
    return d_omega, d_j


def formulation_consistency(u_hat: VectorField, b_hat: VectorField, params: PhysicsParams) -> float:
    """Max-norm mismatch between grad-perp of the primitive RHS and the
    vorticity-current RHS, relative to the size of the latter."""
    du, db = primitive_rhs(u_hat, b_hat, params)
    state = state_from_primitive(u_hat, b_hat)
    d_omega, d_j = vorticity_current_rhs(state, params)

    r_omega = inverse_transform(perp_divergence(*du) - d_omega, reference=d_omega)
    r_j = inverse_transform(perp_divergence(*db) - d_j, reference=d_j)
    residual = max(float(np.max(np.abs(r_omega))), float(np.max(np.abs(r_j))))
    scale = max(
        float(np.max(np.abs(inverse_transform(d_omega)))),
        float(np.max(np.abs(inverse_transform(d_j)))),
    )
    logger.debug("formulation residual %.3e against scale %.3e", residual, scale)
    if scale == 0.0:
        return residual
    return residual / scale


def energy_rate(u_hat: VectorField, b_hat: VectorField, du: VectorField, db: VectorField) -> float:
    """<u, du> + <b, db>"""
    return sum(inner_product(u_hat[i], du[i]) + inner_product(b_hat[i], db[i]) for i in range(2))


def dissipation_rate(u_hat: VectorField, b_hat: VectorField, params: PhysicsParams) -> float:
    """nu ||Lambda^alpha u||^2 + kappa ||Lambda^beta b||^2"""
    total = 0.0
    for i in range(2):
        if params.nu:
            lu = fractional_laplacian(u_hat[i], params.alpha)
            total += params.nu * inner_product(lu, lu)
        if params.kappa:
            lb = fractional_laplacian(b_hat[i], params.beta)
            total += params.kappa * inner_product(lb, lb)
    return total
