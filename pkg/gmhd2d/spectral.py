"""
Spectral core: periodic grids, transforms, Fourier multipliers, dealiasing
and the divergence-free projection.

Fourier convention: f_hat(xi) = integral of f(x) exp(-i x.xi) dx, realized on the
grid as (L/n)^2 * fft2(f), so that f_hat(0) is the integral of f over the box.
Arrays are indexed [i1, i2] with axis 0 along x1 and axis 1 along x2.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from gmhd2d.errors import NonFiniteInputError, SymmetryError

logger = logging.getLogger(__name__)

SYMMETRY_TOLERANCE = 1e-12
IMAGINARY_TOLERANCE = 1e-10


@dataclass(frozen=True, eq=False)
class Grid2D:
    """Uniform periodic grid on [0, L)^2 with its wavenumber tables.

    ``xi1``/``xi2`` are the derivative multipliers (zero on the Nyquist
    row/column, where a real field has no real derivative); ``xi_abs`` is the
    full magnitude |xi| used by fractional multipliers.
    """

    n: int
    box_length: float = 2.0 * np.pi
    k1: np.ndarray = field(init=False, repr=False)
    k2: np.ndarray = field(init=False, repr=False)
    xi1: np.ndarray = field(init=False, repr=False)
    xi2: np.ndarray = field(init=False, repr=False)
    xi_abs: np.ndarray = field(init=False, repr=False)
    xi_sq: np.ndarray = field(init=False, repr=False)
    inv_xi_sq: np.ndarray = field(init=False, repr=False)
    dealias_mask: np.ndarray = field(init=False, repr=False)
    _multipliers: Dict[float, np.ndarray] = field(init=False, repr=False, default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or isinstance(self.n, bool):
            raise ValueError(f"grid n must be an integer, got {self.n!r}")
        if self.n < 8 or self.n % 2:
            raise ValueError(f"grid n must be even and >= 8, got {self.n}")
        if not np.isfinite(self.box_length) or self.box_length <= 0:
            raise ValueError(f"box_length must be positive and finite, got {self.box_length}")

        n = int(self.n)
        modes = np.fft.fftfreq(n, d=1.0 / n)
        modes[n // 2] = n // 2  # centered range (-n/2, n/2]
        k1, k2 = np.meshgrid(modes, modes, indexing="ij")
        scale = 2.0 * np.pi / self.box_length

        nyquist = np.abs(modes) == n // 2
        deriv = np.where(nyquist, 0.0, modes) * scale
        xi1, xi2 = np.meshgrid(deriv, deriv, indexing="ij")
        xi_sq = xi1 ** 2 + xi2 ** 2
        inv_xi_sq = np.zeros_like(xi_sq)
        np.divide(1.0, xi_sq, out=inv_xi_sq, where=xi_sq > 0)

        object.__setattr__(self, "n", n)
        object.__setattr__(self, "box_length", float(self.box_length))
        object.__setattr__(self, "k1", k1)
        object.__setattr__(self, "k2", k2)
        object.__setattr__(self, "xi1", xi1)
        object.__setattr__(self, "xi2", xi2)
        object.__setattr__(self, "xi_abs", scale * np.sqrt(k1 ** 2 + k2 ** 2))
        object.__setattr__(self, "xi_sq", xi_sq)
        object.__setattr__(self, "inv_xi_sq", inv_xi_sq)
        object.__setattr__(
            self, "dealias_mask", np.maximum(np.abs(k1), np.abs(k2)) <= n / 3.0
        )

    @property
    def spacing(self) -> float:
        return self.box_length / self.n

    @property
    def cell_area(self) -> float:
        """Quadrature weight (L/n)^2 of one grid point"""
        return self.spacing ** 2

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.n, self.n)

    def coordinates(self) -> Tuple[np.ndarray, np.ndarray]:
        """Physical grid points (x1, x2) as 'ij'-indexed meshes"""
        x = np.arange(self.n) * self.spacing
        return tuple(np.meshgrid(x, x, indexing="ij"))

    def power(self, s: float) -> np.ndarray:
        """Multiplier |xi|^s, cached per exponent (zero mode -> 0 for s > 0)"""
        s = float(s)
        cached = self._multipliers.get(s)
        if cached is None:
            if s == 0.0:
                cached = np.ones(self.shape)
            else:
                cached = np.power(self.xi_abs, s)
            self._multipliers[s] = cached
        return cached

    def same_as(self, other: "Grid2D") -> bool:
        return self is other or (self.n == other.n and self.box_length == other.box_length)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Fourier coefficients of a real scalar field on ``grid``."""

    grid: Grid2D
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        if coeffs.shape != self.grid.shape:
            raise ValueError(
                f"coefficient shape {coeffs.shape} does not match grid {self.grid.shape}"
            )
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def zeros(cls, grid: Grid2D) -> "SpectralField":
        return cls(grid, np.zeros(grid.shape, dtype=np.complex128))

    @property
    def mean_mode(self) -> complex:
        return complex(self.coeffs[0, 0])

    def scale(self) -> float:
        """Largest coefficient magnitude"""
        return float(np.max(np.abs(self.coeffs))) if self.coeffs.size else 0.0

    def with_coeffs(self, coeffs: np.ndarray) -> "SpectralField":
        return SpectralField(self.grid, coeffs)

    def _check(self, other: "SpectralField"):
        if not self.grid.same_as(other.grid):
            raise ValueError("spectral fields live on different grids")

    def __add__(self, other: "SpectralField") -> "SpectralField":
        self._check(other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        self._check(other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, -self.coeffs)

    def __mul__(self, factor: float) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * factor)

    __rmul__ = __mul__


def _mirror(coeffs: np.ndarray) -> np.ndarray:
    """coeffs evaluated at -k"""
    return np.roll(np.flip(coeffs, axis=(0, 1)), 1, axis=(0, 1))


def hermitian_defect(F: SpectralField, scale: Optional[float] = None) -> float:
    """max |F(k) - conj(F(-k))| relative to ``scale`` (default: the largest coefficient of F)"""
    if scale is None:
        scale = F.scale()
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(F.coeffs - np.conj(_mirror(F.coeffs))))) / scale


def forward_transform(f: np.ndarray, grid: Grid2D) -> SpectralField:
    """Physical samples -> Fourier coefficients under the integral convention."""
    f = np.asarray(f)
    if f.shape != grid.shape:
        raise ValueError(f"field shape {f.shape} does not match grid {grid.shape}")
    if np.iscomplexobj(f):
        raise ValueError("forward_transform expects a real-valued field")
    bad = ~np.isfinite(f)
    if bad.any():
        index = tuple(int(i) for i in np.argwhere(bad)[0])
        raise NonFiniteInputError(index, float(f[index]))
    return SpectralField(grid, grid.cell_area * np.fft.fft2(f))


def inverse_transform(F: SpectralField, reference: Optional[SpectralField] = None) -> np.ndarray:
    """Fourier coefficients -> real physical samples.

    Raises SymmetryError when the coefficients are not Hermitian or when the
    inverse carries an imaginary residue above tolerance; both point at an
    upstream bug rather than data noise.

    Both checks are relative to F itself unless ``reference`` is given. A
    residual formed as the difference of two nearly equal fields is pure
    rounding noise, so it is measured against the field it was taken from.
    """
    scale = F.scale() if reference is None else reference.scale()
    defect = hermitian_defect(F, scale)
    if defect > SYMMETRY_TOLERANCE:
        logger.debug("rejecting coefficients on n=%d: Hermitian defect %.3e", F.grid.n, defect)
        raise SymmetryError(f"Hermitian symmetry violated: relative defect {defect:.3e}")
    values = np.fft.ifft2(F.coeffs) / F.grid.cell_area
    if reference is None:
        magnitude = float(np.max(np.abs(values)))
    else:
        # |f_hat(k)| <= L^2 sup|f|, so this never exceeds the reference amplitude
        magnitude = scale / F.grid.box_length ** 2
    if magnitude > 0.0:
        residue = float(np.max(np.abs(values.imag))) / magnitude
        if residue > IMAGINARY_TOLERANCE:
            raise SymmetryError(f"imaginary residue {residue:.3e} above tolerance")
    return np.ascontiguousarray(values.real)


def fractional_laplacian(F: SpectralField, s: float) -> SpectralField:
    """Lambda^s: multiply by |xi|^s (zero mode annihilated for s > 0)."""
    if not np.isfinite(s) or s < 0:
        raise ValueError(f"fractional_laplacian exponent must be >= 0, got {s}")
    if s == 0:
        return F.with_coeffs(F.coeffs.copy())
    return F.with_coeffs(F.coeffs * F.grid.power(s))


def spectral_derivative(F: SpectralField, axis: int) -> SpectralField:
    """d/dx_axis for axis in {1, 2}"""
    if axis == 1:
        xi = F.grid.xi1
    elif axis == 2:
        xi = F.grid.xi2
    else:
        raise ValueError(f"axis must be 1 or 2, got {axis!r}")
    return F.with_coeffs(1j * xi * F.coeffs)


def perp_gradient(F: SpectralField) -> Tuple[SpectralField, SpectralField]:
    """grad-perp F = (-d2 F, d1 F)"""
    return -spectral_derivative(F, 2), spectral_derivative(F, 1)


def dealias(F: SpectralField) -> SpectralField:
    """Two-thirds rule: zero every mode with max(|k1|, |k2|) > n/3."""
    return F.with_coeffs(np.where(F.grid.dealias_mask, F.coeffs, 0.0))


def leray_project(v1: SpectralField, v2: SpectralField) -> Tuple[SpectralField, SpectralField]:
    """Project (v1, v2) onto divergence-free fields; the zero mode passes through."""
    v1._check(v2)
    grid = v1.grid
    longitudinal = (grid.xi1 * v1.coeffs + grid.xi2 * v2.coeffs) * grid.inv_xi_sq
    return (
        v1.with_coeffs(v1.coeffs - grid.xi1 * longitudinal),
        v2.with_coeffs(v2.coeffs - grid.xi2 * longitudinal),
    )


def inner_product(F: SpectralField, G: SpectralField) -> float:
    """L^2 inner product of the physical fields via Parseval (weight 1/L^2)"""
    F._check(G)
    total = np.sum(F.coeffs * np.conj(G.coeffs)).real
    return float(total) / F.grid.box_length ** 2


def l2_norm(F: SpectralField) -> float:
    return float(np.sqrt(max(inner_product(F, F), 0.0)))


def to_spectral_dealiased(f: np.ndarray, grid: Grid2D) -> SpectralField:
    """Transform a pointwise product back and strip the aliased band"""
    return dealias(forward_transform(f, grid))
