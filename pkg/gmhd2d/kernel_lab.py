"""
Fractional heat kernel laboratory.

h is the inverse Fourier transform of exp(-|xi|^(2 beta)) on R^2. Being radial,
it reduces to the Hankel integral

    h(r) = (1/2 pi) int_0^inf exp(-s^(2 beta)) J0(r s) s ds

which is evaluated for all sample radii at once with an oscillation-aware
adaptive rule (breakpoints at the zeros of J0(r_max s)). The module also covers
the L^1 bounds of derivatives of h, the mild-solution formula for the linear
fractional heat equation, and a smooth Littlewood-Paley partition with the
matching Bernstein ratios.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import quad, quad_vec, simpson
from scipy.interpolate import CubicHermiteSpline, CubicSpline
from scipy.special import comb, gamma, jn_zeros, jv, jvp

from gmhd2d.errors import KernelQuadratureError, NonConvergentTailError
from gmhd2d.spectral import Grid2D, SpectralField, forward_transform, inverse_transform

logger = logging.getLogger(__name__)

# exp(-SPECTRAL_CUTOFF) ~ 1e-18: the Hankel integrand is truncated there
SPECTRAL_CUTOFF = 41.4
TAIL_BOUND = 1e-10
# per-sample error floor, relative to the largest sample of the same row
ERROR_FLOOR = 1e-3
MAX_DERIVATIVE_ORDER = 4
TAIL_WINDOW = 0.75
NOISE_FLOOR = 1e-11
ANGULAR_SAMPLES = 1440
COSINE_MODES = np.array([0.5, 0.0, 0.5], dtype=complex)
SINE_MODES = np.array([0.5j, 0.0, -0.5j], dtype=complex)
I_POWERS = (1.0, 1j, -1.0, -1j)


def gaussian_kernel(r) -> np.ndarray:
    """Closed form of h for beta = 1: exp(-r^2/4) / (4 pi)"""
    r = np.asarray(r, dtype=float)
    return np.exp(-(r ** 2) / 4.0) / (4.0 * np.pi)


def kernel_center_value(beta: float) -> float:
    """h(0) = Gamma(1/beta) / (4 pi beta)"""
    return float(gamma(1.0 / beta) / (4.0 * np.pi * beta))


def _check_beta(beta: float):
    if not (np.isfinite(beta) and beta > 0):
        raise ValueError(f"beta must be positive, got {beta}")


def _spectral_cutoff(beta: float) -> float:
    return SPECTRAL_CUTOFF ** (1.0 / (2.0 * beta))


def _bessel_breakpoints(s_max: float, r_max: float) -> List[float]:
    if r_max <= 0:
        return []
    count = int(math.ceil(s_max * r_max / math.pi)) + 1
    zeros = jn_zeros(0, count) / r_max
    return [float(z) for z in zeros if z < s_max]


HankelRow = Callable[[float, np.ndarray], np.ndarray]


def _hankel_rows(beta: float, radii: np.ndarray, rows: Sequence[HankelRow], rtol: float) -> np.ndarray:
    """(1/2 pi) int_0^s_max exp(-s^(2 beta)) row(s, r s) s ds for every row; shape (len(rows), len(radii)).

    All rows share one adaptive subdivision. Each sample is computed with the
    21-point and the 15-point Gauss-Kronrod rules; a disagreement above
    ``rtol`` (relative to the sample, floored at ERROR_FLOOR times the row
    maximum) raises KernelQuadratureError naming the worst radius.
    """
    s_max = _spectral_cutoff(beta)
    points = _bessel_breakpoints(s_max, float(np.max(radii)) if radii.size else 0.0)
    two_beta = 2.0 * beta

    def integrand(s: float) -> np.ndarray:
        damping = math.exp(-(s ** two_beta)) * s / (2.0 * np.pi)
        x = radii * s
        return np.concatenate([damping * row(s, x) for row in rows])

    results = {}
    for rule in ("gk21", "gk15"):
        value, _err, info = quad_vec(
            integrand,
            0.0,
            s_max,
            epsabs=1e-200,
            epsrel=0.1 * rtol * ERROR_FLOOR,
            norm="max",
            points=points or None,
            quadrature=rule,
            limit=20000,
            full_output=True,
        )
        if not info.success:
            worst = int(np.argmax(np.abs(value))) % max(len(radii), 1)
            raise KernelQuadratureError(beta, float(radii[worst]), float(_err))
        results[rule] = np.asarray(value).reshape(len(rows), len(radii))

    fine, coarse = results["gk21"], results["gk15"]
    discrepancy = np.abs(fine - coarse)
    row_scale = np.max(np.abs(fine), axis=1, keepdims=True)
    allowed = rtol * np.maximum(np.abs(fine), ERROR_FLOOR * row_scale)
    excess = discrepancy / np.where(allowed > 0, allowed, 1.0)
    if np.any(excess > 1.0):
        row, col = np.unravel_index(int(np.argmax(excess)), excess.shape)
        raise KernelQuadratureError(beta, float(radii[col]), float(discrepancy[row, col]))
    return fine


def radial_derivatives(
    beta: float,
    radii: np.ndarray,
    orders: Sequence[int] = (0,),
    rtol: float = 1e-8,
) -> np.ndarray:
    """d^l h / dr^l at ``radii`` for each l in ``orders``; shape (len(orders), len(radii)).

    d^l/dr^l J0(r s) = s^l J0^(l)(r s), so every order is one more Hankel-type
    integral sharing the same adaptive subdivision.
    """
    _check_beta(beta)
    radii = np.asarray(radii, dtype=float)
    orders = [int(l) for l in orders]
    if any(l < 0 or l > MAX_DERIVATIVE_ORDER for l in orders):
        raise ValueError(f"derivative orders must lie in [0, {MAX_DERIVATIVE_ORDER}], got {orders}")
    rows = [
        (lambda s, x, l=l: s ** l * (jv(0, x) if l == 0 else jvp(0, x, l)))
        for l in orders
    ]
    return _hankel_rows(beta, radii, rows, rtol)


@dataclass(frozen=True, eq=False)
class KernelTable:
    """Sampled radial profile h(r) of the fractional heat kernel."""

    beta: float
    radii: np.ndarray
    values: np.ndarray
    derivative_values: Optional[np.ndarray] = None

    def __post_init__(self):
        _check_beta(self.beta)
        radii = np.asarray(self.radii, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if radii.ndim != 1 or radii.size < 2 or radii[0] != 0.0:
            raise ValueError("kernel radii must be a 1-D array starting at 0")
        if np.any(np.diff(radii) <= 0):
            raise ValueError("kernel radii must be strictly increasing")
        if values.shape != radii.shape or not np.all(np.isfinite(values)):
            raise ValueError("kernel values must be finite and match the radii")
        derivative = self.derivative_values
        if derivative is not None:
            derivative = np.asarray(derivative, dtype=float)
            if derivative.shape != radii.shape or not np.all(np.isfinite(derivative)):
                raise ValueError("kernel derivative values must be finite and match the radii")
        tail = float(np.max(np.abs(values[-max(2, radii.size // 20):])))
        if tail >= TAIL_BOUND:
            # only integer beta gives a super-algebraic tail
            if float(self.beta).is_integer():
                raise ValueError(
                    f"kernel tail |h| = {tail:.3e} at r <= {radii[-1]} is not below {TAIL_BOUND}; "
                    "increase r_max"
                )
            logger.warning(
                "beta=%g: kernel tail |h| = %.3e near r_max=%g (algebraic decay)", self.beta, tail, radii[-1]
            )
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "derivative_values", derivative)

    @property
    def r_max(self) -> float:
        return float(self.radii[-1])

    @property
    def tail_exponent(self) -> float:
        """Algebraic decay exponent of h, |h(r)| ~ r^-(2 + 2 beta)"""
        return 2.0 + 2.0 * self.beta

    def _interpolant(self):
        if self.derivative_values is not None:
            return CubicHermiteSpline(self.radii, self.values, self.derivative_values)
        return CubicSpline(self.radii, self.values)

    def evaluate(self, r) -> np.ndarray:
        """h at arbitrary radii: cubic interpolation inside the table, power-law tail beyond."""
        r = np.abs(np.asarray(r, dtype=float))
        inside = r <= self.r_max
        out = np.empty_like(r)
        out[inside] = self._interpolant()(r[inside])
        beyond = ~inside
        out[beyond] = self.values[-1] * (self.r_max / r[beyond]) ** self.tail_exponent
        return out

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame({"r": self.radii, "h": self.values})
        frame["dh/dr"] = self.derivative_values if self.derivative_values is not None else np.nan
        return frame

    def to_csv(self, path: str):
        self.to_frame().to_csv(path, index=False, float_format="%.17g")


def kernel_profile(beta: float, r_max: float = 20.0, n_samples: int = 2001, rtol: float = 1e-8) -> KernelTable:
    """Tabulate h and dh/dr on ``n_samples`` equispaced radii in [0, r_max]."""
    _check_beta(beta)
    if not (r_max > 0 and np.isfinite(r_max)):
        raise ValueError(f"r_max must be positive, got {r_max}")
    if n_samples < 2:
        raise ValueError(f"n_samples must be >= 2, got {n_samples}")
    radii = np.linspace(0.0, r_max, int(n_samples))
    values, derivative = radial_derivatives(beta, radii, (0, 1), rtol)
    logger.info("kernel table beta=%g: %d samples on [0, %g], h(0)=%.12g", beta, n_samples, r_max, values[0])
    return KernelTable(beta, radii, values, derivative)


def kernel_tail_mass(beta: float, radius: float) -> float:
    """Mass of h outside the disc of ``radius``.

    Integrating 2 pi r h(r) over the disc and then by parts in s gives
    1 - int_0^inf exp(-u) J0(radius u^(1/(2 beta))) du, so this returns that
    integral (u = s^(2 beta) removes the endpoint singularity for beta < 1/2).
    """
    _check_beta(beta)
    exponent = 1.0 / (2.0 * beta)

    def integrand(u: float) -> float:
        return math.exp(-u) * float(jv(0, radius * u ** exponent))

    u_max = SPECTRAL_CUTOFF
    points = [z ** (2.0 * beta) for z in _bessel_breakpoints(u_max ** exponent, radius)]
    value, _err = quad(integrand, 0.0, u_max, points=points[:200] or None, limit=2000, epsabs=1e-13, epsrel=1e-11)
    return float(value)


def kernel_mass(table: KernelTable) -> float:
    """int_{R^2} h dx: Simpson over the table plus the exact mass beyond r_max."""
    inner = 2.0 * np.pi * simpson(table.values * table.radii, x=table.radii)
    return float(inner + kernel_tail_mass(table.beta, table.r_max))


def kernel_sign_changes(table: KernelTable, relative_floor: float = 1e-9) -> List[float]:
    """Radii where h changes sign (midpoints between samples).

    Samples below ``relative_floor`` times h(0) are ignored as quadrature noise.
    """
    floor = relative_floor * abs(table.values[0])
    significant = np.abs(table.values) > floor
    radii = table.radii[significant]
    signs = np.sign(table.values[significant])
    flips = np.nonzero(signs[1:] != signs[:-1])[0]
    return [float(0.5 * (radii[i] + radii[i + 1])) for i in flips]


def _radial_l1(radii: np.ndarray, values: np.ndarray) -> float:
    """2 pi int |g| r dr over the table plus a fitted power-law tail beyond it."""
    inner = 2.0 * np.pi * simpson(np.abs(values) * radii, x=radii)
    r_max = radii[-1]
    peak = float(np.max(np.abs(values)))
    window = (radii >= TAIL_WINDOW * r_max) & (np.abs(values) > NOISE_FLOOR * peak)
    if np.count_nonzero(window) < 4:
        return float(inner)
    slope, intercept = np.polyfit(np.log(radii[window]), np.log(np.abs(values[window])), 1)
    power = -slope
    if power <= 2.0:
        raise NonConvergentTailError(
            f"tail of |g| decays like r^-{power:.3f} near r={r_max:g}; not integrable in R^2"
        )
    amplitude = math.exp(intercept)
    tail = 2.0 * np.pi * amplitude * r_max ** (2.0 - power) / (power - 2.0)
    return float(inner + tail)


def _angular_modes(a: int, b: int) -> np.ndarray:
    """c_m with cos(phi)^a sin(phi)^b = sum_m c_m exp(i m phi), indexed by m + a + b"""
    coeffs = np.ones(1, dtype=complex)
    for factor, count in ((COSINE_MODES, a), (SINE_MODES, b)):
        for _ in range(count):
            coeffs = np.convolve(coeffs, factor)
    return coeffs


def derivative_l1_norms(
    beta: float,
    l_max: int,
    r_max: float = 20.0,
    n_samples: int = 401,
    rtol: float = 1e-8,
) -> Dict[Tuple[int, int], float]:
    """||d^gamma h||_{L^1} for every multi-index gamma = (a, b) with a + b <= l_max.

    The symbol (i xi)^gamma exp(-|xi|^(2 beta)) splits into angular modes
    c_m exp(i m phi) times s^l exp(-s^(2 beta)); mode m inverts to
    i^m exp(i m theta) times the order-m Hankel transform H_{l,m}(r). The
    derivative is assembled on a polar grid, |.| is averaged over the angle,
    and the radial integral uses the same power-law tail as the profile.
    """
    _check_beta(beta)
    if not (0 <= l_max <= MAX_DERIVATIVE_ORDER):
        raise ValueError(f"l_max must lie in [0, {MAX_DERIVATIVE_ORDER}], got {l_max}")
    radii = np.linspace(0.0, r_max, int(n_samples))
    pairs = [(l, m) for l in range(l_max + 1) for m in range(l % 2, l + 1, 2)]
    rows = [(lambda s, x, l=l, m=m: s ** l * jv(m, x)) for l, m in pairs]
    hankel = dict(zip(pairs, _hankel_rows(beta, radii, rows, rtol)))
    theta = 2.0 * np.pi * np.arange(ANGULAR_SAMPLES) / ANGULAR_SAMPLES

    norms: Dict[Tuple[int, int], float] = {}
    for l in range(l_max + 1):
        for a in range(l, -1, -1):
            field = np.zeros((radii.size, ANGULAR_SAMPLES))
            for index, coefficient in enumerate(_angular_modes(a, l - a)):
                if coefficient == 0:
                    continue
                m = index - l
                # J_{-m} = (-1)^m J_m
                sign = -1.0 if m < 0 and m % 2 else 1.0
                profile = sign * hankel[(l, abs(m))]
                angular = (coefficient * I_POWERS[(l + m) % 4] * np.exp(1j * m * theta)).real
                field += np.outer(profile, angular)
            norms[(a, l - a)] = _radial_l1(radii, np.mean(np.abs(field), axis=1))
    return norms


def _gradient_l1_norms(beta: float, l_max: int, r_max: float, n_samples: int, rtol: float) -> np.ndarray:
    """sup over |gamma| = l of ||d^gamma h||_{L^1}, for l = 0..l_max"""
    norms = derivative_l1_norms(beta, l_max, r_max, n_samples, rtol)
    sups = []
    for l in range(l_max + 1):
        gamma, value = max(((g, v) for g, v in norms.items() if sum(g) == l), key=lambda item: item[1])
        logger.debug("beta=%g: order %d sup attained at d^%s h", beta, l, gamma)
        sups.append(value)
    return np.array(sups)


def lambda_l1_norm(beta: float, eta: float, box_length: float, n: int) -> float:
    """Discrete L^1 norm of Lambda^eta h on a periodic box (surrogate for R^2)."""
    spacing = box_length / n
    modes = np.fft.fftfreq(n, d=1.0 / n) * (2.0 * np.pi / box_length)
    half = np.fft.rfftfreq(n, d=1.0 / n) * (2.0 * np.pi / box_length)
    xi = np.sqrt(modes[:, None] ** 2 + half[None, :] ** 2)
    symbol = np.exp(-(xi ** (2.0 * beta)))
    if eta > 0:
        symbol *= xi ** eta
    samples = np.fft.irfft2(symbol, s=(n, n)) / spacing ** 2
    return float(spacing ** 2 * np.sum(np.abs(samples)))


@dataclass(frozen=True)
class L1Bound:
    beta: float
    quantity: str
    order: float
    value: float
    error_bar: float

    @property
    def relative_error(self) -> float:
        return self.error_bar / abs(self.value) if self.value else math.inf


def kernel_l1_bounds(
    beta: float,
    l_max: int = 2,
    eta_list: Sequence[float] = (0.5, 1.7),
    r_max: float = 20.0,
    n_samples: int = 401,
    box_length: float = 64.0,
    surrogate_n: int = 2048,
    rtol: float = 1e-8,
) -> List[L1Bound]:
    """max over |gamma| = l of ||d^gamma h||_{L^1} for l <= l_max, and ||Lambda^eta h||_{L^1} for each eta.

    Each value comes with the difference to a second evaluation at doubled
    resolution: (2 r_max, 4 n_samples - 3) for the radial norms, 2 surrogate_n
    for the periodic ones.
    """
    _check_beta(beta)
    if not (0 <= l_max <= MAX_DERIVATIVE_ORDER):
        raise ValueError(f"l_max must lie in [0, {MAX_DERIVATIVE_ORDER}], got {l_max}")
    if any(not (np.isfinite(eta) and eta >= 0) for eta in eta_list):
        raise ValueError(f"every eta must be >= 0, got {list(eta_list)}")
    if box_length < 64.0:
        raise ValueError(f"surrogate box must be at least 64 across, got {box_length}")

    coarse = _gradient_l1_norms(beta, l_max, r_max, n_samples, rtol)
    fine = _gradient_l1_norms(beta, l_max, 2.0 * r_max, 4 * n_samples - 3, rtol)
    bounds = [
        L1Bound(beta, "grad", float(l), float(fine[l]), float(abs(fine[l] - coarse[l])))
        for l in range(l_max + 1)
    ]
    for eta in eta_list:
        low = lambda_l1_norm(beta, eta, box_length, surrogate_n)
        high = lambda_l1_norm(beta, eta, box_length, 2 * surrogate_n)
        bounds.append(L1Bound(beta, "lambda", float(eta), high, abs(high - low)))
    for bound in bounds:
        if not np.isfinite(bound.value):
            raise NonConvergentTailError(f"{bound.quantity} norm of order {bound.order} is not finite")
        logger.info(
            "beta=%g %s order %g: %.10g (+/- %.2e)", beta, bound.quantity, bound.order, bound.value, bound.error_bar
        )
    return bounds


def l1_bounds_frame(bounds: Sequence[L1Bound]) -> pd.DataFrame:
    rows = [
        {
            "beta": b.beta,
            "quantity": b.quantity,
            "order": b.order,
            "value": b.value,
            "error_bar": b.error_bar,
            "relative_error": b.relative_error,
        }
        for b in bounds
    ]
    return pd.DataFrame(rows, columns=["beta", "quantity", "order", "value", "error_bar", "relative_error"])


Forcing = Callable[[float], SpectralField]


def _semigroup(F: SpectralField, beta: float, kappa: float, t: float) -> np.ndarray:
    return np.exp(-kappa * t * F.grid.power(2.0 * beta)) * F.coeffs


def mild_solution(
    v0: SpectralField,
    forcing: Optional[Forcing],
    t: float,
    beta: float,
    kappa: float = 1.0,
    order: int = 8,
    panels: int = 16,
) -> SpectralField:
    """v(t) = exp(-kappa Lambda^(2 beta) t) v0 + int_0^t exp(-kappa Lambda^(2 beta)(t - s)) f(s) ds.

    The Duhamel integral uses composite Gauss-Legendre with ``panels`` panels
    of ``order`` nodes; ``forcing(s)`` is sampled at those nodes only.
    """
    if not (np.isfinite(t) and t > 0):
        raise ValueError(f"mild solution needs t > 0, got {t}")
    _check_beta(beta)
    if kappa < 0:
        raise ValueError(f"kappa must be >= 0, got {kappa}")
    if order < 1 or panels < 1:
        raise ValueError("quadrature order and panel count must be positive")
    total = _semigroup(v0, beta, kappa, t)
    if forcing is not None:
        nodes, weights = np.polynomial.legendre.leggauss(order)
        edges = np.linspace(0.0, t, panels + 1)
        for a, b in zip(edges[:-1], edges[1:]):
            half = 0.5 * (b - a)
            mid = 0.5 * (a + b)
            for x, w in zip(nodes, weights):
                s = mid + half * x
                f = forcing(s)
                if not f.grid.same_as(v0.grid):
                    raise ValueError("forcing lives on a different grid than v0")
                total = total + (w * half) * _semigroup(f, beta, kappa, t - s)
    return v0.with_coeffs(total)


def periodic_kernel(table: KernelTable, grid: Grid2D, t: float, kappa: float = 1.0, images: int = 16) -> np.ndarray:
    """(kappa t)^(-1/beta) h(|x| / (kappa t)^(1/(2 beta))) summed over periodic images."""
    if not (np.isfinite(t) and t > 0):
        raise ValueError(f"kernel time must be > 0, got {t}")
    if kappa <= 0:
        raise ValueError(f"kappa must be > 0 for the convolution kernel, got {kappa}")
    scale = (kappa * t) ** (1.0 / (2.0 * table.beta))
    x1, x2 = grid.coordinates()
    L = grid.box_length
    shifts = np.arange(-images, images + 1)[:, None, None] * L
    kernel = np.zeros(grid.shape)
    for m1 in range(-images, images + 1):
        r = np.hypot(x1 + m1 * L, x2[None, :, :] + shifts) / scale
        kernel += table.evaluate(r).sum(axis=0)
    return kernel / scale ** 2


def mild_solution_convolution(
    v0: SpectralField,
    t: float,
    beta: float,
    kappa: float = 1.0,
    table: Optional[KernelTable] = None,
    images: int = 16,
) -> SpectralField:
    """Unforced mild solution through the physical-space kernel: K_t * v0."""
    if table is None:
        table = kernel_profile(beta, r_max=30.0, n_samples=1201)
    elif table.beta != beta:
        raise ValueError(f"kernel table is for beta={table.beta}, not {beta}")
    kernel = periodic_kernel(table, v0.grid, t, kappa, images)
    return v0.with_coeffs(forward_transform(kernel, v0.grid).coeffs * v0.coeffs)


def _smooth_step(x: np.ndarray) -> np.ndarray:
    """C^inf step: 0 for x <= 0, 1 for x >= 1"""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    left = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
    right = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1.0 - x, 1.0)), 0.0)
    return left / (left + right)


def lp_bump(r: np.ndarray) -> np.ndarray:
    """Radial cutoff chi: 1 on [0, 1/2], 0 on [1, inf), smooth in between."""
    return 1.0 - _smooth_step(2.0 * np.asarray(r, dtype=float) - 1.0)


@dataclass(frozen=True, eq=False)
class LPBlock:
    """Dyadic piece Delta_k F; k = -1 is the low-frequency block."""

    k: int
    field: SpectralField

    def __post_init__(self):
        if self.k < -1:
            raise ValueError(f"block index must be >= -1, got {self.k}")


def lp_decompose(F: SpectralField, k_max: int) -> List[LPBlock]:
    """Nonhomogeneous Littlewood-Paley blocks Delta_{-1} .. Delta_{k_max}.

    Delta_{-1} = chi(|xi|), Delta_k = chi(|xi| / 2^(k+1)) - chi(|xi| / 2^k);
    the sum telescopes to chi(|xi| / 2^(k_max+1)) = 1 on the grid.
    """
    xi = F.grid.xi_abs
    if 2.0 ** k_max < float(np.max(xi)):
        raise ValueError(f"2^k_max = {2.0 ** k_max:g} does not cover max |xi| = {float(np.max(xi)):g}")
    lower = lp_bump(xi)
    blocks = [LPBlock(-1, F.with_coeffs(lower * F.coeffs))]
    for k in range(0, k_max + 1):
        upper = lp_bump(xi / 2.0 ** (k + 1))
        blocks.append(LPBlock(k, F.with_coeffs((upper - lower) * F.coeffs)))
        lower = upper
    return blocks


def reconstruct(blocks: Sequence[LPBlock]) -> SpectralField:
    total = SpectralField.zeros(blocks[0].field.grid)
    for block in blocks:
        total = total + block.field
    return total


def gradient_magnitude(F: SpectralField, l: int) -> np.ndarray:
    """|grad^l f| pointwise: the Euclidean norm of the full l-th derivative tensor."""
    if l < 0:
        raise ValueError(f"derivative order must be >= 0, got {l}")
    if l == 0:
        return np.abs(inverse_transform(F))
    grid = F.grid
    total = np.zeros(grid.shape)
    for a in range(l + 1):
        symbol = (1j * grid.xi1) ** a * (1j * grid.xi2) ** (l - a)
        total += comb(l, a, exact=True) * inverse_transform(F.with_coeffs(symbol * F.coeffs)) ** 2
    return np.sqrt(total)


def bernstein_check(block: LPBlock, l: int) -> float:
    """||grad^l Delta_k f||_{L^1} / (2^(k l) ||Delta_k f||_{L^1}) on the grid."""
    if block.k < 0:
        raise ValueError("bernstein_check needs a dyadic block with k >= 0")
    grid = block.field.grid
    base = grid.cell_area * float(np.sum(gradient_magnitude(block.field, 0)))
    if base == 0.0:
        raise ValueError(f"block k={block.k} is zero; the Bernstein ratio is undefined")
    top = grid.cell_area * float(np.sum(gradient_magnitude(block.field, l)))
    return top / (2.0 ** (block.k * l) * base)


def bernstein_scan(F: SpectralField, k_values: Sequence[int], orders: Sequence[int], k_max: int) -> Dict[int, Dict[int, float]]:
    """Ratios per derivative order and block index."""
    blocks = {b.k: b for b in lp_decompose(F, k_max)}
    return {l: {k: bernstein_check(blocks[k], l) for k in k_values} for l in orders}
