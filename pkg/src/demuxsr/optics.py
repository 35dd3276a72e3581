"""Amplitude transfer functions, the derivative mode and mode overlaps.

Two PSF representations are supported: the Gaussian amplitude
``u(x) = (2 pi sigma^2)^(-1/4) exp(-x^2 / (4 sigma^2))`` and a tabulated real,
even, L2-normalized profile on a uniform grid.  The demultiplexing mode is
``v(x) = -2 sigma du/dx`` where ``sigma`` is fixed by the derivative norm,
``sigma = (1/2) (int (du/dx)^2 dx)^(-1/2)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import AccuracyError, DegeneratePSFError, DomainError, ValidationError
from .quadrature import DEFAULT_TOL, adaptive_simpson

# Gaussian integrals are truncated at this many sigma; the neglected tail
# mass is below 1e-30.
GAUSS_SUPPORT = 12.0
TABULATED_TOL = 1e-9
MIN_TABULATED_POINTS = 64
PSF_FILE_HEADER = "# psf v1"


@dataclass(frozen=True)
class GaussianPSF:
    sigma: float

    def __post_init__(self):
        if not (self.sigma > 0 and np.isfinite(self.sigma)):
            raise DomainError(f"Gaussian PSF needs sigma > 0, got {self.sigma!r}")

    def __call__(self, x):
        s = self.sigma
        return (2 * np.pi * s * s) ** -0.25 * np.exp(-np.square(x) / (4 * s * s))

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        return -x / (2 * self.sigma ** 2) * self(x)

    @property
    def support(self) -> tuple[float, float]:
        half = GAUSS_SUPPORT * self.sigma
        return -half, half


@dataclass(frozen=True, eq=False)
class TabulatedPSF:
    """Real, even, unit-norm PSF sampled on a uniform grid.

    Off-grid values come from cubic splines of ``u`` and of its fourth-order
    central-difference derivative; outside the grid the PSF is zero.
    """

    grid: np.ndarray
    values: np.ndarray
    _u: CubicSpline = field(init=False, repr=False)
    _du: CubicSpline = field(init=False, repr=False)
    _du_grid: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        x = np.array(self.grid, dtype=float).ravel()
        u = np.array(self.values, dtype=float).ravel()
        if x.size != u.size:
            raise ValidationError("grid and values differ in length")
        if x.size < MIN_TABULATED_POINTS:
            raise ValidationError(
                f"tabulated PSF needs at least {MIN_TABULATED_POINTS} points, got {x.size}"
            )
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(u))):
            raise ValidationError("tabulated PSF contains non-finite entries")
        h = np.diff(x)
        if np.any(h <= 0):
            raise ValidationError("tabulated grid must be strictly increasing")
        if np.ptp(h) > 1e-9 * max(abs(h.mean()), 1e-300) * x.size:
            raise ValidationError("tabulated grid must be uniform (use load_psf to resample)")
        if abs(x[0] + x[-1]) > TABULATED_TOL * max(1.0, abs(x[0])):
            raise ValidationError("tabulated grid must be symmetric about zero")
        if np.max(np.abs(u - u[::-1])) > TABULATED_TOL:
            raise ValidationError("tabulated PSF is not even within 1e-9")
        norm = np.trapezoid(u * u, x)
        if abs(norm - 1.0) > TABULATED_TOL:
            raise ValidationError(f"tabulated PSF has L2 norm {norm!r}, expected 1 within 1e-9")
        x.flags.writeable = False
        u.flags.writeable = False
        du = _central_derivative(u, h.mean())
        du.flags.writeable = False
        object.__setattr__(self, "grid", x)
        object.__setattr__(self, "values", u)
        object.__setattr__(self, "_du_grid", du)
        object.__setattr__(self, "_u", CubicSpline(x, u, extrapolate=False))
        object.__setattr__(self, "_du", CubicSpline(x, du, extrapolate=False))

    def __call__(self, x):
        return np.nan_to_num(self._u(np.asarray(x, dtype=float)), nan=0.0)

    def derivative(self, x):
        return np.nan_to_num(self._du(np.asarray(x, dtype=float)), nan=0.0)

    @property
    def derivative_values(self) -> np.ndarray:
        return self._du_grid

    @property
    def support(self) -> tuple[float, float]:
        return float(self.grid[0]), float(self.grid[-1])


TransferFunction = GaussianPSF | TabulatedPSF


def _central_derivative(u: np.ndarray, h: float) -> np.ndarray:
    # fourth-order interior stencil, second-order one-sided at the ends
    du = np.gradient(u, h, edge_order=2)
    du[2:-2] = (u[:-4] - 8 * u[1:-3] + 8 * u[3:-1] - u[4:]) / (12 * h)
    return du


def tabulate(psf: GaussianPSF, half_width: float = 10.0, points: int = 4096) -> TabulatedPSF:
    grid = np.linspace(-half_width, half_width, points)
    return TabulatedPSF(grid, psf(grid))


def dilate(psf: TransferFunction, factor: float) -> TransferFunction:
    """Stretch the PSF by ``factor`` keeping its L2 norm."""
    if not factor > 0:
        raise DomainError("dilation factor must be positive")
    if isinstance(psf, GaussianPSF):
        return GaussianPSF(psf.sigma * factor)
    return TabulatedPSF(psf.grid * factor, psf.values / np.sqrt(factor))


def sigma_from_psf(psf: TransferFunction) -> float:
    """Width parameter that normalizes the derivative mode."""
    if isinstance(psf, GaussianPSF):
        lo, hi = psf.support
        integral = adaptive_simpson(lambda x: np.square(psf.derivative(x)), lo, hi,
                                    tol=DEFAULT_TOL * 1e-2)
    else:
        integral = float(np.trapezoid(np.square(psf.derivative_values), psf.grid))
    lo, hi = psf.support
    # a width beyond ~1e6 support widths means the derivative is rounding noise
    if not (np.isfinite(integral) and integral * (hi - lo) ** 2 > 1e-12):
        raise DegeneratePSFError(f"derivative norm integral is {integral!r}")
    return 0.5 / np.sqrt(integral)


@dataclass(frozen=True, eq=False)
class ModeBasis:
    """The pair ``u`` and ``v = -2 sigma u'`` derived from one PSF."""

    psf: TransferFunction
    sigma: float

    def u(self, x):
        return self.psf(x)

    def v(self, x):
        return -2.0 * self.sigma * self.psf.derivative(x)

    @property
    def derivative_mode(self):
        """Tabulated ``v`` values for a tabulated PSF, else the callable ``v``."""
        if isinstance(self.psf, TabulatedPSF):
            return -2.0 * self.sigma * self.psf.derivative_values
        return self.v

    @property
    def is_gaussian(self) -> bool:
        return isinstance(self.psf, GaussianPSF)


def derivative_mode(psf: TransferFunction) -> ModeBasis:
    return ModeBasis(psf, sigma_from_psf(psf))


def gaussian_basis(sigma: float) -> ModeBasis:
    """Mode basis of a Gaussian PSF, with sigma taken as given."""
    return ModeBasis(GaussianPSF(sigma), float(sigma))


def gaussian_overlap(delta, sigma: float):
    """Closed form of ``int v(x) u(x - delta) dx`` for the Gaussian PSF."""
    delta = np.asarray(delta, dtype=float)
    return delta / (2 * sigma) * np.exp(-delta * delta / (8 * sigma * sigma))


def overlap_quadrature(basis: ModeBasis, x_r: float, x_j: float, tol: float = DEFAULT_TOL) -> float:
    """``int v(x - x_R) u(x - x_j) dx`` by adaptive Simpson over the joint support."""
    lo, hi = basis.psf.support
    a = max(lo + x_r, lo + x_j)
    b = min(hi + x_r, hi + x_j)
    if b <= a:
        raise AccuracyError(
            f"displacement {x_j - x_r:g} exceeds the PSF support; overlap is not resolved"
        )
    if isinstance(basis.psf, TabulatedPSF):
        edge = max(abs(basis.psf.values[0]), abs(basis.psf.values[-1]))
        if abs(x_j - x_r) > 0.5 * (hi - lo) and edge > 0:
            raise AccuracyError("tabulated support too small for this displacement")
    return adaptive_simpson(lambda x: basis.v(x - x_r) * basis.u(x - x_j), a, b, tol=tol)


def projection_amplitude(basis: ModeBasis, x_r: float, x_j: float) -> float:
    """Overlap amplitude ``c(x_j - x_R)`` of a point source with the shifted ``v`` mode."""
    if basis.is_gaussian:
        return float(gaussian_overlap(x_j - x_r, basis.sigma))
    return overlap_quadrature(basis, x_r, x_j)


def linearized_amplitude(sigma: float, x_r: float, x_j: float) -> float:
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    return (x_j - x_r) / (2 * sigma)


def load_psf(path) -> TabulatedPSF:
    """Read a two-column ``x u(x)`` file starting with ``# psf v1``.

    Non-uniform grids are resampled onto a uniform grid with the same number
    of points and the same end points by cubic interpolation.
    """
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip()
        if header != PSF_FILE_HEADER:
            raise ValidationError(f"{path}: expected header {PSF_FILE_HEADER!r}, got {header!r}")
        data = np.loadtxt(fh, comments="#", ndmin=2)
    if data.shape[1] != 2:
        raise ValidationError(f"{path}: expected two columns, got {data.shape[1]}")
    x, u = data[:, 0], data[:, 1]
    if np.any(np.diff(x) <= 0):
        raise ValidationError(f"{path}: x must be strictly increasing")
    uniform = np.linspace(x[0], x[-1], x.size)
    if not np.allclose(x, uniform, rtol=0, atol=1e-12 * max(1.0, abs(x[0]))):
        u = CubicSpline(x, u)(uniform)
    return TabulatedPSF(uniform, u)


def save_psf(path, psf: TabulatedPSF) -> None:
    np.savetxt(path, np.column_stack([psf.grid, psf.values]), header="psf v1", comments="# ",
               fmt="%.17g")
