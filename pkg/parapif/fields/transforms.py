"""Nonuniform and uniform Fourier transforms on the periodic cube.

Type 1 maps particle strengths to Fourier coefficients,

    c(k) = (1 / L^3) * sum_j s_j exp(-i k . x_j),

and type 2 evaluates a spectrum at particle positions,

    u_j = sum_k c(k) exp(+i k . x_j),

with k = (2 pi / L) n for n in [-N/2, N/2 - 1]^3. The exact variants sum
directly; the fast variants use Gaussian gridding on a twice oversampled
mesh. The uniform pair ``fft_forward``/``fft_inverse`` uses the unitary
1/sqrt(N^3) convention of the grid solver.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Tuple

import numpy as np

from ..errors import ArgumentError
from ..models import NUFFT_TOLERANCE_RANGE, FieldSpectrum, GridField, SpectrumKind

logger = logging.getLogger(__name__)

OVERSAMPLING = 2
_MIN_TOLERANCE, _MAX_TOLERANCE = NUFFT_TOLERANCE_RANGE
# Upper bound on temporary (particles x stencil) elements held at once.
_CHUNK_ELEMENTS = 1 << 21
_SPATIAL_AXES = (-3, -2, -1)


@dataclass(frozen=True)
class ModeSet:
    """The N^3 integer triples n in [-N/2, N/2 - 1]^3, row-major over (n_x, n_y, n_z)."""

    modes: int
    length: float

    def __post_init__(self) -> None:
        if self.modes < 2 or self.modes % 2:
            raise ArgumentError(f"mode count per dimension must be even, got {self.modes}")
        if not self.length > 0:
            raise ArgumentError(f"domain length must be positive, got {self.length}")

    @property
    def count(self) -> int:
        return self.modes**3

    @cached_property
    def integers(self) -> np.ndarray:
        return np.arange(-self.modes // 2, self.modes // 2)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        return (2.0 * np.pi / self.length) * self.integers

    @cached_property
    def wavevectors(self) -> np.ndarray:
        """(3, N, N, N) array of physical wavevector components."""
        return np.stack(np.meshgrid(*(self.wavenumbers,) * 3, indexing="ij"))

    @cached_property
    def squared_norm(self) -> np.ndarray:
        return np.sum(self.wavevectors**2, axis=0)

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        """True on the unpaired n = -N/2 planes."""
        edge = self.integers == -self.modes // 2
        return edge[:, None, None] | edge[None, :, None] | edge[None, None, :]

    def triples(self) -> np.ndarray:
        """(N^3, 3) integer triples in the documented enumeration order."""
        grids = np.meshgrid(*(self.integers,) * 3, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def spectrum(
        self,
        coefficients: np.ndarray,
        kind: SpectrumKind = SpectrumKind.DENSITY,
    ) -> FieldSpectrum:
        return FieldSpectrum(coefficients, self.modes, self.length, kind, "domain")


def _checked_points(points: np.ndarray, length: float) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 3:
        raise ArgumentError(f"points must have shape (N_p, 3), got {points.shape}")
    if points.size and (np.min(points) < 0.0 or np.max(points) >= length):
        raise ArgumentError(f"points must lie in [0, {length})^3 of the spectrum's domain")
    return points


def _checked_strengths(strengths: np.ndarray, n_points: int) -> np.ndarray:
    strengths = np.asarray(strengths, dtype=np.complex128)
    if strengths.shape != (n_points,):
        raise ArgumentError(
            f"strengths length {strengths.shape} does not match {n_points} points"
        )
    return strengths


def _phases(points: np.ndarray, modes: ModeSet, sign: float) -> np.ndarray:
    """(N_p, 3, N) table exp(sign * i * k_d * x_d)."""
    return np.exp(sign * 1j * points[:, :, None] * modes.wavenumbers[None, None, :])


def _particle_chunks(n_points: int, stencil: int):
    step = max(1, _CHUNK_ELEMENTS // max(1, stencil))
    for start in range(0, n_points, step):
        yield slice(start, min(start + step, n_points))


def nudft_type1(points: np.ndarray, strengths: np.ndarray, modes: ModeSet) -> FieldSpectrum:
    points = _checked_points(points, modes.length)
    strengths = _checked_strengths(strengths, points.shape[0])
    coefficients = np.zeros((modes.modes,) * 3, dtype=np.complex128)
    for part in _particle_chunks(points.shape[0], 3 * modes.modes):
        e = _phases(points[part], modes, -1.0)
        coefficients += np.einsum("j,ja,jb,jc->abc", strengths[part], e[:, 0], e[:, 1], e[:, 2])
    return modes.spectrum(coefficients / modes.length**3)


def nudft_type2(spectrum: FieldSpectrum, points: np.ndarray) -> np.ndarray:
    """Evaluate a scalar (or, componentwise, a vector) spectrum at the points."""
    modes = ModeSet(spectrum.modes, spectrum.length)
    points = _checked_points(points, spectrum.length)
    lead = spectrum.coefficients.shape[:-3]
    out = np.empty(lead + (points.shape[0],), dtype=np.complex128)
    for part in _particle_chunks(points.shape[0], 3 * modes.modes):
        e = _phases(points[part], modes, 1.0)
        out[..., part] = np.einsum(
            "...abc,ja,jb,jc->...j", spectrum.coefficients, e[:, 0], e[:, 1], e[:, 2]
        )
    return out


@dataclass(frozen=True)
class NufftPlan:
    """Gaussian gridding parameters for one (tolerance, mode count) pair.

    The kernel exp(-d^2 / (4 tau)) lives on the 2 pi-periodic scaled axis and
    is truncated to ``half_width`` oversampled grid points on either side of
    a particle.
    """

    tolerance: float
    modes: int

    def __post_init__(self) -> None:
        if not _MIN_TOLERANCE < self.tolerance < _MAX_TOLERANCE:
            raise ArgumentError(
                f"NUFFT tolerance must lie in ({_MIN_TOLERANCE:g}, {_MAX_TOLERANCE:g}), "
                f"got {self.tolerance:g}"
            )
        if self.modes < 2 or self.modes % 2:
            raise ArgumentError(f"mode count per dimension must be even, got {self.modes}")
        logger.debug(
            "NUFFT plan eps=%g N=%d: grid %d^3, half-width %d, tau %.3e",
            self.tolerance,
            self.modes,
            self.oversampled,
            self.half_width,
            self.tau,
        )

    @property
    def oversampled(self) -> int:
        return OVERSAMPLING * self.modes

    @property
    def half_width(self) -> int:
        return math.ceil(-math.log10(self.tolerance) - 1e-9) + 2

    @property
    def spread_width(self) -> int:
        return 2 * self.half_width

    @property
    def tau(self) -> float:
        r = OVERSAMPLING
        return math.pi * self.half_width / (self.modes**2 * r * (r - 0.5))

    @cached_property
    def deconvolution(self) -> np.ndarray:
        n = np.arange(-self.modes // 2, self.modes // 2, dtype=np.float64)
        return np.sqrt(np.pi / self.tau) * np.exp(n**2 * self.tau)

    @cached_property
    def deconvolution_3d(self) -> np.ndarray:
        d = self.deconvolution
        return d[:, None, None] * d[None, :, None] * d[None, None, :]

    @cached_property
    def fft_index(self) -> Tuple[np.ndarray, ...]:
        idx = np.mod(np.arange(-self.modes // 2, self.modes // 2), self.oversampled)
        return np.ix_(idx, idx, idx)

    def _stencil(self, scaled: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Flat grid indices (n, W, W, W) and per-axis kernel values (n, 3, W)."""
        m = self.oversampled
        h = 2.0 * np.pi / m
        base = np.floor(scaled / h).astype(np.int64)
        offsets = np.arange(-self.half_width + 1, self.half_width + 1)
        nodes = base[:, :, None] + offsets[None, None, :]
        kernel = np.exp(-((nodes * h - scaled[:, :, None]) ** 2) / (4.0 * self.tau))
        wrapped = np.mod(nodes, m)
        flat = (
            wrapped[:, 0, :, None, None] * m + wrapped[:, 1, None, :, None]
        ) * m + wrapped[:, 2, None, None, :]
        return flat, kernel

    @staticmethod
    def _outer(kernel: np.ndarray) -> np.ndarray:
        return kernel[:, 0, :, None, None] * kernel[:, 1, None, :, None] * kernel[:, 2, None, None, :]

    def spread(self, scaled: np.ndarray, strengths: np.ndarray) -> np.ndarray:
        m = self.oversampled
        size = m**3
        real = np.zeros(size)
        imag = np.zeros(size)
        for part in _particle_chunks(scaled.shape[0], self.spread_width**3):
            flat, kernel = self._stencil(scaled[part])
            values = strengths[part, None, None, None] * self._outer(kernel)
            flat = flat.ravel()
            real += np.bincount(flat, weights=values.real.ravel(), minlength=size)
            imag += np.bincount(flat, weights=values.imag.ravel(), minlength=size)
        return (real + 1j * imag).reshape(m, m, m)

    def interpolate(self, grid: np.ndarray, scaled: np.ndarray) -> np.ndarray:
        lead = grid.shape[:-3]
        flat_grid = grid.reshape(lead + (-1,))
        out = np.empty(lead + (scaled.shape[0],), dtype=np.complex128)
        for part in _particle_chunks(scaled.shape[0], self.spread_width**3):
            flat, kernel = self._stencil(scaled[part])
            weights = self._outer(kernel)
            out[..., part] = np.sum(flat_grid[..., flat] * weights, axis=(-3, -2, -1))
        return out


def _matching_plan(plan: NufftPlan, modes: int) -> None:
    if plan.modes != modes:
        raise ArgumentError(f"plan was built for N={plan.modes}, spectrum has N={modes}")


def nufft_type1(
    points: np.ndarray,
    strengths: np.ndarray,
    modes: ModeSet,
    plan: NufftPlan,
) -> FieldSpectrum:
    _matching_plan(plan, modes.modes)
    points = _checked_points(points, modes.length)
    strengths = _checked_strengths(strengths, points.shape[0])
    scaled = points * (2.0 * np.pi / modes.length)
    grid = plan.spread(scaled, strengths)
    transformed = np.fft.fftn(grid) / plan.oversampled**3
    coefficients = transformed[plan.fft_index] * plan.deconvolution_3d
    return modes.spectrum(coefficients / modes.length**3)


def nufft_type2(spectrum: FieldSpectrum, points: np.ndarray, plan: NufftPlan) -> np.ndarray:
    _matching_plan(plan, spectrum.modes)
    points = _checked_points(points, spectrum.length)
    scaled = points * (2.0 * np.pi / spectrum.length)
    lead = spectrum.coefficients.shape[:-3]
    padded = np.zeros(lead + (plan.oversampled,) * 3, dtype=np.complex128)
    padded[(Ellipsis,) + plan.fft_index] = spectrum.coefficients * plan.deconvolution_3d
    grid = np.fft.ifftn(padded, axes=_SPATIAL_AXES)
    return plan.interpolate(grid, scaled)


def _require_power_of_two(n: int) -> None:
    if n < 1 or n & (n - 1):
        raise ArgumentError(f"uniform FFT size must be a power of two, got {n}")


def fft_forward(grid: GridField) -> FieldSpectrum:
    n = grid.points
    _require_power_of_two(n)
    values = grid.values
    if values.shape[-3:] != (n, n, n) or values.ndim not in (3, 4):
        raise ArgumentError(f"grid must be (N, N, N) or (3, N, N, N), got {values.shape}")
    transformed = np.fft.fftn(values, axes=_SPATIAL_AXES, norm="ortho")
    kind = SpectrumKind.FIELD if values.ndim == 4 else SpectrumKind.DENSITY
    return FieldSpectrum(
        np.fft.fftshift(transformed, axes=_SPATIAL_AXES),
        n,
        grid.length,
        kind,
        "unitary",
    )


def fft_inverse(spectrum: FieldSpectrum, keep_complex: bool = False) -> GridField:
    _require_power_of_two(spectrum.modes)
    shifted = np.fft.ifftshift(spectrum.coefficients, axes=_SPATIAL_AXES)
    values = np.fft.ifftn(shifted, axes=_SPATIAL_AXES, norm="ortho")
    return GridField(values if keep_complex else values.real, spectrum.length)


def relative_max_error(approx: np.ndarray, exact: np.ndarray, floor: Optional[float] = None) -> float:
    """max|approx - exact| / max|exact|."""
    scale = float(np.max(np.abs(exact)))
    if floor is not None:
        scale = max(scale, floor)
    if scale == 0.0:
        return float(np.max(np.abs(approx)))
    return float(np.max(np.abs(np.asarray(approx) - np.asarray(exact)))) / scale
