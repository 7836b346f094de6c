"""Particle-in-Fourier field solve.

Charges are scattered straight onto the truncated Fourier basis, the
spectral Poisson operator gives E_k, and E is gathered back at the particle
positions. The B-spline multiplier S_k is applied once on each side.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from ..errors import ArgumentError, ConfigurationError, NumericError
from ..models import FieldSpectrum, PhaseSpaceState, PropagatorConfig, Scheme, SpectrumKind
from .shapes import fourier_multiplier
from .transforms import ModeSet, NufftPlan, nudft_type1, nudft_type2, nufft_type1, nufft_type2

logger = logging.getLogger(__name__)

IMAGINARY_RESIDUE_LIMIT = 1e-10
_IMAGINARY_RESIDUE_WARN = 1e-12


@dataclass(frozen=True)
class PoissonOperator:
    """Diagonal E_k = -i k / |k|^2 rho_k.

    Zero at k = 0 and on the unpaired n = -N/2 planes.
    """

    modes: ModeSet

    @cached_property
    def entries(self) -> np.ndarray:
        k = self.modes.wavevectors
        k2 = self.modes.squared_norm
        inverse = np.zeros_like(k2)
        keep = (k2 > 0.0) & ~self.modes.nyquist_mask
        inverse[keep] = 1.0 / k2[keep]
        return -1j * k * inverse[None, ...]

    def apply(self, density: FieldSpectrum) -> FieldSpectrum:
        if density.kind is not SpectrumKind.DENSITY or density.modes != self.modes.modes:
            raise ArgumentError("Poisson operator expects a density spectrum on its own mode set")
        return FieldSpectrum(
            self.entries * density.coefficients[None, ...],
            density.modes,
            density.length,
            SpectrumKind.FIELD,
            density.normalization,
        )


@dataclass
class FieldSolution:
    """Result of one field solve.

    ``e_spectrum`` is the field the particles actually feel: E_k S_k for PIF,
    the unitary grid spectrum for PIC. ``measured_charge`` is the total
    charge seen by the solver before the background is removed.
    """

    e_particles: np.ndarray
    e_spectrum: FieldSpectrum
    measured_charge: float


def real_part_checked(values: np.ndarray, scale: float, source: str) -> np.ndarray:
    if scale == 0.0:
        return values.real.copy()
    residue = float(np.max(np.abs(values.imag), initial=0.0)) / scale
    if residue > IMAGINARY_RESIDUE_LIMIT:
        raise NumericError(
            f"gathered field has imaginary residue {residue:.3e} relative", module=source
        )
    if residue > _IMAGINARY_RESIDUE_WARN:
        logger.warning("%s: imaginary field residue %.3e relative, discarding", source, residue)
    return values.real.copy()


class PifFieldSolver:
    """Field solver for one spectral propagator configuration.

    Holds the precomputed multiplier, Poisson operator and NUFFT plan; it has
    no mutable state, so one instance serves concurrent solves.
    """

    def __init__(self, cfg: PropagatorConfig, length: float) -> None:
        if not cfg.scheme.is_spectral:
            raise ConfigurationError(f"{cfg.scheme.value} is not a PIF scheme", ["scheme"])
        self.cfg = cfg
        self.modes = ModeSet(cfg.modes, length)
        self.multiplier = fourier_multiplier(cfg.spline_order, self.modes)
        self.operator = PoissonOperator(self.modes)
        self.plan: Optional[NufftPlan] = None
        if cfg.scheme is Scheme.PIF_NUFFT:
            try:
                self.plan = NufftPlan(cfg.effective_tolerance, cfg.modes)
            except ArgumentError as exc:
                raise ConfigurationError(str(exc), ["tolerance"]) from exc

    def scatter(self, state: PhaseSpaceState) -> FieldSpectrum:
        """rho_k = (q S_k / L^3) sum_j w_j exp(-i k . x_j), background not yet removed."""
        self._check_domain(state)
        strengths = state.charge * state.w
        if self.plan is None:
            raw = nudft_type1(state.x, strengths, self.modes)
        else:
            raw = nufft_type1(state.x, strengths, self.modes, self.plan)
        return self.modes.spectrum(raw.coefficients * self.multiplier)

    def gather(self, felt: FieldSpectrum, state: PhaseSpaceState) -> np.ndarray:
        if self.plan is None:
            values = nudft_type2(felt, state.x)
        else:
            values = nufft_type2(felt, state.x, self.plan)
        scale = float(np.max(np.sum(np.abs(felt.coefficients), axis=(-3, -2, -1))))
        return real_part_checked(values, scale, __name__).T

    def solve(self, state: PhaseSpaceState) -> FieldSolution:
        density = self.scatter(state)
        centre = (self.modes.modes // 2,) * 3
        measured = float(density.coefficients[centre].real) * self.modes.length**3
        density.coefficients[centre] = 0.0
        field = self.operator.apply(density)
        felt = FieldSpectrum(
            field.coefficients * self.multiplier[None, ...],
            field.modes,
            field.length,
            SpectrumKind.FIELD,
        )
        return FieldSolution(self.gather(felt, state), felt, measured)

    def _check_domain(self, state: PhaseSpaceState) -> None:
        if state.length != self.modes.length:
            raise ArgumentError(
                f"state domain L={state.length} does not match solver domain L={self.modes.length}"
            )


def pif_field_at_particles(state: PhaseSpaceState, cfg: PropagatorConfig) -> np.ndarray:
    return PifFieldSolver(cfg, state.length).solve(state).e_particles
