"""Particle-in-Cell field solve on the uniform periodic mesh."""

from __future__ import annotations

import logging

import numpy as np

from ..errors import ArgumentError, ConfigurationError
from ..models import GridField, PhaseSpaceState, PropagatorConfig, Scheme
from .pif import FieldSolution, PoissonOperator
from .shapes import stencil
from .transforms import ModeSet, fft_forward, fft_inverse

logger = logging.getLogger(__name__)


class PicFieldSolver:
    """B-spline deposit, spectral Poisson solve, gather with the same weights."""

    def __init__(self, cfg: PropagatorConfig, length: float) -> None:
        if cfg.scheme is not Scheme.PIC:
            raise ConfigurationError(f"{cfg.scheme.value} is not the PIC scheme", ["scheme"])
        if cfg.modes & (cfg.modes - 1):
            raise ConfigurationError(f"PIC grid size must be a power of two, got {cfg.modes}", ["modes"])
        self.cfg = cfg
        self.nodes = cfg.modes
        self.length = length
        self.spacing = length / cfg.modes
        # fft_forward returns spectra in the same centred order as ModeSet.
        self.operator = PoissonOperator(ModeSet(cfg.modes, length))

    def deposit(self, state: PhaseSpaceState) -> GridField:
        """Charge density q w / h^3 spread with the order-m weights; background not removed."""
        if state.length != self.length:
            raise ArgumentError(
                f"state domain L={state.length} does not match solver domain L={self.length}"
            )
        flat, weights = stencil(state.x, self.cfg.spline_order, self.spacing, self.nodes)
        charges = state.charge * state.w / self.spacing**3
        density = np.bincount(
            flat.ravel(),
            weights=(charges[:, None, None, None] * weights).ravel(),
            minlength=self.nodes**3,
        )
        return GridField(density.reshape((self.nodes,) * 3), self.length)

    def gather(self, grid: GridField, state: PhaseSpaceState) -> np.ndarray:
        """Interpolate a scalar or vector grid field to the particles."""
        flat, weights = stencil(state.x, self.cfg.spline_order, self.spacing, self.nodes)
        values = grid.values.reshape(grid.values.shape[:-3] + (-1,))
        gathered = np.sum(values[..., flat] * weights, axis=(-3, -2, -1))
        return gathered.T.copy() if gathered.ndim == 2 else gathered

    def solve(self, state: PhaseSpaceState) -> FieldSolution:
        density = self.deposit(state)
        measured = float(density.integral())
        density.values -= np.mean(density.values)
        field = self.operator.apply(fft_forward(density))
        grid = fft_inverse(field)
        return FieldSolution(self.gather(grid, state), field, measured)


def pic_field_at_particles(state: PhaseSpaceState, cfg: PropagatorConfig) -> np.ndarray:
    return PicFieldSolver(cfg, state.length).solve(state).e_particles
