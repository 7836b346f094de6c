"""Field solvers for the self-consistent electric field."""

from __future__ import annotations

from functools import lru_cache
from typing import Union

from ..models import PropagatorConfig
from .pic import PicFieldSolver, pic_field_at_particles
from .pif import FieldSolution, PifFieldSolver, PoissonOperator, pif_field_at_particles

FieldSolver = Union[PifFieldSolver, PicFieldSolver]


@lru_cache(maxsize=32)
def solver_for(cfg: PropagatorConfig, length: float) -> FieldSolver:
    """Shared solver for a propagator configuration; solvers hold no mutable state."""
    if cfg.scheme.is_spectral:
        return PifFieldSolver(cfg, length)
    return PicFieldSolver(cfg, length)


__all__ = [
    "FieldSolution",
    "FieldSolver",
    "PicFieldSolver",
    "PifFieldSolver",
    "PoissonOperator",
    "pic_field_at_particles",
    "pif_field_at_particles",
    "solver_for",
]
