"""Initial phase-space distributions for the three benchmark problems.

All draws use inverse transform sampling from counter-based Philox streams,
one stream per coordinate. Particle j always consumes the j-th number of
each stream, so growing N_p appends particles without changing the earlier
ones.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import asdict, dataclass, replace
from typing import Any, Dict, List, Optional

import numpy as np
from scipy.special import ndtri

from .errors import ArgumentError, NumericError
from .models import (
    ELECTRON_CHARGE,
    ELECTRON_MASS,
    Domain,
    ExternalFields,
    PhaseSpaceState,
    Vector3,
)

logger = logging.getLogger(__name__)

NEWTON_TOLERANCE = 1e-12
NEWTON_MAX_ITERATIONS = 50
_STREAMS = ("x", "y", "z", "vx", "vy", "vz", "beam")


class ScenarioKind(str, enum.Enum):
    LANDAU_DAMPING = "landau_damping"
    TWO_STREAM = "two_stream"
    PENNING_TRAP = "penning_trap"


_DEFAULTS: Dict[ScenarioKind, Dict[str, Any]] = {
    ScenarioKind.LANDAU_DAMPING: {
        "alpha": 0.05,
        "wavenumber": 0.5,
        "velocity_std": 1.0,
    },
    ScenarioKind.TWO_STREAM: {
        "alpha": 0.01,
        "wavenumber": 0.5,
        "sigma": 0.1,
        "beam_velocity": math.pi / 2.0,
    },
    ScenarioKind.PENNING_TRAP: {
        "length": 25.0,
        "total_charge": -1562.5,
        "position_std": (2.0, 1.0, 3.0),
        "velocity_std": 1.0,
        "magnetic_field": 5.0,
    },
}


@dataclass(frozen=True)
class Scenario:
    """One benchmark initial condition; unset parameters take the standard values."""

    kind: ScenarioKind
    alpha: Optional[float] = None
    wavenumber: Optional[float] = None
    sigma: Optional[float] = None
    beam_velocity: Optional[float] = None
    length: Optional[float] = None
    total_charge: Optional[float] = None
    position_std: Optional[Vector3] = None
    velocity_std: Optional[float] = None
    magnetic_field: Optional[float] = None
    seed: int = 0

    @classmethod
    def landau_damping(cls, seed: int = 0, **overrides: Any) -> "Scenario":
        return cls(ScenarioKind.LANDAU_DAMPING, seed=seed, **overrides).resolved()

    @classmethod
    def two_stream(cls, seed: int = 0, **overrides: Any) -> "Scenario":
        return cls(ScenarioKind.TWO_STREAM, seed=seed, **overrides).resolved()

    @classmethod
    def penning_trap(cls, seed: int = 0, **overrides: Any) -> "Scenario":
        return cls(ScenarioKind.PENNING_TRAP, seed=seed, **overrides).resolved()

    def resolved(self) -> "Scenario":
        """Copy with every parameter the kind uses filled in."""
        values = {k: v for k, v in _DEFAULTS[self.kind].items() if getattr(self, k) is None}
        out = replace(self, **values)
        if out.length is None:
            out = replace(out, length=2.0 * math.pi / out.wavenumber)
        if out.total_charge is None:
            out = replace(out, total_charge=-(out.length**3))
        if out.length <= 0:
            raise ArgumentError(f"scenario length must be positive, got {out.length}")
        return out

    @property
    def domain(self) -> Domain:
        return Domain(self.resolved().length)

    def external_fields(self) -> Optional[ExternalFields]:
        if self.kind is not ScenarioKind.PENNING_TRAP:
            return None
        full = self.resolved()
        return ExternalFields.penning(full.length, full.magnetic_field)

    def particle_count(self, particles_per_cell: int, modes: int) -> int:
        return int(particles_per_cell) * modes**3

    def as_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["kind"] = self.kind.value
        return {k: v for k, v in data.items() if v is not None}


def _uniforms(seed: int, n_particles: int) -> Dict[str, np.ndarray]:
    children = np.random.SeedSequence(seed).spawn(len(_STREAMS))
    return {
        name: np.random.Generator(np.random.Philox(child)).random(n_particles)
        for name, child in zip(_STREAMS, children)
    }


def _standard_normal(u: np.ndarray) -> np.ndarray:
    return ndtri(np.clip(u, np.finfo(np.float64).tiny, None))


def perturbed_cdf(x: np.ndarray, alpha: float, wavenumber: float, length: float) -> np.ndarray:
    """CDF of the density (1 + alpha cos(w x)) / L on [0, L)."""
    return x / length + alpha / (wavenumber * length) * np.sin(wavenumber * x)


def invert_perturbed_cdf(u: np.ndarray, alpha: float, wavenumber: float, length: float) -> np.ndarray:
    x = u * length
    for iteration in range(NEWTON_MAX_ITERATIONS + 1):
        residual = perturbed_cdf(x, alpha, wavenumber, length) - u
        pending = np.abs(residual) > NEWTON_TOLERANCE
        worst = float(np.max(np.abs(residual), initial=0.0))
        if not pending.any():
            logger.debug("CDF inversion converged after %d Newton steps", iteration)
            return x
        if iteration == NEWTON_MAX_ITERATIONS:
            break
        density = (1.0 + alpha * np.cos(wavenumber * x)) / length
        # Converged entries stay put: a particle never depends on the others.
        x = np.where(pending, x - residual / density, x)
    raise NumericError(
        f"CDF inversion did not converge in {NEWTON_MAX_ITERATIONS} Newton steps "
        f"(residual {worst:.3e})",
        module=__name__,
    )


def _wrapped_gaussian(u: np.ndarray, mean: float, std: float, domain: Domain) -> np.ndarray:
    return domain.wrap(mean + std * _standard_normal(u))


def sample(scenario: Scenario, n_particles: int) -> PhaseSpaceState:
    if n_particles < 1:
        raise ArgumentError(f"need at least one particle, got {n_particles}")
    s = scenario.resolved()
    domain = Domain(s.length)
    u = _uniforms(s.seed, n_particles)
    axes: List[np.ndarray] = []
    velocities: List[np.ndarray] = []

    if s.kind is ScenarioKind.LANDAU_DAMPING:
        for name in ("x", "y", "z"):
            axes.append(invert_perturbed_cdf(u[name], s.alpha, s.wavenumber, s.length))
        for name in ("vx", "vy", "vz"):
            velocities.append(s.velocity_std * _standard_normal(u[name]))
    elif s.kind is ScenarioKind.TWO_STREAM:
        axes.append(u["x"] * s.length)
        axes.append(u["y"] * s.length)
        axes.append(invert_perturbed_cdf(u["z"], s.alpha, s.wavenumber, s.length))
        for name in ("vx", "vy", "vz"):
            velocities.append(s.sigma * _standard_normal(u[name]))
        velocities[2] = velocities[2] + np.where(u["beam"] < 0.5, -s.beam_velocity, s.beam_velocity)
    else:
        centre = s.length / 2.0
        for name, std in zip(("x", "y", "z"), s.position_std):
            axes.append(_wrapped_gaussian(u[name], centre, std, domain))
        for name in ("vx", "vy", "vz"):
            velocities.append(s.velocity_std * _standard_normal(u[name]))

    x = domain.wrap(np.stack(axes, axis=1))
    v = np.stack(velocities, axis=1)
    w = np.full(n_particles, abs(s.total_charge) / n_particles)
    logger.debug("sampled %d particles for %s (seed %d)", n_particles, s.kind.value, s.seed)
    return PhaseSpaceState(
        x=x,
        v=v,
        w=w,
        domain=domain,
        q_over_m=ELECTRON_CHARGE / ELECTRON_MASS,
        charge=ELECTRON_CHARGE,
    )

