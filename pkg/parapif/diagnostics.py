"""Conserved quantities, error norms and slope fits used by the verification runs."""

from __future__ import annotations

import logging
from typing import Dict, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.signal import find_peaks

from .errors import ArgumentError, InsufficientDataError
from .fields import FieldSolution, solver_for
from .models import ConservedQuantities, PhaseSpaceState, PropagatorConfig, total_charge

logger = logging.getLogger(__name__)


class ErrorPair(NamedTuple):
    err_x: float
    err_v: float


def field_energy(field: FieldSolution) -> Tuple[float, float]:
    """(total, z-component) electrostatic energy of the field the particles feel."""
    spectrum = field.e_spectrum
    if spectrum.normalization == "domain":
        scale = 0.5 * spectrum.length**3
    else:
        scale = 0.5 * (spectrum.length / spectrum.modes) ** 3
    per_component = scale * np.sum(np.abs(spectrum.coefficients) ** 2, axis=(-3, -2, -1))
    return float(np.sum(per_component)), float(per_component[2])


def conserved_quantities(
    state: PhaseSpaceState,
    field: FieldSolution,
    cfg: PropagatorConfig,
) -> ConservedQuantities:
    """Energy, momentum and charge of a state given its most recent field solve."""
    kinetic = 0.5 * state.mass * float(np.sum(state.w * np.sum(state.v**2, axis=1)))
    energy, energy_z = field_energy(field)
    ext = cfg.external_fields
    potential = 0.0
    if ext is not None and ext.has_electric:
        potential = float(np.sum(state.charge * state.w * ext.potential(state.x)))
    momentum = state.mass * np.sum(state.w[:, None] * state.v, axis=0)
    q_total = total_charge(state)
    charge_error = abs(field.measured_charge - q_total) / abs(q_total) if q_total else 0.0
    return ConservedQuantities(
        kinetic=kinetic,
        field_energy=energy,
        field_energy_z=energy_z,
        external_potential=potential,
        momentum=momentum,
        charge_k0_error=charge_error,
    )


def measure(state: PhaseSpaceState, cfg: PropagatorConfig) -> ConservedQuantities:
    """Solve the field for ``state`` with ``cfg``'s solver and measure it."""
    return conserved_quantities(state, solver_for(cfg, state.length).solve(state), cfg)


def momentum_scale(state: PhaseSpaceState) -> float:
    """sum_j m w_j |v_j|, the natural size of the total momentum."""
    return state.mass * float(np.sum(state.w * np.linalg.norm(state.v, axis=1)))


def conservation_drift(history: Sequence[ConservedQuantities], scale: float) -> Dict[str, float]:
    """Worst relative energy drift, momentum drift (against ``scale``) and charge error."""
    if not history:
        raise InsufficientDataError("no conserved-quantity samples", module=__name__)
    e0 = history[0].total_energy
    p0 = history[0].momentum
    energy = max(abs(q.total_energy - e0) for q in history) / (abs(e0) or 1.0)
    momentum = max(float(np.linalg.norm(q.momentum - p0)) for q in history) / (scale or 1.0)
    return {
        "energy_drift": energy,
        "momentum_drift": momentum,
        "charge_error": max(q.charge_k0_error for q in history),
    }


def _ratio(numerator: float, denominator: float) -> float:
    return numerator / denominator if denominator > 0.0 else numerator


def relative_error(a: PhaseSpaceState, b: PhaseSpaceState) -> ErrorPair:
    """Relative L2 distance of ``a`` from ``b``; positions compared by minimum image."""
    if a.n_particles != b.n_particles:
        raise ArgumentError(
            f"cannot compare states with {a.n_particles} and {b.n_particles} particles"
        )
    dx = b.domain.displacement(a.x, b.x)
    return ErrorPair(
        _ratio(float(np.linalg.norm(dx)), float(np.linalg.norm(b.x))),
        _ratio(float(np.linalg.norm(a.v - b.v)), float(np.linalg.norm(b.v))),
    )


def fit_power_law(xs: Sequence[float], ys: Sequence[float], min_points: int = 3) -> float:
    """Least-squares exponent p of y = c x^p."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ArgumentError("power-law fit needs two equally long 1-d sequences")
    if x.size < min_points:
        raise ArgumentError(f"power-law fit needs at least {min_points} points, got {x.size}")
    if np.any(x <= 0) or np.any(y <= 0) or not np.all(np.isfinite(x * y)):
        raise ArgumentError("power-law fit needs finite positive values")
    slope, _ = np.polyfit(np.log(x), np.log(y), 1)
    return float(slope)


def damping_rate(
    times: Sequence[float],
    energies: Sequence[float],
    window: Optional[Tuple[float, float]] = None,
    envelope: bool = True,
) -> float:
    """Exponential rate of the energy envelope, fitted through its local maxima.

    For a field decaying or growing like exp(gamma t) the returned rate is
    2 gamma. Negative means damping. With ``envelope=False`` every sample in
    the window is fitted, for a mode that grows or decays without oscillating.
    """
    t = np.asarray(times, dtype=np.float64)
    e = np.asarray(energies, dtype=np.float64)
    if t.shape != e.shape or t.ndim != 1:
        raise ArgumentError("time and energy series must be equally long 1-d sequences")
    if window is not None:
        keep = (t >= window[0]) & (t <= window[1])
        t, e = t[keep], e[keep]
    if not envelope:
        positive = e > 0.0
        if np.count_nonzero(positive) < 2:
            raise InsufficientDataError("need at least 2 positive energy samples in the window", module=__name__)
        slope, _ = np.polyfit(t[positive], np.log(e[positive]), 1)
        return float(slope)
    peaks, _ = find_peaks(e)
    peaks = peaks[e[peaks] > 0.0]
    if peaks.size < 2:
        raise InsufficientDataError(
            f"energy envelope has {peaks.size} peak(s) in the window, need at least 2",
            module=__name__,
        )
    slope, _ = np.polyfit(t[peaks], np.log(e[peaks]), 1)
    logger.debug("envelope fit over %d peaks: rate %.4f", peaks.size, slope)
    return float(slope)
