"""Kick-drift-kick Boris integrator.

Each half kick is a complete Boris update over dt/2: half the electric
impulse, the magnetic rotation, the other half of the electric impulse. With
no magnetic field the rotation is skipped and the step is velocity Verlet.
"""

from __future__ import annotations

from typing import Callable, Optional, Tuple

import numpy as np

from .models import ExternalFields, PhaseSpaceState

FieldEvaluator = Callable[[PhaseSpaceState], np.ndarray]

_NO_FIELDS = ExternalFields()


def boris_kick(
    v: np.ndarray,
    electric: np.ndarray,
    magnetic: Optional[np.ndarray],
    q_over_m: float,
    tau: float,
) -> np.ndarray:
    """Advance velocities by tau under fields frozen at the current positions."""
    impulse = (0.5 * q_over_m * tau) * electric
    v_minus = v + impulse
    if magnetic is None:
        return v_minus + impulse
    t = (0.5 * q_over_m * tau) * magnetic
    s = 2.0 * t / (1.0 + np.dot(t, t))
    v_prime = v_minus + np.cross(v_minus, t)
    v_plus = v_minus + np.cross(v_prime, s)
    return v_plus + impulse


def _total_field(state: PhaseSpaceState, self_field: np.ndarray, ext: ExternalFields) -> np.ndarray:
    if ext.has_electric:
        return self_field + ext.electric(state.x)
    return self_field


def kick_drift_kick(
    state: PhaseSpaceState,
    field_eval: FieldEvaluator,
    ext: Optional[ExternalFields],
    dt: float,
    e_start: Optional[np.ndarray] = None,
) -> Tuple[PhaseSpaceState, np.ndarray]:
    """One step; returns the new state and the self-field at its positions.

    Passing the returned field back as ``e_start`` of the next step saves
    one field solve per step.
    """
    ext = ext or _NO_FIELDS
    magnetic = ext.magnetic_array if ext.has_magnetic else None
    half = 0.5 * dt
    if e_start is None:
        e_start = field_eval(state)
    v = boris_kick(state.v, _total_field(state, e_start, ext), magnetic, state.q_over_m, half)
    moved = state.with_phase(state.domain.wrap(state.x + dt * v), v)
    e_end = field_eval(moved)
    v = boris_kick(v, _total_field(moved, e_end, ext), magnetic, state.q_over_m, half)
    return moved.with_phase(moved.x, v), e_end


def step_kdk(
    state: PhaseSpaceState,
    field_eval: FieldEvaluator,
    ext: Optional[ExternalFields],
    dt: float,
) -> PhaseSpaceState:
    return kick_drift_kick(state, field_eval, ext, dt)[0]
