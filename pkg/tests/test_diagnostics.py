import numpy as np
import pytest

from parapif.diagnostics import (
    conservation_drift,
    conserved_quantities,
    damping_rate,
    field_energy,
    fit_power_law,
    measure,
    momentum_scale,
    relative_error,
)
from parapif.errors import ArgumentError, InsufficientDataError
from parapif.fields import FieldSolution, PifFieldSolver
from parapif.models import (
    ConservedQuantities,
    ExternalFields,
    FieldSpectrum,
    PropagatorConfig,
    Scheme,
    SpectrumKind,
)


def _solution(normalization, length=2.0, modes=4, value=1.0):
    coefficients = np.zeros((3, modes, modes, modes), dtype=complex)
    coefficients[2, 1, 2, 3] = value
    spectrum = FieldSpectrum(coefficients, modes, length, SpectrumKind.FIELD, normalization)
    return FieldSolution(np.zeros((1, 3)), spectrum, -1.0)


def test_field_energy_normalizations():
    total, z = field_energy(_solution("domain", value=1.0 + 1.0j))
    assert total == pytest.approx(0.5 * 8.0 * 2.0)
    assert z == total
    total, z = field_energy(_solution("unitary"))
    assert total == pytest.approx(0.5 * (2.0 / 4) ** 3)


def test_pif_field_energy_is_translation_invariant(make_state):
    state = make_state(60, seed=9)
    cfg = PropagatorConfig(Scheme.PIF_NUDFT, 4, 0.1)
    solver = PifFieldSolver(cfg, state.length)
    shifted = state.with_phase(state.domain.wrap(state.x + np.array([0.7, -1.3, 2.1])), state.v)
    a = field_energy(solver.solve(state))
    b = field_energy(solver.solve(shifted))
    np.testing.assert_allclose(a, b, rtol=1e-12)
    assert 0.0 < a[1] < a[0]


def test_conserved_quantities_of_a_known_state(make_state):
    state = make_state(40, seed=2)
    cfg = PropagatorConfig(Scheme.PIF_NUDFT, 4, 0.1)
    q = measure(state, cfg)
    assert q.kinetic == pytest.approx(0.5 * np.sum(state.w * np.sum(state.v**2, axis=1)))
    np.testing.assert_allclose(q.momentum, np.sum(state.w[:, None] * state.v, axis=0))
    assert q.external_potential == 0.0
    assert q.charge_k0_error < 1e-13
    assert q.total_energy == pytest.approx(q.kinetic + q.field_energy)


def test_external_potential_enters_the_energy(make_state):
    state = make_state(10, seed=3)
    ext = ExternalFields(electric_offset=(0.0, 0.0, 2.0))
    cfg = PropagatorConfig(Scheme.PIF_NUDFT, 4, 0.1, external_fields=ext)
    solution = PifFieldSolver(cfg, state.length).solve(state)
    q = conserved_quantities(state, solution, cfg)
    # phi = -2 z, charge -1
    assert q.external_potential == pytest.approx(np.sum(state.w * 2.0 * state.x[:, 2]))


def test_conservation_drift():
    history = [
        ConservedQuantities(1.0, 1.0, 0.5, 0.0, np.zeros(3), 0.0),
        ConservedQuantities(1.1, 1.0, 0.5, 0.0, np.array([0.0, 0.3, 0.4]), 1e-14),
        ConservedQuantities(0.9, 1.05, 0.5, 0.0, np.zeros(3), 0.0),
    ]
    drift = conservation_drift(history, scale=10.0)
    assert drift["energy_drift"] == pytest.approx(0.05)
    assert drift["momentum_drift"] == pytest.approx(0.05)
    assert drift["charge_error"] == 1e-14
    with pytest.raises(InsufficientDataError):
        conservation_drift([], 1.0)


def test_momentum_scale(make_state):
    state = make_state(20, seed=4)
    assert momentum_scale(state) == pytest.approx(np.sum(state.w * np.linalg.norm(state.v, axis=1)))


def test_relative_error_uses_minimum_image(make_state):
    a = make_state(30, seed=5)
    b = a.with_phase(a.domain.wrap(a.x + a.length - 1e-3), a.v * 1.01)
    err = relative_error(b, a)
    assert err.err_x == pytest.approx(1e-3 * np.sqrt(90) / np.linalg.norm(a.x), rel=1e-6)
    assert err.err_v == pytest.approx(0.01)
    assert relative_error(a, a) == (0.0, 0.0)


def test_relative_error_with_zero_reference(make_state):
    a = make_state(5, seed=6)
    still = a.with_phase(a.x, np.zeros_like(a.v))
    moving = a.with_phase(a.x, np.full_like(a.v, 0.5))
    # absolute error when the reference vanishes
    assert relative_error(moving, still).err_v == pytest.approx(0.5 * np.sqrt(15))
    with pytest.raises(ArgumentError):
        relative_error(a, make_state(6))


def test_power_law_fit():
    xs = [0.1, 0.2, 0.4, 0.8]
    assert fit_power_law(xs, [3.0 * x**2.5 for x in xs]) == pytest.approx(2.5)
    assert fit_power_law(xs[:2], [1.0, 2.0], min_points=2) == pytest.approx(1.0)
    with pytest.raises(ArgumentError):
        fit_power_law(xs[:2], [1.0, 2.0])
    with pytest.raises(ArgumentError):
        fit_power_law(xs, [1.0, 0.0, 2.0, 3.0])


def test_damping_rate_of_a_decaying_oscillation():
    t = np.linspace(0.0, 20.0, 4001)
    e = np.exp(-0.6 * t) * np.sin(2.0 * t) ** 2
    assert damping_rate(t, e) == pytest.approx(-0.6, abs=1e-3)
    assert damping_rate(t, e, window=(5.0, 15.0)) == pytest.approx(-0.6, abs=1e-3)


def test_damping_rate_needs_two_peaks():
    t = np.linspace(0.0, 5.0, 200)
    with pytest.raises(InsufficientDataError):
        damping_rate(t, np.exp(-t))


def test_growth_rate_without_oscillation():
    t = np.linspace(0.0, 10.0, 201)
    e = 1e-6 * np.exp(0.7 * t)
    assert damping_rate(t, e, envelope=False) == pytest.approx(0.7, abs=1e-9)
    assert damping_rate(t, e, window=(2.0, 6.0), envelope=False) == pytest.approx(0.7, abs=1e-9)
    with pytest.raises(InsufficientDataError):
        damping_rate(t, e, window=(2.0, 2.01), envelope=False)
