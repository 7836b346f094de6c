import numpy as np
import pytest

from parapif.errors import ArgumentError, ConfigurationError
from parapif.models import (
    ConservedQuantities,
    Domain,
    ExternalFields,
    FieldSpectrum,
    PhaseSpaceState,
    PropagatorConfig,
    Scheme,
    SpectrumKind,
    minimum_image,
    total_charge,
    wrap_periodic,
)


def test_wrap_periodic_maps_into_half_open_box():
    x = np.array([-1e-18, -0.5, 0.0, 2.0, 4.5])
    out = wrap_periodic(x, 2.0)
    assert np.all(out >= 0.0)
    assert np.all(out < 2.0)
    np.testing.assert_allclose(out[1:], [1.5, 0.0, 0.0, 0.5])


def test_minimum_image_picks_shortest_displacement():
    d = minimum_image(np.array([0.9, -0.9, 0.4]), 1.0)
    np.testing.assert_allclose(d, [-0.1, 0.1, 0.4])


def test_state_rejects_mismatched_shapes():
    with pytest.raises(ArgumentError):
        PhaseSpaceState(np.zeros((3, 3)), np.zeros((2, 3)), np.ones(3), Domain(1.0))
    with pytest.raises(ArgumentError):
        PhaseSpaceState(np.zeros((3, 3)), np.zeros((3, 3)), np.ones(4), Domain(1.0))


def test_state_weights_are_read_only_and_shared():
    state = PhaseSpaceState(np.zeros((2, 3)), np.zeros((2, 3)), np.ones(2), Domain(1.0))
    with pytest.raises(ValueError):
        state.w[0] = 2.0
    moved = state.with_phase(state.x + 0.1, state.v)
    assert moved.w is state.w


def test_total_charge_uses_particle_charge():
    state = PhaseSpaceState(np.zeros((4, 3)), np.zeros((4, 3)), np.full(4, 0.5), Domain(1.0))
    assert total_charge(state) == pytest.approx(-2.0)
    assert total_charge(state, q_e=1.0) == pytest.approx(2.0)


def test_field_spectrum_shape_is_validated():
    with pytest.raises(ArgumentError):
        FieldSpectrum(np.zeros((4, 4, 4)), 4, 1.0, SpectrumKind.FIELD)
    spectrum = FieldSpectrum(np.zeros((4, 4, 4), dtype=complex), 4, 1.0)
    spectrum.coefficients[2 + 1, 2 - 2, 2] = 3.0 + 1.0j
    assert spectrum.coefficient((1, -2, 0)) == 3.0 + 1.0j


def test_spectrum_rows_follow_row_major_mode_order():
    spectrum = FieldSpectrum(np.arange(8, dtype=complex).reshape(2, 2, 2), 2, 1.0)
    rows = list(spectrum.rows())
    assert rows[0][:3] == (-1, -1, -1)
    assert rows[1][:3] == (-1, -1, 0)
    assert rows[-1] == (0, 0, 0, 7.0, 0.0)


def test_propagator_config_validation():
    with pytest.raises(ConfigurationError) as info:
        PropagatorConfig(Scheme.PIF_NUFFT, 8, 0.1)
    assert info.value.keys == ("tolerance",)
    with pytest.raises(ConfigurationError):
        PropagatorConfig(Scheme.PIC, 12, 0.1)
    with pytest.raises(ConfigurationError):
        PropagatorConfig(Scheme.PIF_NUDFT, 7, 0.1)


def test_steps_between_requires_whole_steps():
    cfg = PropagatorConfig(Scheme.PIF_NUDFT, 8, 0.05)
    assert cfg.steps_between(0.0, 1.0) == 20
    with pytest.raises(ConfigurationError) as info:
        cfg.steps_between(0.0, 1.01)
    assert info.value.keys == ("dt",)


def test_penning_field_points_back_to_the_centre():
    ext = ExternalFields.penning(25.0)
    centre = np.full((1, 3), 12.5)
    np.testing.assert_allclose(ext.electric(centre), 0.0, atol=1e-12)
    offset = centre + np.array([[0.0, 0.0, 1.0]])
    assert ext.electric(offset)[0, 2] == pytest.approx(30.0 / 25.0)
    assert ext.has_magnetic and ext.has_electric


def test_external_potential_gradient_matches_field():
    ext = ExternalFields.penning(25.0)
    x = np.array([[10.0, 13.0, 11.0]])
    step = 1e-5
    grad = np.zeros(3)
    for d in range(3):
        e = np.zeros((1, 3))
        e[0, d] = step
        grad[d] = (ext.potential(x + e)[0] - ext.potential(x - e)[0]) / (2 * step)
    np.testing.assert_allclose(-grad, ext.electric(x)[0], rtol=1e-6)


def test_conserved_quantities_row_layout():
    q = ConservedQuantities(1.0, 2.0, 0.5, 3.0, np.array([0.1, 0.2, 0.3]), 1e-14)
    assert q.total_energy == pytest.approx(6.0)
    assert q.as_row() == [6.0, 0.1, 0.2, 0.3, 1e-14]
