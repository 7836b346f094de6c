import numpy as np
import pytest

from parapif.diagnostics import fit_power_law
from parapif.errors import ArgumentError
from parapif.fields import PicFieldSolver, pic_field_at_particles, pif_field_at_particles
from parapif.fields.shapes import deposit_weights
from parapif.models import Domain, GridField, PhaseSpaceState, PropagatorConfig, Scheme, total_charge


def _deposit_matrix(state, nodes, order):
    h = state.length / nodes
    p = np.zeros((nodes**3, state.n_particles))
    for j, x in enumerate(state.x):
        for (a, b, c), w in deposit_weights(x, order, h, nodes):
            p[(a * nodes + b) * nodes + c, j] += w
    return p


def _dense_poisson(rho, length):
    """E on the grid from dense DFT matrices, symmetric modes, zero and Nyquist dropped."""
    n = rho.shape[0]
    ints = np.arange(-n // 2, n // 2)
    dft = np.exp(-2j * np.pi * np.outer(ints, np.arange(n)) / n)
    rho_hat = np.einsum("ai,bj,ck,ijk->abc", dft, dft, dft, rho)
    k = 2 * np.pi / length * ints
    kx, ky, kz = np.meshgrid(k, k, k, indexing="ij")
    k2 = kx**2 + ky**2 + kz**2
    keep = k2 > 0
    edge = ints == -n // 2
    keep &= ~(edge[:, None, None] | edge[None, :, None] | edge[None, None, :])
    inverse = np.where(keep, 1.0 / np.where(keep, k2, 1.0), 0.0)
    out = []
    for kd in (kx, ky, kz):
        e_hat = -1j * kd * inverse * rho_hat
        grid = np.einsum("ai,bj,ck,abc->ijk", dft.conj(), dft.conj(), dft.conj(), e_hat) / n**3
        out.append(grid.real)
    return np.stack(out)


@pytest.mark.parametrize("order", [1, 3])
def test_pic_field_matches_dense_operator(order, make_state):
    state = make_state(100, length=4.0, seed=12)
    nodes = 8
    cfg = PropagatorConfig(Scheme.PIC, nodes, 0.1, spline_order=order)
    field = PicFieldSolver(cfg, 4.0).solve(state).e_particles

    h = 4.0 / nodes
    p = _deposit_matrix(state, nodes, order)
    rho = (p @ (state.charge * state.w) / h**3).reshape((nodes,) * 3)
    rho -= rho.mean()
    e_grid = _dense_poisson(rho, 4.0).reshape(3, -1)
    expected = (e_grid @ p).T
    assert np.max(np.abs(field - expected)) <= 1e-11 * np.max(np.abs(expected))


def test_deposit_conserves_charge(make_state):
    state = make_state(80, seed=1)
    solver = PicFieldSolver(PropagatorConfig(Scheme.PIC, 8, 0.1, spline_order=2), state.length)
    grid = solver.deposit(state)
    assert float(grid.integral()) == pytest.approx(total_charge(state), rel=1e-13)
    assert solver.solve(state).measured_charge == pytest.approx(total_charge(state), rel=1e-13)


def test_pic_self_force_sums_to_zero(make_state):
    state = make_state(120, seed=5)
    e = PicFieldSolver(PropagatorConfig(Scheme.PIC, 8, 0.1), state.length).solve(state).e_particles
    net = np.sum(state.w[:, None] * e, axis=0)
    scale = np.sum(state.w[:, None] * np.abs(e), axis=0)
    assert np.all(np.abs(net) <= 1e-12 * scale)


def test_gather_of_constant_field_is_exact(make_state):
    state = make_state(30, seed=3)
    solver = PicFieldSolver(PropagatorConfig(Scheme.PIC, 4, 0.1, spline_order=2), state.length)
    grid = solver.deposit(state)
    grid.values[...] = 2.5
    np.testing.assert_allclose(solver.gather(grid, state), 2.5, rtol=1e-14)


def test_pic_rejects_foreign_domain(make_state):
    solver = PicFieldSolver(PropagatorConfig(Scheme.PIC, 4, 0.1), 3.0)
    with pytest.raises(ArgumentError):
        solver.solve(make_state(5, length=2.0))


def test_convenience_wrapper_matches_solver(make_state):
    state = make_state(25, seed=4)
    cfg = PropagatorConfig(Scheme.PIC, 8, 0.1, spline_order=2)
    np.testing.assert_array_equal(
        pic_field_at_particles(state, cfg), PicFieldSolver(cfg, state.length).solve(state).e_particles
    )


def test_deposit_and_gather_are_adjoint(make_state):
    state = make_state(60, seed=8)
    solver = PicFieldSolver(PropagatorConfig(Scheme.PIC, 8, 0.1, spline_order=2), state.length)
    rng = np.random.default_rng(8)
    g = rng.normal(size=(8, 8, 8))
    grid_side = float(np.sum(solver.deposit(state).values * g)) * solver.spacing**3
    particle_side = float(np.sum(state.charge * state.w * solver.gather(GridField(g, state.length), state)))
    assert grid_side == pytest.approx(particle_side, rel=1e-12)


def test_one_particle_per_cell_centre_feels_no_field():
    nodes, length = 8, 2 * np.pi
    centres = (np.arange(nodes) + 0.5) * length / nodes
    x = np.stack(np.meshgrid(centres, centres, centres, indexing="ij"), axis=-1).reshape(-1, 3)
    state = PhaseSpaceState(x, np.zeros_like(x), np.ones(len(x)), Domain(length))
    e = pic_field_at_particles(state, PropagatorConfig(Scheme.PIC, nodes, 0.1))
    assert np.max(np.abs(e)) <= 1e-12


def _modulated_lattice(length):
    """Lattice particles whose weights carry a single cosine along x."""
    along = (np.arange(64) + 0.5) * length / 64
    across = (np.arange(32) + 0.5) * length / 32
    x = np.stack(np.meshgrid(along, across, across, indexing="ij"), axis=-1).reshape(-1, 3)
    w = 1.0 + 0.5 * np.cos(2 * np.pi * x[:, 0] / length)
    return PhaseSpaceState(x, np.zeros_like(x), w, Domain(length))


@pytest.mark.slow
def test_pic_field_converges_to_pif_at_second_order():
    state = _modulated_lattice(2 * np.pi)
    spacing, errors = [], []
    for nodes in (8, 16, 32):
        exact = pif_field_at_particles(state, PropagatorConfig(Scheme.PIF_NUDFT, nodes, 0.1))
        approx = pic_field_at_particles(state, PropagatorConfig(Scheme.PIC, nodes, 0.1))
        spacing.append(state.length / nodes)
        errors.append(np.linalg.norm(approx - exact) / np.linalg.norm(exact))
    assert fit_power_law(spacing, errors) == pytest.approx(2.0, abs=0.4)
