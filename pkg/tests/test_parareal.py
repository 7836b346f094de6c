import time

import numpy as np
import pytest

from parapif.errors import ConfigurationError, NumericError, PropagationError
from parapif.initializers import Scenario, sample
from parapif.models import PropagatorConfig, Scheme
from parapif.parareal import (
    TimePartition,
    WindowSolver,
    check_convergence,
    correct,
    executor_for,
    parareal_iteration,
    run_parareal,
    serial_boundaries,
)
from parapif.parareal import engine
from parapif.parareal.workers import THREADS_ENV, resolve_threads

FINE = PropagatorConfig(Scheme.PIF_NUDFT, 4, 0.05)
COARSE = PropagatorConfig(Scheme.PIC, 4, 0.1)


@pytest.fixture()
def initial():
    return sample(Scenario.landau_damping(seed=5, alpha=0.2), 128)


@pytest.fixture()
def partition():
    return TimePartition.for_propagators(0.0, 0.8, 4, FINE, COARSE)


def test_partition_geometry(partition):
    assert partition.interval == pytest.approx(0.2)
    assert partition.fine_steps == 4
    assert partition.coarse_steps == 2
    assert partition.boundary(4) == 0.8
    windows = partition.windows(2)
    assert [w.subdomains for w in windows] == [2, 2]
    assert windows[1].t_start == pytest.approx(0.4)


def test_partition_rejects_non_dividing_steps():
    with pytest.raises(ConfigurationError) as info:
        TimePartition(0.0, 1.0, 8, 0.025, 0.1)
    assert "coarse.dt" in info.value.keys
    with pytest.raises(ConfigurationError) as info:
        TimePartition(0.0, 0.8, 4, 0.05, 0.1).windows(3)
    assert info.value.keys == ("time.blocks",)


def test_correction_wraps_positions(initial):
    fine = initial.with_phase(np.full_like(initial.x, initial.length - 0.1), initial.v)
    old = initial.with_phase(np.zeros_like(initial.x), initial.v)
    new = initial.with_phase(np.full_like(initial.x, 0.3), initial.v + 1.0)
    out = correct(fine, new, old)
    np.testing.assert_allclose(out.x, 0.2)
    np.testing.assert_allclose(out.v, initial.v + 1.0)


def test_subdomain_n_is_exact_after_n_iterations(initial, partition):
    reference = serial_boundaries(FINE, initial, partition)
    solver = WindowSolver(0, partition, FINE, COARSE, 0.0)
    iterate = solver.seed(initial)
    for k in range(1, 5):
        iterate = parareal_iteration(iterate, FINE, COARSE, partition)
        for n in range(1, k + 1):
            np.testing.assert_allclose(iterate.states[n].x, reference[n].x, rtol=1e-12, atol=1e-12)
            np.testing.assert_allclose(iterate.states[n].v, reference[n].v, rtol=1e-12, atol=1e-12)
    assert iterate.all_converged


def test_identical_propagators_converge_in_one_iteration(initial):
    partition = TimePartition.for_propagators(0.0, 0.8, 4, FINE, FINE)
    report = run_parareal(initial, FINE, FINE, partition, 0.0, execution="sequential")
    assert report.iterations == [1]
    assert report.converged
    assert report.fine_solves == 4


def test_reference_errors_vanish_on_the_diagonal(initial, partition):
    reference = serial_boundaries(FINE, initial, partition)
    report = run_parareal(initial, FINE, COARSE, partition, 0.0, execution="sequential", reference=reference)
    for r in report.reference_errors:
        if r.iteration >= r.subdomain:
            assert r.err_x <= 1e-12 and r.err_v <= 1e-12
    assert report.iterations == [4]
    # converged subdomains take no further fine solves
    assert report.fine_solves == 4 + 3 + 2 + 1


def test_pipelined_execution_is_bitwise_sequential(initial, partition):
    runs = [
        run_parareal(initial, FINE, COARSE, partition, 1e-9, execution=mode, threads=3)
        for mode in ("sequential", "pipelined")
    ]
    np.testing.assert_array_equal(runs[0].final_state.x, runs[1].final_state.x)
    np.testing.assert_array_equal(runs[0].final_state.v, runs[1].final_state.v)
    key = lambda r: (r.subdomain, r.iteration, r.err_x, r.err_v)  # noqa: E731
    assert sorted(map(key, runs[0].errors)) == sorted(map(key, runs[1].errors))
    assert runs[0].fine_solves == runs[1].fine_solves


def test_multi_block_numbers_subdomains_globally(initial, partition):
    report = run_parareal(initial, FINE, COARSE, partition, 0.0, blocks=2, execution="sequential")
    assert len(report.windows) == 2
    assert {r.subdomain for r in report.errors if r.block == 1} == {3, 4}
    assert report.iterations == [2, 2]
    phases = {t.phase for t in report.timings}
    assert {"coarse_sweep", "fine", "window", "total"} <= phases


def test_energy_tracking_records_each_fine_step(initial, partition):
    report = run_parareal(initial, FINE, COARSE, partition, 0.0, execution="sequential", track_energy=True)
    first = [r for r in report.energy if r.iteration == 1]
    assert len(first) == partition.fine_steps * 4 + 1
    times = [r.time for r in first]
    assert times == sorted(times)


def test_conservation_tracking_covers_iteration_zero(initial, partition):
    report = run_parareal(initial, FINE, COARSE, partition, 0.0, execution="sequential", track_conservation=True)
    assert {c.iteration for c in report.conservation} == {0, 1, 2, 3, 4}


def test_failure_is_wrapped_with_its_subdomain(initial, partition, monkeypatch):
    real = engine.propagate

    def failing(cfg, state, t0, t1, observer=None):
        if cfg is FINE and abs(t0 - partition.boundary(2)) < 1e-12:
            raise NumericError("boom", module="test")
        return real(cfg, state, t0, t1, observer)

    monkeypatch.setattr(engine, "propagate", failing)
    with pytest.raises(PropagationError) as info:
        run_parareal(initial, FINE, COARSE, partition, 0.0, execution="pipelined", threads=2)
    assert info.value.subdomain == 3
    assert info.value.block == 0
    assert info.value.details()["propagator"].startswith("fine")


def test_lowest_failing_subdomain_is_reported_even_when_it_fails_last(initial, partition, monkeypatch):
    real = engine.propagate
    calls = {"second": 0}

    def failing(cfg, state, t0, t1, observer=None):
        if cfg is FINE and abs(t0 - partition.boundary(1)) < 1e-12:
            calls["second"] += 1
            if calls["second"] == 2:
                time.sleep(0.3)
                raise NumericError("late", module="test")
        if cfg is FINE and abs(t0 - partition.boundary(2)) < 1e-12:
            raise NumericError("early", module="test")
        return real(cfg, state, t0, t1, observer)

    monkeypatch.setattr(engine, "propagate", failing)
    with pytest.raises(PropagationError) as info:
        run_parareal(initial, FINE, COARSE, partition, 0.0, execution="pipelined", threads=4)
    assert info.value.subdomain == 2
    assert "late" in str(info.value)


def test_configuration_errors_inside_a_solve_are_not_wrapped(initial, partition, monkeypatch):
    def misconfigured(cfg, state, t0, t1, observer=None):
        raise ConfigurationError("bad tolerance", ["tolerance"])

    monkeypatch.setattr(engine, "propagate", misconfigured)
    with pytest.raises(ConfigurationError) as info:
        run_parareal(initial, FINE, COARSE, partition, 0.0, execution="sequential")
    assert not isinstance(info.value, PropagationError)
    assert info.value.keys == ("tolerance",)


def test_check_convergence_is_chained(initial, partition):
    solver = WindowSolver(0, partition, FINE, COARSE, 0.0)
    seed = solver.seed(initial)
    assert check_convergence(seed, seed, 0.0) == [True] * 5
    nxt = parareal_iteration(seed, FINE, COARSE, partition)
    flags = check_convergence(seed, nxt, 0.0)
    assert flags[1] is True
    assert flags[2:] == [False, False, False]


def test_pairing_is_checked(initial, partition):
    loose = PropagatorConfig(Scheme.PIF_NUFFT, 4, 0.05, tolerance=1e-3)
    tight = PropagatorConfig(Scheme.PIF_NUFFT, 4, 0.1, tolerance=1e-6)
    with pytest.raises(ConfigurationError):
        run_parareal(initial, loose, tight, partition, 0.0)
    with pytest.raises(ConfigurationError):
        run_parareal(initial, FINE, COARSE, partition, -1.0)


def test_thread_count_resolution(monkeypatch):
    monkeypatch.delenv(THREADS_ENV, raising=False)
    assert resolve_threads(3, 8) == 3
    assert 1 <= resolve_threads(None, 2) <= 2
    monkeypatch.setenv(THREADS_ENV, "5")
    assert resolve_threads(3, 8) == 5
    monkeypatch.setenv(THREADS_ENV, "zero")
    with pytest.raises(ConfigurationError):
        resolve_threads(None, 8)


def test_unknown_execution_mode():
    with pytest.raises(ConfigurationError) as info:
        executor_for("mpi")
    assert info.value.keys == ("execution",)
