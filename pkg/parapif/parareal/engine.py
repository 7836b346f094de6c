"""Parareal over particle states.

Iteration 0 is a serial coarse sweep. Afterwards subdomain n (covering
[T_{n-1}, T_n]) is updated as

    U_n^k = F(U_{n-1}^{k-1}) + G(U_{n-1}^k) - G(U_{n-1}^{k-1}),

positions through minimum-image differences and a final wrap, velocities
with plain arithmetic. A subdomain is converged once its coarse increment
G(U_{n-1}^k) - G(U_{n-1}^{k-1}) is below the stopping tolerance and its
predecessor is converged; converged subdomains take no further fine solves.
"""

from __future__ import annotations

import logging
import threading
import time
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

from ..diagnostics import ErrorPair, conserved_quantities, measure, relative_error
from ..errors import ArgumentError, ConfigurationError, PropagationError
from ..fields import FieldSolution, solver_for
from ..initializers import Scenario, sample
from ..models import ConservedQuantities, PhaseSpaceState, PropagatorConfig
from ..pusher import kick_drift_kick

logger = logging.getLogger(__name__)

StepObserver = Callable[[int, float, PhaseSpaceState, FieldSolution], None]


@dataclass(frozen=True)
class TimePartition:
    """[t_start, t_end] split into equal subdomains, each a whole number of fine and coarse steps."""

    t_start: float
    t_end: float
    subdomains: int
    fine_dt: float
    coarse_dt: float

    def __post_init__(self) -> None:
        if self.subdomains < 1:
            raise ConfigurationError(
                f"need at least one time subdomain, got {self.subdomains}", ["time.subdomains"]
            )
        if not self.t_end > self.t_start:
            raise ConfigurationError(
                f"end time {self.t_end} must exceed start time {self.t_start}",
                ["time.t_start", "time.t_end"],
            )
        if not self.fine_dt > 0 or not self.coarse_dt > 0:
            raise ConfigurationError("time steps must be positive", ["fine.dt", "coarse.dt"])
        if self.coarse_dt < self.fine_dt * (1.0 - 1e-12):
            raise ConfigurationError(
                f"coarse step {self.coarse_dt} is smaller than fine step {self.fine_dt}",
                ["coarse.dt", "fine.dt"],
            )
        self._whole_steps(self.fine_dt, "fine.dt")
        self._whole_steps(self.coarse_dt, "coarse.dt")

    @classmethod
    def for_propagators(
        cls,
        t_start: float,
        t_end: float,
        subdomains: int,
        fine: PropagatorConfig,
        coarse: PropagatorConfig,
    ) -> "TimePartition":
        return cls(t_start, t_end, subdomains, fine.dt, coarse.dt)

    @property
    def interval(self) -> float:
        return (self.t_end - self.t_start) / self.subdomains

    @property
    def fine_steps(self) -> int:
        return self._whole_steps(self.fine_dt, "fine.dt")

    @property
    def coarse_steps(self) -> int:
        return self._whole_steps(self.coarse_dt, "coarse.dt")

    def boundary(self, n: int) -> float:
        if n == self.subdomains:
            return self.t_end
        return self.t_start + n * self.interval

    def windows(self, blocks: int) -> List["TimePartition"]:
        """Split into ``blocks`` consecutive partitions of equal subdomain count."""
        if blocks < 1 or self.subdomains % blocks:
            raise ConfigurationError(
                f"{blocks} blocks do not divide {self.subdomains} subdomains", ["time.blocks"]
            )
        per_block = self.subdomains // blocks
        return [
            TimePartition(
                self.boundary(b * per_block),
                self.boundary((b + 1) * per_block),
                per_block,
                self.fine_dt,
                self.coarse_dt,
            )
            for b in range(blocks)
        ]

    def _whole_steps(self, dt: float, key: str) -> int:
        ratio = self.interval / dt
        steps = int(round(ratio))
        if steps < 1 or abs(ratio - steps) > 1e-9 * ratio:
            raise ConfigurationError(
                f"{key}={dt} does not divide the subdomain length {self.interval:g}", [key]
            )
        return steps


class _TrackedField:
    """Field evaluator that remembers the last full solution."""

    def __init__(self, cfg: PropagatorConfig, length: float) -> None:
        self.solver = solver_for(cfg, length)
        self.latest: Optional[FieldSolution] = None

    def __call__(self, state: PhaseSpaceState):
        self.latest = self.solver.solve(state)
        return self.latest.e_particles


def propagate(
    cfg: PropagatorConfig,
    state: PhaseSpaceState,
    t0: float,
    t1: float,
    observer: Optional[StepObserver] = None,
) -> PhaseSpaceState:
    """Integrate from t0 to t1 with cfg's field solver, one field solve per step.

    ``observer`` sees every integer step, including the starting one.
    """
    steps = cfg.steps_between(t0, t1)
    if steps == 0 and observer is None:
        return state
    field_eval = _TrackedField(cfg, state.length)
    e = field_eval(state)
    if observer is not None:
        observer(0, t0, state, field_eval.latest)
    for i in range(1, steps + 1):
        state, e = kick_drift_kick(state, field_eval, cfg.external_fields, cfg.dt, e)
        if observer is not None:
            observer(i, t0 + i * cfg.dt, state, field_eval.latest)
    return state


def serial_boundaries(
    cfg: PropagatorConfig,
    state: PhaseSpaceState,
    partition: TimePartition,
    observer: Optional[StepObserver] = None,
) -> List[PhaseSpaceState]:
    """States of one serial run at every subdomain boundary T_0 .. T_N."""
    out = [state]
    for n in range(1, partition.subdomains + 1):
        start = observer if n == 1 else _skip_first(observer)
        out.append(propagate(cfg, out[-1], partition.boundary(n - 1), partition.boundary(n), start))
    return out


def _skip_first(observer: Optional[StepObserver]) -> Optional[StepObserver]:
    if observer is None:
        return None

    def inner(step: int, t: float, state: PhaseSpaceState, field: FieldSolution) -> None:
        if step:
            observer(step, t, state, field)

    return inner


def correct(
    fine: PhaseSpaceState,
    coarse_new: PhaseSpaceState,
    coarse_old: PhaseSpaceState,
) -> PhaseSpaceState:
    shift = fine.domain.displacement(coarse_new.x, coarse_old.x)
    return fine.with_phase(
        fine.domain.wrap(fine.x + shift),
        fine.v + (coarse_new.v - coarse_old.v),
    )


def increment_converged(increment: ErrorPair, tolerance: float) -> bool:
    return increment.err_x <= tolerance and increment.err_v <= tolerance


@dataclass
class PararealIterate:
    """Boundary states after one iteration.

    Lists are indexed by boundary n = 0..N; ``coarse[n]`` is G(U_{n-1}^k) and
    ``coarse[0]`` is unused. ``converged[0]`` is always True.
    """

    iteration: int
    states: List[PhaseSpaceState]
    coarse: List[Optional[PhaseSpaceState]]
    converged: List[bool]

    @property
    def subdomains(self) -> int:
        return len(self.states) - 1

    @property
    def all_converged(self) -> bool:
        return all(self.converged)

    @property
    def final_state(self) -> PhaseSpaceState:
        return self.states[-1]


def check_convergence(
    prev: PararealIterate,
    current: PararealIterate,
    tolerance: float,
) -> List[bool]:
    """Chained per-subdomain convergence flags, index 0 being the initial condition."""
    if prev.subdomains != current.subdomains:
        raise ConfigurationError("iterates belong to different partitions", ["time.subdomains"])
    flags = [True]
    for n in range(1, current.subdomains + 1):
        increment = relative_error(prev.coarse[n], current.coarse[n])
        flags.append(flags[n - 1] and increment_converged(increment, tolerance))
    return flags


@dataclass
class EnergyRecord:
    source: str
    iteration: int
    time: float
    field_energy: float
    field_energy_z: float
    kinetic: float
    total: float


@dataclass
class FineResult:
    state: PhaseSpaceState
    energy: List[EnergyRecord] = field(default_factory=list)


@dataclass
class SubdomainUpdate:
    subdomain: int
    iteration: int
    state: PhaseSpaceState
    coarse: PhaseSpaceState
    increment: ErrorPair
    converged: bool
    energy: List[EnergyRecord] = field(default_factory=list)


@dataclass
class WindowOutcome:
    iterate: PararealIterate
    updates: List[SubdomainUpdate]


class WindowSolver:
    """Fine/coarse solves and the correction for one window of subdomains.

    The executors in ``workers`` decide the order in which these are called;
    the arithmetic lives here, so every execution order gives the same bits.
    """

    def __init__(
        self,
        block: int,
        partition: TimePartition,
        fine: PropagatorConfig,
        coarse: PropagatorConfig,
        tolerance: float,
        track_energy: bool = False,
    ) -> None:
        self.block = block
        self.partition = partition
        self.fine_cfg = fine
        self.coarse_cfg = coarse
        self.tolerance = tolerance
        self.track_energy = track_energy
        self.fine_solves = 0
        self.coarse_solves = 0
        self.seconds: Dict[str, float] = defaultdict(float)
        self._lock = threading.Lock()

    def _account(self, kind: str, started: float) -> None:
        elapsed = time.perf_counter() - started
        with self._lock:
            self.seconds[kind] += elapsed
            if kind == "fine":
                self.fine_solves += 1
            else:
                self.coarse_solves += 1

    def _wrap(self, exc: Exception, n: int, kind: str) -> PropagationError:
        label = self.fine_cfg.label if kind == "fine" else self.coarse_cfg.label
        logger.error("%s solve failed in block %d, subdomain %d: %s", kind, self.block, n, exc)
        return PropagationError(str(exc), self.block, n, f"{kind} {label}")

    def coarse(self, n: int, start: PhaseSpaceState) -> PhaseSpaceState:
        """G over subdomain n from ``start`` = U_{n-1}."""
        started = time.perf_counter()
        try:
            out = propagate(
                self.coarse_cfg, start, self.partition.boundary(n - 1), self.partition.boundary(n)
            )
        except (PropagationError, ConfigurationError, ArgumentError):
            raise
        except Exception as exc:
            raise self._wrap(exc, n, "coarse") from exc
        self._account("coarse", started)
        return out

    def fine(self, n: int, iteration: int, start: PhaseSpaceState) -> FineResult:
        """F over subdomain n, observing every step when energy tracking is on."""
        started = time.perf_counter()
        records: List[EnergyRecord] = []
        observer = self._energy_observer(iteration, records) if self.track_energy else None
        if observer is not None and n > 1:
            observer = _skip_first(observer)
        try:
            out = propagate(
                self.fine_cfg,
                start,
                self.partition.boundary(n - 1),
                self.partition.boundary(n),
                observer,
            )
        except (PropagationError, ConfigurationError, ArgumentError):
            raise
        except Exception as exc:
            raise self._wrap(exc, n, "fine") from exc
        self._account("fine", started)
        return FineResult(out, records)

    def _energy_observer(self, iteration: int, records: List[EnergyRecord]) -> StepObserver:
        cfg = self.fine_cfg

        def observe(step: int, t: float, state: PhaseSpaceState, solution: FieldSolution) -> None:
            q = conserved_quantities(state, solution, cfg)
            records.append(
                EnergyRecord(
                    "parareal",
                    iteration,
                    t,
                    q.field_energy,
                    q.field_energy_z,
                    q.kinetic,
                    q.total_energy,
                )
            )

        return observe

    def coarse_update(
        self,
        n: int,
        start: PhaseSpaceState,
        previous: PhaseSpaceState,
        start_unchanged: bool,
    ) -> PhaseSpaceState:
        """G(U_{n-1}^k); reuses G(U_{n-1}^{k-1}) when U_{n-1} did not move."""
        if start_unchanged:
            return previous
        return self.coarse(n, start)

    def combine(
        self,
        n: int,
        iteration: int,
        fine: FineResult,
        coarse_new: PhaseSpaceState,
        coarse_old: PhaseSpaceState,
        predecessor_converged: bool,
    ) -> SubdomainUpdate:
        increment = relative_error(coarse_old, coarse_new)
        converged = predecessor_converged and increment_converged(increment, self.tolerance)
        logger.debug(
            "block %d subdomain %d iteration %d: err_x=%.3e err_v=%.3e converged=%s",
            self.block,
            n,
            iteration,
            increment.err_x,
            increment.err_v,
            converged,
        )
        return SubdomainUpdate(
            subdomain=n,
            iteration=iteration,
            state=correct(fine.state, coarse_new, coarse_old),
            coarse=coarse_new,
            increment=increment,
            converged=converged,
            energy=fine.energy,
        )

    def seed(self, initial: PhaseSpaceState) -> PararealIterate:
        """Iteration 0: serial coarse sweep."""
        started = time.perf_counter()
        states = [initial]
        coarse: List[Optional[PhaseSpaceState]] = [None]
        for n in range(1, self.partition.subdomains + 1):
            g = self.coarse(n, states[-1])
            states.append(g)
            coarse.append(g)
        self.seconds["coarse_sweep"] += time.perf_counter() - started
        converged = [True] + [False] * self.partition.subdomains
        return PararealIterate(0, states, coarse, converged)

    def iteration(self, iterate: PararealIterate) -> Tuple[PararealIterate, List[SubdomainUpdate]]:
        """One full parareal iteration, subdomains in order."""
        k = iterate.iteration + 1
        states = [iterate.states[0]]
        coarse: List[Optional[PhaseSpaceState]] = [None]
        converged = [True]
        updates: List[SubdomainUpdate] = []
        for n in range(1, iterate.subdomains + 1):
            if iterate.converged[n]:
                states.append(iterate.states[n])
                coarse.append(iterate.coarse[n])
                converged.append(True)
                continue
            fine = self.fine(n, k, iterate.states[n - 1])
            g_new = self.coarse_update(n, states[n - 1], iterate.coarse[n], iterate.converged[n - 1])
            update = self.combine(n, k, fine, g_new, iterate.coarse[n], converged[n - 1])
            updates.append(update)
            states.append(update.state)
            coarse.append(update.coarse)
            converged.append(update.converged)
        return PararealIterate(k, states, coarse, converged), updates


def parareal_iteration(
    iterate: PararealIterate,
    fine: PropagatorConfig,
    coarse: PropagatorConfig,
    partition: TimePartition,
    tolerance: float = 0.0,
) -> PararealIterate:
    """Apply one correction sweep to ``iterate``; subdomains already converged are kept."""
    if iterate.subdomains != partition.subdomains:
        raise ConfigurationError(
            f"iterate has {iterate.subdomains} subdomains, partition {partition.subdomains}",
            ["time.subdomains"],
        )
    solver = WindowSolver(0, partition, fine, coarse, tolerance)
    return solver.iteration(iterate)[0]


@dataclass
class ErrorRecord:
    block: int
    subdomain: int
    iteration: int
    err_x: float
    err_v: float


@dataclass
class ConservationRecord:
    source: str
    iteration: int
    time: float
    quantities: ConservedQuantities


@dataclass
class TimingRecord:
    block: int
    phase: str
    seconds: float


@dataclass
class WindowSummary:
    block: int
    iterations: int
    converged: bool
    fine_solves: int
    coarse_solves: int


@dataclass
class PararealRunReport:
    """Everything a parareal run measured.

    ``errors`` holds the coarse increments used by the stopping test;
    ``reference_errors`` the distance of each updated boundary state from a
    serial fine reference, when one was supplied. Subdomains are numbered
    globally, 1..N across all blocks.
    """

    final_state: PhaseSpaceState
    errors: List[ErrorRecord] = field(default_factory=list)
    reference_errors: List[ErrorRecord] = field(default_factory=list)
    conservation: List[ConservationRecord] = field(default_factory=list)
    energy: List[EnergyRecord] = field(default_factory=list)
    timings: List[TimingRecord] = field(default_factory=list)
    windows: List[WindowSummary] = field(default_factory=list)

    @property
    def fine_solves(self) -> int:
        return sum(w.fine_solves for w in self.windows)

    @property
    def coarse_solves(self) -> int:
        return sum(w.coarse_solves for w in self.windows)

    @property
    def iterations(self) -> List[int]:
        return [w.iterations for w in self.windows]

    @property
    def converged(self) -> bool:
        return all(w.converged for w in self.windows)

    def max_error_by_iteration(self, metric: str = "increment") -> Dict[int, ErrorPair]:
        """Largest error over all subdomains for each iteration (L-infinity in time)."""
        records = self.errors if metric == "increment" else self.reference_errors
        out: Dict[int, ErrorPair] = {}
        for r in records:
            best = out.get(r.iteration, ErrorPair(0.0, 0.0))
            out[r.iteration] = ErrorPair(max(best.err_x, r.err_x), max(best.err_v, r.err_v))
        return dict(sorted(out.items()))


def check_pairing(fine: PropagatorConfig, coarse: PropagatorConfig, partition: TimePartition) -> None:
    if abs(partition.fine_dt - fine.dt) > 1e-12 * fine.dt:
        raise ConfigurationError("partition fine step differs from the fine propagator", ["fine.dt"])
    if abs(partition.coarse_dt - coarse.dt) > 1e-12 * coarse.dt:
        raise ConfigurationError("partition coarse step differs from the coarse propagator", ["coarse.dt"])
    if fine.scheme.is_spectral and coarse.scheme.is_spectral:
        if coarse.effective_tolerance < fine.effective_tolerance:
            raise ConfigurationError(
                f"coarse tolerance {coarse.effective_tolerance:g} is tighter than "
                f"fine tolerance {fine.effective_tolerance:g}",
                ["coarse.tolerance", "fine.tolerance"],
            )


def run_parareal(
    initial: Union[PhaseSpaceState, Scenario],
    fine: PropagatorConfig,
    coarse: PropagatorConfig,
    partition: TimePartition,
    tolerance: float,
    blocks: int = 1,
    *,
    n_particles: Optional[int] = None,
    execution: str = "pipelined",
    threads: Optional[int] = None,
    track_conservation: bool = False,
    track_energy: bool = False,
    reference: Optional[Sequence[PhaseSpaceState]] = None,
) -> PararealRunReport:
    """Multi-block parareal: windows solved one after the other, each to convergence.

    ``reference`` optionally holds serial fine states at all N + 1 global
    boundaries; reference errors are then recorded for every update.
    """
    from .workers import executor_for

    if isinstance(initial, Scenario):
        if n_particles is None:
            raise ConfigurationError("sampling a scenario needs a particle count", ["particles_per_cell"])
        initial = sample(initial, n_particles)
    check_pairing(fine, coarse, partition)
    if tolerance < 0:
        raise ConfigurationError(f"stopping tolerance must be nonnegative, got {tolerance}", ["stopping_tolerance"])
    if reference is not None and len(reference) != partition.subdomains + 1:
        raise ConfigurationError("reference must hold one state per subdomain boundary", ["metric"])

    windows = partition.windows(blocks)
    per_block = partition.subdomains // blocks
    executor = executor_for(execution, threads)
    report = PararealRunReport(final_state=initial)
    state = initial
    run_started = time.perf_counter()

    for b, window in enumerate(windows):
        offset = b * per_block
        solver = WindowSolver(b, window, fine, coarse, tolerance, track_energy)
        started = time.perf_counter()
        seed = solver.seed(state)
        outcome = executor.run(solver, seed)
        solver.seconds["window"] = time.perf_counter() - started

        diag_started = time.perf_counter()
        _collect(report, b, offset, window, seed, outcome, fine, track_conservation, reference)
        solver.seconds["diagnostics"] = time.perf_counter() - diag_started

        iterations = outcome.iterate.iteration
        report.windows.append(
            WindowSummary(b, iterations, outcome.iterate.all_converged, solver.fine_solves, solver.coarse_solves)
        )
        for phase in ("coarse_sweep", "coarse", "fine", "window", "diagnostics"):
            report.timings.append(TimingRecord(b, phase, solver.seconds.get(phase, 0.0)))
        if not outcome.iterate.all_converged:
            logger.warning(
                "block %d stopped after %d iterations without meeting tolerance %g",
                b,
                iterations,
                tolerance,
            )
        logger.info(
            "block %d/%d done: %d iterations, %d fine solves, %.2fs",
            b + 1,
            len(windows),
            iterations,
            solver.fine_solves,
            solver.seconds["window"],
        )
        state = outcome.iterate.final_state

    report.final_state = state
    report.timings.append(TimingRecord(-1, "total", time.perf_counter() - run_started))
    return report


def _collect(
    report: PararealRunReport,
    block: int,
    offset: int,
    window: TimePartition,
    seed: PararealIterate,
    outcome: WindowOutcome,
    fine: PropagatorConfig,
    track_conservation: bool,
    reference: Optional[Sequence[PhaseSpaceState]],
) -> None:
    updates = sorted(outcome.updates, key=lambda u: (u.iteration, u.subdomain))
    by_iteration: Dict[int, List[SubdomainUpdate]] = defaultdict(list)
    for u in updates:
        by_iteration[u.iteration].append(u)

    for n in range(1, window.subdomains + 1):
        if reference is not None:
            err = relative_error(seed.states[n], reference[offset + n])
            report.reference_errors.append(ErrorRecord(block, offset + n, 0, err.err_x, err.err_v))
        if track_conservation:
            report.conservation.append(
                ConservationRecord("parareal", 0, window.boundary(n), measure(seed.states[n], fine))
            )

    for k, group in by_iteration.items():
        for u in group:
            n = offset + u.subdomain
            report.errors.append(ErrorRecord(block, n, k, u.increment.err_x, u.increment.err_v))
            if reference is not None:
                err = relative_error(u.state, reference[n])
                report.reference_errors.append(ErrorRecord(block, n, k, err.err_x, err.err_v))
            if track_conservation:
                report.conservation.append(
                    ConservationRecord("parareal", k, window.boundary(u.subdomain), measure(u.state, fine))
                )
            report.energy.extend(u.energy)
        logger.info(
            "block %d iteration %d: max err_x=%.3e max err_v=%.3e, %d/%d subdomains converged",
            block,
            k,
            max(u.increment.err_x for u in group),
            max(u.increment.err_v for u in group),
            sum(1 for u in group if u.converged) + (window.subdomains - len(group)),
            window.subdomains,
        )
