from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from ..diagnostics import conservation_drift, conserved_quantities, damping_rate, momentum_scale
from ..errors import ConfigurationError, InsufficientDataError
from ..fields import FieldSolution, PifFieldSolver, solver_for
from ..initializers import sample
from ..models import ConservedQuantities, PhaseSpaceState, PropagatorConfig
from ..parareal import (
    EnergyRecord,
    PararealRunReport,
    TimePartition,
    propagate,
    run_parareal,
    serial_boundaries,
)
from ..repository import (
    CONSERVATION_HEADER,
    ENERGY_HEADER,
    ERRORS_HEADER,
    TIMINGS_HEADER,
)
from ..schemas import RunConfig
from .base import ModeHandler, ModeResult, RunContext

logger = logging.getLogger(__name__)


class ModeRouter:
    """Map run modes to handler callables."""

    def __init__(self) -> None:
        from .sweep import heatmap_handler, sweep_handler

        self._handlers: Dict[str, ModeHandler] = {
            "serial": serial_handler,
            "parareal": parareal_handler,
            "conservation": conservation_handler,
            "sweep": sweep_handler,
            "heatmap": heatmap_handler,
        }

    @property
    def modes(self) -> List[str]:
        return list(self._handlers)

    def dispatch(self, ctx: RunContext) -> ModeResult:
        handler = self._handlers.get(ctx.config.mode)
        if handler is None:
            raise ConfigurationError(f"unknown mode: {ctx.config.mode}", ["mode"])
        logger.info("running mode %s", ctx.config.mode)
        return handler(ctx)


@dataclass
class SerialTrace:
    """Per-step measurements of one serial run."""

    source: str
    times: List[float] = field(default_factory=list)
    quantities: List[ConservedQuantities] = field(default_factory=list)
    final_state: Optional[PhaseSpaceState] = None
    seconds: float = 0.0

    def conservation_rows(self) -> List[List[Any]]:
        return [[self.source, 0, t, *q.as_row()] for t, q in zip(self.times, self.quantities)]

    def energy_rows(self) -> List[List[Any]]:
        return [
            [self.source, 0, t, q.field_energy, q.field_energy_z, q.kinetic, q.total_energy]
            for t, q in zip(self.times, self.quantities)
        ]

    def field_energy_z(self) -> List[float]:
        return [q.field_energy_z for q in self.quantities]


def trace_serial(
    ctx: RunContext,
    cfg: PropagatorConfig,
    initial: PhaseSpaceState,
    source: str,
) -> SerialTrace:
    """Serial run of ``cfg`` over the configured time span, measured at every step."""
    config = ctx.config
    trace = SerialTrace(source)
    dump_every = config.dump_every

    def observe(step: int, t: float, state: PhaseSpaceState, solution: FieldSolution) -> None:
        trace.times.append(t)
        trace.quantities.append(conserved_quantities(state, solution, cfg))
        if dump_every and step % dump_every == 0:
            _dump_density(ctx, cfg, state, source, step)

    started = time.perf_counter()
    trace.final_state = propagate(cfg, initial, config.time.t_start, config.time.t_end, observe)
    trace.seconds = time.perf_counter() - started
    logger.info("%s serial run (%s): %d steps in %.2fs", source, cfg.label, len(trace.times) - 1, trace.seconds)
    return trace


def _dump_density(ctx: RunContext, cfg: PropagatorConfig, state: PhaseSpaceState, source: str, step: int) -> None:
    solver = solver_for(cfg, state.length)
    name = f"rho_{source}_{step:05d}.csv"
    if isinstance(solver, PifFieldSolver):
        ctx.repository.write_spectrum(name, solver.scatter(state))
    else:
        ctx.repository.write_grid(name, solver.deposit(state))


def _rate(times: List[float], energies: List[float]) -> Optional[float]:
    try:
        return damping_rate(times, energies)
    except InsufficientDataError as exc:
        steps = np.diff(energies)
        if steps.size and (np.all(steps > 0) or np.all(steps < 0)):
            # non-oscillating mode, e.g. a symmetric two-stream instability
            return damping_rate(times, energies, envelope=False)
        logger.info("no envelope rate: %s", exc)
        return None


def _trace_summary(trace: SerialTrace) -> Dict[str, Any]:
    assert trace.final_state is not None
    summary: Dict[str, Any] = {"steps": len(trace.times) - 1, "seconds": trace.seconds}
    summary.update(conservation_drift(trace.quantities, momentum_scale(trace.final_state)))
    summary["field_energy_z_rate"] = _rate(trace.times, trace.field_energy_z())
    return summary


def serial_handler(ctx: RunContext) -> ModeResult:
    config = ctx.config
    cfg = config.fine_config()
    initial = sample(config.scenario_model(), config.particle_count())
    trace = trace_serial(ctx, cfg, initial, "fine")
    repo = ctx.repository
    repo.write_csv("errors.csv", ERRORS_HEADER, [])
    repo.write_csv("conservation.csv", CONSERVATION_HEADER, trace.conservation_rows())
    repo.write_csv("energy_trace.csv", ENERGY_HEADER, trace.energy_rows())
    repo.write_csv("timings.csv", TIMINGS_HEADER, [[-1, "fine", trace.seconds], [-1, "total", trace.seconds]])
    repo.write_state("state_final.csv", trace.final_state)
    summary = {"particles": initial.n_particles, **_trace_summary(trace)}
    return ModeResult(summary)


def conservation_handler(ctx: RunContext) -> ModeResult:
    config = ctx.config
    fine_cfg = config.fine_config()
    coarse_cfg = config.coarse_config()
    initial = sample(config.scenario_model(), config.particle_count())
    traces = [trace_serial(ctx, fine_cfg, initial, "fine"), trace_serial(ctx, coarse_cfg, initial, "coarse")]
    repo = ctx.repository
    repo.write_csv("errors.csv", ERRORS_HEADER, [])
    repo.write_csv("conservation.csv", CONSERVATION_HEADER, [r for t in traces for r in t.conservation_rows()])
    repo.write_csv("energy_trace.csv", ENERGY_HEADER, [r for t in traces for r in t.energy_rows()])
    timings = [[-1, t.source, t.seconds] for t in traces]
    timings.append([-1, "total", sum(t.seconds for t in traces)])
    repo.write_csv("timings.csv", TIMINGS_HEADER, timings)
    repo.write_state("state_final.csv", traces[0].final_state)
    return ModeResult(
        {
            "particles": initial.n_particles,
            "fine": {"scheme": fine_cfg.label, **_trace_summary(traces[0])},
            "coarse": {"scheme": coarse_cfg.label, **_trace_summary(traces[1])},
        }
    )


def execute_parareal(
    config: RunConfig,
    fine: Optional[PropagatorConfig] = None,
    coarse: Optional[PropagatorConfig] = None,
    n_particles: Optional[int] = None,
) -> Tuple[PararealRunReport, List[EnergyRecord]]:
    """Sample the scenario and run parareal; overrides are used by sweeps.

    Returns the report and, when energy tracking is on, the serial fine
    energy trace it is compared against.
    """
    fine = fine or config.fine_config()
    coarse = coarse or config.coarse_config()
    partition = TimePartition.for_propagators(
        config.time.t_start, config.time.t_end, config.time.subdomains, fine, coarse
    )
    initial = sample(config.scenario_model(), n_particles or config.particle_count())

    reference = None
    serial_energy: List[EnergyRecord] = []
    if config.metric == "reference" or config.track_energy:
        observer = _energy_observer(fine, serial_energy) if config.track_energy else None
        reference = serial_boundaries(fine, initial, partition, observer)

    report = run_parareal(
        initial,
        fine,
        coarse,
        partition,
        config.stopping_tolerance,
        config.time.blocks,
        execution=config.execution,
        threads=config.threads,
        track_conservation=config.track_conservation,
        track_energy=config.track_energy,
        reference=reference if config.metric == "reference" else None,
    )
    return report, serial_energy


def _energy_observer(cfg: PropagatorConfig, records: List[EnergyRecord]):
    def observe(step: int, t: float, state: PhaseSpaceState, solution: FieldSolution) -> None:
        q = conserved_quantities(state, solution, cfg)
        records.append(EnergyRecord("serial", 0, t, q.field_energy, q.field_energy_z, q.kinetic, q.total_energy))

    return observe


def error_rows(report: PararealRunReport, metric: str) -> List[List[Any]]:
    records = report.errors if metric == "increment" else report.reference_errors
    return [[r.block, r.subdomain, r.iteration, r.err_x, r.err_v] for r in records]


def _energy_rates(records: List[EnergyRecord]) -> Dict[str, Optional[float]]:
    series: Dict[str, Tuple[List[float], List[float]]] = {}
    for r in records:
        key = f"{r.source}_k{r.iteration}" if r.source == "parareal" else r.source
        times, values = series.setdefault(key, ([], []))
        times.append(r.time)
        values.append(r.field_energy_z)
    return {key: _rate(times, values) for key, (times, values) in series.items()}


def parareal_handler(ctx: RunContext) -> ModeResult:
    config = ctx.config
    report, serial_energy = execute_parareal(config)
    repo = ctx.repository
    repo.write_csv("errors.csv", ERRORS_HEADER, error_rows(report, config.metric))
    repo.write_csv(
        "conservation.csv",
        CONSERVATION_HEADER,
        ([r.source, r.iteration, r.time, *r.quantities.as_row()] for r in report.conservation),
    )
    energy = serial_energy + report.energy
    repo.write_csv(
        "energy_trace.csv",
        ENERGY_HEADER,
        ([r.source, r.iteration, r.time, r.field_energy, r.field_energy_z, r.kinetic, r.total] for r in energy),
    )
    repo.write_csv("timings.csv", TIMINGS_HEADER, ([t.block, t.phase, t.seconds] for t in report.timings))
    repo.write_state("state_final.csv", report.final_state)

    summary: Dict[str, Any] = {
        "particles": report.final_state.n_particles,
        "iterations": report.iterations,
        "converged": report.converged,
        "fine_solves": report.fine_solves,
        "coarse_solves": report.coarse_solves,
        "max_error": {
            str(k): {"err_x": e.err_x, "err_v": e.err_v}
            for k, e in report.max_error_by_iteration(config.metric).items()
        },
    }
    if config.track_energy:
        summary["field_energy_z_rates"] = _energy_rates(energy)
    return ModeResult(summary)
