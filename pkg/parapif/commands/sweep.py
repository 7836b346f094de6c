"""Convergence sweeps (one error component at a time) and the coarse-propagator timing grid."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

from ..diagnostics import ErrorPair, fit_power_law
from ..errors import ArgumentError, ConfigurationError
from ..models import PropagatorConfig, Scheme
from ..parareal import PararealRunReport, TimePartition, check_pairing
from ..repository import (
    CONSERVATION_HEADER,
    ENERGY_HEADER,
    ERRORS_HEADER,
    HEATMAP_HEADER,
    SLOPES_HEADER,
    TIMINGS_HEADER,
)
from ..schemas import RunConfig
from .base import ModeResult, RunContext
from .router import error_rows, execute_parareal

logger = logging.getLogger(__name__)


@dataclass
class SweepPoint:
    value: float
    abscissa: float
    fine: PropagatorConfig
    coarse: PropagatorConfig
    n_particles: int


def _whole(value: float, key: str) -> int:
    if value != int(value) or value < 1:
        raise ConfigurationError(f"{key} values must be positive integers, got {value}", ["sweep.values"])
    return int(value)


def sweep_points(ctx: RunContext) -> List[SweepPoint]:
    """Propagator pairs for every sweep value, with methodology warnings recorded on ``ctx``."""
    config = ctx.config
    assert config.sweep is not None
    axis = config.sweep.axis
    scenario = config.scenario_model()
    fine = config.fine_config()
    coarse = config.coarse_config()

    if axis in ("Pc", "h") and abs(coarse.dt - fine.dt) > 1e-12 * fine.dt:
        ctx.warn(f"{axis} sweep with coarse dt {coarse.dt:g} != fine dt {fine.dt:g}; time error is not held fixed")
    if axis == "dt_g" and coarse.scheme.is_spectral and coarse.effective_tolerance != fine.effective_tolerance:
        ctx.warn("dt_g sweep with a spectral coarse propagator whose tolerance differs from the fine one")
    if axis == "epsilon":
        if coarse.scheme is not Scheme.PIF_NUFFT:
            raise ConfigurationError("an epsilon sweep needs a pif_nufft coarse propagator", ["sweep.axis", "coarse.scheme"])
        if abs(coarse.dt - fine.dt) > 1e-12 * fine.dt:
            ctx.warn(f"epsilon sweep with coarse dt {coarse.dt:g} != fine dt {fine.dt:g}")
    if axis != "h" and coarse.modes != fine.modes:
        ctx.warn(f"{axis} sweep with coarse N={coarse.modes} != fine N={fine.modes}; resolution error is not held fixed")

    points: List[SweepPoint] = []
    for value in config.sweep.values:
        if axis == "Pc":
            ppc = _whole(value, "Pc")
            points.append(SweepPoint(value, float(ppc), fine, coarse, scenario.particle_count(ppc, fine.modes)))
        elif axis == "h":
            modes = _whole(value, "h")
            f, g = replace(fine, modes=modes), replace(coarse, modes=modes)
            n = scenario.particle_count(config.particles_per_cell, modes)
            points.append(SweepPoint(value, scenario.length / modes, f, g, n))
        elif axis == "dt_g":
            points.append(SweepPoint(value, value, fine, coarse.with_dt(value), config.particle_count()))
        else:
            try:
                g = replace(coarse, tolerance=value)
            except ConfigurationError as exc:
                raise ConfigurationError(f"epsilon value {value:g}: {exc}", ["sweep.values"]) from exc
            points.append(SweepPoint(value, value, fine, g, config.particle_count()))
    for p in points:
        partition = TimePartition.for_propagators(
            config.time.t_start, config.time.t_end, config.time.subdomains, p.fine, p.coarse
        )
        partition.windows(config.time.blocks)
        check_pairing(p.fine, p.coarse, partition)
    return points


def fit_slopes(
    abscissae: Sequence[float],
    errors: Sequence[Dict[int, ErrorPair]],
    iterations: int,
) -> List[List[Any]]:
    """One row per iteration 1..iterations; NaN where fewer than two usable points remain."""
    rows: List[List[Any]] = []
    for k in range(1, iterations + 1):
        xs, ex, ev = [], [], []
        for x, by_k in zip(abscissae, errors):
            pair = by_k.get(k)
            if pair is not None and pair.err_x > 0 and pair.err_v > 0:
                xs.append(x)
                ex.append(pair.err_x)
                ev.append(pair.err_v)
        try:
            slope_x = fit_power_law(xs, ex, min_points=2)
            slope_v = fit_power_law(xs, ev, min_points=2)
        except ArgumentError as exc:
            logger.info("iteration %d: no slope (%s)", k, exc)
            slope_x = slope_v = math.nan
        rows.append([k, slope_x, slope_v, len(xs)])
    return rows


def _finite(value: float) -> Optional[float]:
    return None if math.isnan(value) else value


def _conservation_rows(tag: List[Any], report: PararealRunReport) -> List[List[Any]]:
    return [[*tag, r.source, r.iteration, r.time, *r.quantities.as_row()] for r in report.conservation]


def _energy_rows(tag: List[Any], report: PararealRunReport) -> List[List[Any]]:
    return [
        [*tag, r.source, r.iteration, r.time, r.field_energy, r.field_energy_z, r.kinetic, r.total]
        for r in report.energy
    ]


def sweep_handler(ctx: RunContext) -> ModeResult:
    config = ctx.config
    assert config.sweep is not None
    points = sweep_points(ctx)
    errors: List[List[Any]] = []
    conservation: List[List[Any]] = []
    energy: List[List[Any]] = []
    timings: List[List[Any]] = []
    maxima: List[Dict[int, ErrorPair]] = []

    for i, p in enumerate(points):
        logger.info("sweep %s: value %d/%d = %g", config.sweep.axis, i + 1, len(points), p.value)
        started = time.perf_counter()
        report, _ = execute_parareal(config, p.fine, p.coarse, p.n_particles)
        elapsed = time.perf_counter() - started
        errors.extend([p.value, *row] for row in error_rows(report, config.metric))
        conservation.extend(_conservation_rows([p.value], report))
        energy.extend(_energy_rows([p.value], report))
        timings.append([p.value, -1, "total", elapsed])
        maxima.append(report.max_error_by_iteration(config.metric))

    slopes = fit_slopes([p.abscissa for p in points], maxima, config.sweep.iterations)
    repo = ctx.repository
    repo.write_csv("errors.csv", ["sweep_value", *ERRORS_HEADER], errors)
    repo.write_csv("slopes.csv", SLOPES_HEADER, slopes)
    repo.write_csv("conservation.csv", ["sweep_value", *CONSERVATION_HEADER], conservation)
    repo.write_csv("energy_trace.csv", ["sweep_value", *ENERGY_HEADER], energy)
    repo.write_csv("timings.csv", ["sweep_value", *TIMINGS_HEADER], timings)
    return ModeResult(
        {
            "axis": config.sweep.axis,
            "values": [p.value for p in points],
            "slopes": {
                str(row[0]): {"x": _finite(row[1]), "v": _finite(row[2]), "points": row[3]} for row in slopes
            },
        }
    )


@dataclass
class HeatmapCell:
    scheme: Scheme
    coarsening: int
    tolerance: Optional[float]
    coarse: PropagatorConfig


def heatmap_cells(config: RunConfig) -> List[HeatmapCell]:
    """Coarse propagators for every (scheme, tolerance) x coarsening cell; all validated up front."""
    assert config.heatmap is not None
    fine = config.fine_config()
    base = config.coarse_config()
    cells: List[HeatmapCell] = []
    for scheme in config.heatmap.coarse_schemes:
        tolerances: List[Optional[float]] = (
            list(config.heatmap.tolerances) if scheme is Scheme.PIF_NUFFT else [None]
        )
        for tol in tolerances:
            for c in config.heatmap.coarsening:
                try:
                    coarse = replace(base, scheme=scheme, tolerance=tol, dt=fine.dt * c)
                    partition = TimePartition.for_propagators(
                        config.time.t_start, config.time.t_end, config.time.subdomains, fine, coarse
                    )
                    partition.windows(config.time.blocks)
                    check_pairing(fine, coarse, partition)
                except ConfigurationError as exc:
                    raise ConfigurationError(
                        f"heatmap cell {scheme.value} x{c}: {exc}", ["heatmap", *exc.keys]
                    ) from exc
                cells.append(HeatmapCell(scheme, c, tol, coarse))
    return cells


def heatmap_handler(ctx: RunContext) -> ModeResult:
    config = ctx.config
    fine = config.fine_config()
    cells = heatmap_cells(config)
    rows: List[List[Any]] = []
    errors: List[List[Any]] = []
    conservation: List[List[Any]] = []
    energy: List[List[Any]] = []
    timings: List[List[Any]] = []
    for i, cell in enumerate(cells):
        logger.info("heatmap cell %d/%d: %s", i + 1, len(cells), cell.coarse.label)
        started = time.perf_counter()
        report, _ = execute_parareal(config, fine, cell.coarse)
        wall = time.perf_counter() - started
        tag: Tuple[Any, ...] = (cell.scheme.value, cell.coarsening, "" if cell.tolerance is None else cell.tolerance)
        rows.append([*tag, wall, sum(report.iterations), report.fine_solves])
        errors.extend([*tag, *row] for row in error_rows(report, config.metric))
        timings.extend([*tag, t.block, t.phase, t.seconds] for t in report.timings)
        conservation.extend(_conservation_rows(list(tag), report))
        energy.extend(_energy_rows(list(tag), report))

    repo = ctx.repository
    repo.write_csv("heatmap.csv", HEATMAP_HEADER, rows)
    cell_columns = HEATMAP_HEADER[:3]
    repo.write_csv("errors.csv", [*cell_columns, *ERRORS_HEADER], errors)
    repo.write_csv("conservation.csv", [*cell_columns, *CONSERVATION_HEADER], conservation)
    repo.write_csv("energy_trace.csv", [*cell_columns, *ENERGY_HEADER], energy)
    repo.write_csv("timings.csv", [*cell_columns, *TIMINGS_HEADER], timings)
    return ModeResult({"cells": len(rows), "fastest": min(rows, key=lambda r: r[3])[:4] if rows else None})
