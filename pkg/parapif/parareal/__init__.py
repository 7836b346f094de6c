from .engine import (
    ConservationRecord,
    EnergyRecord,
    ErrorRecord,
    PararealIterate,
    PararealRunReport,
    TimePartition,
    TimingRecord,
    WindowSolver,
    check_convergence,
    check_pairing,
    correct,
    parareal_iteration,
    propagate,
    run_parareal,
    serial_boundaries,
)
from .workers import PipelinedExecutor, SequentialExecutor, executor_for

__all__ = [
    "ConservationRecord",
    "EnergyRecord",
    "ErrorRecord",
    "PararealIterate",
    "PararealRunReport",
    "PipelinedExecutor",
    "SequentialExecutor",
    "TimePartition",
    "TimingRecord",
    "WindowSolver",
    "check_convergence",
    "check_pairing",
    "correct",
    "executor_for",
    "parareal_iteration",
    "propagate",
    "run_parareal",
    "serial_boundaries",
]
