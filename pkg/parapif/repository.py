"""CSV and JSON files of one run's output directory."""

from __future__ import annotations

import csv
import json
import logging
import subprocess
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np

from . import __version__
from .errors import ArgumentError, ParapifError
from .models import Domain, FieldSpectrum, GridField, PhaseSpaceState

logger = logging.getLogger(__name__)

ERRORS_HEADER = ["block", "subdomain", "iteration", "err_x", "err_v"]
CONSERVATION_HEADER = [
    "source",
    "iteration",
    "time",
    "energy",
    "momentum_x",
    "momentum_y",
    "momentum_z",
    "charge_err",
]
ENERGY_HEADER = ["source", "iteration", "time", "field_energy", "field_energy_z", "kinetic", "total"]
TIMINGS_HEADER = ["block", "phase", "seconds"]
SLOPES_HEADER = ["iteration", "slope_x", "slope_v", "points"]
HEATMAP_HEADER = ["coarse_scheme", "coarsening", "tolerance", "wall_seconds", "iterations", "fine_solves"]
STATE_HEADER = ["index", "x", "y", "z", "vx", "vy", "vz"]


def describe_version() -> str:
    """``git describe`` of the source tree, else the package version."""
    try:
        out = subprocess.run(
            ["git", "describe", "--tags", "--always", "--dirty"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
            check=True,
        )
    except (OSError, subprocess.SubprocessError):
        return __version__
    return out.stdout.strip() or __version__


def _cell(value: Any) -> Any:
    if isinstance(value, float):
        return repr(float(value))
    return value


class RunRepository:
    """Write (and read back) the files of one output directory."""

    def __init__(self, output_dir: Union[str, Path]) -> None:
        self.output_dir = Path(output_dir)
        self.written: List[str] = []

    def ensure(self) -> None:
        self.output_dir.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        return self.output_dir / name

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        self.ensure()
        target = self.path(name)
        with open(target, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(header)
            for row in rows:
                writer.writerow([_cell(v) for v in row])
        if name not in self.written:
            self.written.append(name)
        logger.info("wrote %s", target)
        return target

    def read_csv(self, name: str) -> List[Dict[str, str]]:
        with open(self.path(name), "r", encoding="utf-8", newline="") as f:
            return list(csv.DictReader(f))

    def write_json(self, name: str, payload: Dict[str, Any]) -> Path:
        self.ensure()
        target = self.path(name)
        with open(target, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2, sort_keys=False)
            f.write("\n")
        if name not in self.written:
            self.written.append(name)
        return target

    def write_manifest(
        self,
        config: Dict[str, Any],
        seed: int,
        warnings: Sequence[str],
        summary: Optional[Dict[str, Any]] = None,
    ) -> Path:
        payload = {
            "version": describe_version(),
            "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "seed": seed,
            "config": config,
            "warnings": list(warnings),
            "summary": summary or {},
            "files": [name for name in self.written if name != "manifest.json"],
        }
        return self.write_json("manifest.json", payload)

    def write_error(self, exc: BaseException, category: str, details: Optional[Dict[str, Any]] = None) -> Optional[Path]:
        """error.json, only when the output directory already exists."""
        if not self.output_dir.is_dir():
            return None
        if details is None:
            details = exc.details() if isinstance(exc, ParapifError) else {}
        return self.write_json(
            "error.json",
            {"category": category, "message": str(exc), "details": details},
        )

    def write_state(self, name: str, state: PhaseSpaceState) -> Path:
        rows = (
            [i, *state.x[i].tolist(), *state.v[i].tolist()]
            for i in range(state.n_particles)
        )
        return self.write_csv(name, STATE_HEADER, rows)

    def read_state(
        self,
        name: str,
        domain: Domain,
        weights: np.ndarray,
        q_over_m: float = -1.0,
        charge: float = -1.0,
    ) -> PhaseSpaceState:
        data = np.loadtxt(self.path(name), delimiter=",", skiprows=1, ndmin=2)
        order = np.argsort(data[:, 0], kind="stable")
        data = data[order]
        if data.shape[0] != np.asarray(weights).shape[0]:
            raise ArgumentError(
                f"{name} holds {data.shape[0]} particles, {np.asarray(weights).shape[0]} weights given"
            )
        return PhaseSpaceState(data[:, 1:4], data[:, 4:7], np.asarray(weights), domain, q_over_m, charge)

    def write_spectrum(self, name: str, spectrum: FieldSpectrum) -> Path:
        return self.write_csv(name, ["n_x", "n_y", "n_z", "re", "im"], spectrum.rows())

    def write_grid(self, name: str, grid: GridField) -> Path:
        values = grid.values
        if values.ndim != 3:
            raise ArgumentError("only scalar grids have a row form")
        rows = (
            [i, j, k, float(values[i, j, k])]
            for i in range(values.shape[0])
            for j in range(values.shape[1])
            for k in range(values.shape[2])
        )
        return self.write_csv(name, ["i", "j", "k", "value"], rows)
