from __future__ import annotations

from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .errors import ConfigurationError
from .initializers import Scenario, ScenarioKind
from .models import NUFFT_TOLERANCE_RANGE, ExternalFields, PropagatorConfig, Scheme
from .parareal import TimePartition, check_pairing

RunMode = Literal["serial", "parareal", "sweep", "conservation", "heatmap"]
SweepAxis = Literal["Pc", "h", "dt_g", "epsilon"]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ScenarioSettings(_Strict):
    kind: ScenarioKind
    alpha: Optional[float] = Field(None, ge=0, lt=1)
    wavenumber: Optional[float] = Field(None, gt=0)
    sigma: Optional[float] = Field(None, gt=0)
    beam_velocity: Optional[float] = None
    length: Optional[float] = Field(None, gt=0)
    total_charge: Optional[float] = None
    position_std: Optional[Tuple[float, float, float]] = None
    velocity_std: Optional[float] = Field(None, gt=0)
    magnetic_field: Optional[float] = None

    def to_scenario(self, seed: int) -> Scenario:
        values = self.model_dump(exclude_none=True, exclude={"kind"})
        return Scenario(self.kind, seed=seed, **values).resolved()


class PropagatorSettings(_Strict):
    scheme: Scheme
    modes: int = Field(16, ge=2)
    dt: float = Field(0.05, gt=0)
    tolerance: Optional[float] = Field(None, gt=NUFFT_TOLERANCE_RANGE[0], lt=NUFFT_TOLERANCE_RANGE[1])
    spline_order: int = Field(1, ge=1)

    @field_validator("modes")
    @classmethod
    def _even_modes(cls, value: int) -> int:
        if value % 2:
            raise ValueError("modes per dimension must be even")
        return value

    @model_validator(mode="after")
    def _tolerance_for_nufft(self) -> "PropagatorSettings":
        if self.scheme is Scheme.PIF_NUFFT and self.tolerance is None:
            raise ValueError("pif_nufft needs a tolerance")
        if self.scheme is Scheme.PIC and self.modes & (self.modes - 1):
            raise ValueError("pic grid size must be a power of two")
        return self

    def to_config(self, external: Optional[ExternalFields]) -> PropagatorConfig:
        return PropagatorConfig(
            scheme=self.scheme,
            modes=self.modes,
            dt=self.dt,
            spline_order=self.spline_order,
            tolerance=self.tolerance if self.scheme is Scheme.PIF_NUFFT else None,
            external_fields=external,
        )


class TimeSettings(_Strict):
    t_start: float = 0.0
    t_end: float = Field(..., gt=0)
    subdomains: int = Field(8, ge=1)
    blocks: int = Field(1, ge=1)


class SweepSettings(_Strict):
    axis: SweepAxis
    values: List[float] = Field(..., min_length=1)
    iterations: int = Field(2, ge=1)


class HeatmapSettings(_Strict):
    coarse_schemes: List[Scheme] = Field(default_factory=lambda: [Scheme.PIC, Scheme.PIF_NUFFT])
    tolerances: List[float] = Field(default_factory=lambda: [1e-2, 1e-3])
    coarsening: List[int] = Field(default_factory=lambda: [1, 2, 4, 8])

    @field_validator("tolerances")
    @classmethod
    def _nufft_range(cls, values: List[float]) -> List[float]:
        low, high = NUFFT_TOLERANCE_RANGE
        if any(not low < t < high for t in values):
            raise ValueError(f"NUFFT tolerances must lie in ({low:g}, {high:g})")
        return values

    @field_validator("coarsening")
    @classmethod
    def _positive(cls, values: List[int]) -> List[int]:
        if any(c < 1 for c in values):
            raise ValueError("coarsening ratios must be at least 1")
        return values


class RunConfig(_Strict):
    """One run of the harness; see README for the key paths."""

    mode: RunMode = "parareal"
    seed: int = Field(0, ge=0)
    particles_per_cell: int = Field(10, ge=1)
    stopping_tolerance: float = Field(1e-11, ge=0)
    execution: Literal["pipelined", "sequential"] = "pipelined"
    threads: Optional[int] = Field(None, ge=1)
    metric: Literal["increment", "reference"] = "increment"
    track_conservation: bool = False
    track_energy: bool = False
    dump_every: Optional[int] = Field(None, ge=1)
    scenario: ScenarioSettings
    fine: PropagatorSettings
    coarse: Optional[PropagatorSettings] = None
    time: TimeSettings
    sweep: Optional[SweepSettings] = None
    heatmap: Optional[HeatmapSettings] = None

    def scenario_model(self) -> Scenario:
        return self.scenario.to_scenario(self.seed)

    def fine_config(self) -> PropagatorConfig:
        return self.fine.to_config(self.scenario_model().external_fields())

    def coarse_config(self) -> PropagatorConfig:
        if self.coarse is None:
            raise ConfigurationError(f"mode {self.mode!r} needs a coarse propagator", ["coarse"])
        return self.coarse.to_config(self.scenario_model().external_fields())

    def particle_count(self) -> int:
        return self.scenario_model().particle_count(self.particles_per_cell, self.fine.modes)

    def partition(self) -> TimePartition:
        coarse_dt = self.coarse.dt if self.coarse is not None else self.fine.dt
        return TimePartition(
            self.time.t_start, self.time.t_end, self.time.subdomains, self.fine.dt, coarse_dt
        )

    def check_consistency(self) -> None:
        """Cross-field checks; raises ConfigurationError naming the keys involved."""
        if self.mode in ("serial", "conservation"):
            _whole_run(self.fine_config(), self.time, "fine.dt")
            if self.mode == "conservation":
                _whole_run(self.coarse_config(), self.time, "coarse.dt")
            return
        partition = self.partition()
        partition.windows(self.time.blocks)
        coarse = self.coarse_config()
        if self.mode == "parareal":
            check_pairing(self.fine_config(), coarse, partition)
        if self.mode == "sweep" and self.sweep is None:
            raise ConfigurationError("sweep mode needs a sweep section", ["sweep"])
        if self.mode == "heatmap" and self.heatmap is None:
            raise ConfigurationError("heatmap mode needs a heatmap section", ["heatmap"])

    def resolved(self) -> "RunConfig":
        """Copy with every scenario default written out."""
        scenario = self.scenario_model().as_dict()
        scenario.pop("seed", None)
        return self.model_copy(update={"scenario": ScenarioSettings.model_validate(scenario)})

    def manifest_dict(self) -> Dict[str, Any]:
        return self.resolved().model_dump(mode="json")


class RunSubmitted(BaseModel):
    runId: str
    status: str


class RunInfo(BaseModel):
    runId: str
    mode: str
    status: str
    outputDir: str
    exitCode: Optional[int] = None
    errorCategory: Optional[str] = None
    errorMessage: Optional[str] = None


class RunListResponse(BaseModel):
    runs: List[RunInfo]


def _whole_run(cfg: PropagatorConfig, time: TimeSettings, key: str) -> int:
    try:
        return cfg.steps_between(time.t_start, time.t_end)
    except ConfigurationError as exc:
        raise ConfigurationError(str(exc), [key, "time.t_end"]) from exc
