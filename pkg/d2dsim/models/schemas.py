"""Pydantic schemas for configuration objects and API requests/responses."""
import math
from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from d2dsim.config import Settings, settings
from d2dsim.models.enums import JobStatus, SchedulerPolicy, SharingScheme, SweepKind

SPEED_OF_LIGHT = 299_792_458.0


def free_space_ref_db(carrier_freq_ghz: float) -> float:
    """Free-space path loss at 1 m for the carrier frequency."""
    return 20.0 * math.log10(4.0 * math.pi * carrier_freq_ghz * 1e9 / SPEED_OF_LIGHT)


# Radio Schemas
class RadioParams(BaseModel):
    """Radio parameters shared by every link budget of a run."""
    model_config = ConfigDict(frozen=True)

    carrier_freq_ghz: float = Field(2.6, gt=0)
    bandwidth_hz: float = Field(5e6, gt=0)
    noise_density_dbm_hz: float = -174.0
    noise_figure_db: float = 7.0
    pathloss_exponent: float = Field(3.0, gt=0)
    pathloss_ref_db: float = None  # type: ignore[assignment]
    min_distance_m: float = Field(1.0, gt=0)

    @model_validator(mode="before")
    @classmethod
    def _default_reference_loss(cls, data: Any) -> Any:
        if isinstance(data, dict) and data.get("pathloss_ref_db") is None:
            data = dict(data)
            data["pathloss_ref_db"] = free_space_ref_db(data.get("carrier_freq_ghz", 2.6))
        return data

    @classmethod
    def from_settings(cls, source: Optional[Settings] = None) -> "RadioParams":
        """Build radio parameters from application settings."""
        s = source or settings
        return cls(
            carrier_freq_ghz=s.carrier_freq_ghz,
            bandwidth_hz=s.bandwidth_hz,
            noise_density_dbm_hz=s.noise_density_dbm_hz,
            noise_figure_db=s.noise_figure_db,
            pathloss_exponent=s.pathloss_exponent,
            pathloss_ref_db=s.pathloss_ref_db,
            min_distance_m=s.min_distance_m,
        )


# Experiment Schemas
class ExperimentConfig(BaseModel):
    """One run/sweep configuration. Defaults follow the reference scenario."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    scheme: SharingScheme = SharingScheme.OVERLAY
    cell_type: int = Field(1, ge=1, le=5)
    n_cues: int = Field(36, ge=0)
    n_pairs: int = Field(36, ge=0)
    snapshots: int = Field(200, ge=1)
    replications: int = Field(1, ge=1)
    seed: int = Field(0, ge=0)
    policy: SchedulerPolicy = SchedulerPolicy.ROUND_ROBIN
    output: str = "results.csv"
    a1: float = Field(0.5, ge=0)
    a2: float = Field(0.5, ge=0)
    edge_interference: bool = True

    @model_validator(mode="after")
    def _at_least_one_ue(self) -> "ExperimentConfig":
        if self.n_cues + self.n_pairs < 1:
            raise ValueError("n_cues + n_pairs must be at least 1")
        return self


# Layout Schemas
class CellOut(BaseModel):
    """One hexagonal cell."""
    cell_id: int
    center: tuple[float, float]
    radius_m: float
    neighbors: list[int]


class LayoutResponse(BaseModel):
    """Layout of one cell type."""
    cell_type: int
    num_cells: int
    radius_m: float
    enb_density_per_km2: float
    hexagon_area_km2: float
    coverage_km2: float
    cell_edge_snr_db: float
    cells: list[CellOut]


# RRM Schemas
class CueIn(BaseModel):
    """Legacy CUE as seen by the scheduler."""
    cell: int = Field(..., ge=1)
    utility_bps: float = Field(..., ge=0)
    weight: float = Field(1.0, gt=0)


class PairIn(BaseModel):
    """Potential D2D pair as seen by the scheduler."""
    tx_cell: int = Field(..., ge=1)
    rx_cell: int = Field(..., ge=1)
    distance_m: float = Field(..., ge=0)
    dm_utility_bps: float = Field(..., ge=0)
    cm_utility_bps: float = Field(..., ge=0)
    weight: float = Field(1.0, gt=0)


class SolveRequest(BaseModel):
    """Single-snapshot scheduling and mode selection request."""
    scheme: SharingScheme = SharingScheme.OVERLAY
    cues: list[CueIn] = []
    pairs: list[PairIn] = []
    d_max_m: float = Field(300.0, gt=0)
    force_cellular: bool = False
    include_lp: bool = False


class SolveResponse(BaseModel):
    """Optimal decision for one snapshot."""
    scheduled: list[int]
    direct_mode: list[int]
    objective_value: float
    nodes: int
    lp: Optional[str] = None


# Simulation Schemas
class GainOut(BaseModel):
    """D2D gains of one replication; null when the disabled baseline is zero."""
    g_dir_pct: Optional[float] = None
    g_off_pct: Optional[float] = None
    g_tot_pct: Optional[float] = None


class ReplicationOut(BaseModel):
    """Enabled/disabled metrics of one replication."""
    seed: int
    enb_density: float
    densification_ratio: float
    avg_total_ul_bps: float
    avg_pair_bps: float
    avg_cue_dl_bps: float
    disabled_avg_total_ul_bps: float
    disabled_avg_pair_bps: float
    disabled_avg_cue_dl_bps: float
    dm_fraction: float
    gains: GainOut


class SimulationResponse(BaseModel):
    """Result of a simulation request."""
    config: ExperimentConfig
    replications: list[ReplicationOut]


# Sweep Schemas
class SweepRequest(BaseModel):
    """Background sweep request."""
    kind: SweepKind = SweepKind.DENSIFICATION
    total_ues: int = Field(108, ge=3)
    pair_counts: Optional[list[int]] = None
    snapshots: int = Field(200, ge=1)
    replications: int = Field(1, ge=1)
    seed: int = Field(0, ge=0)
    policy: SchedulerPolicy = SchedulerPolicy.ROUND_ROBIN


class SweepJobResponse(BaseModel):
    """Sweep job status."""
    job_id: str
    status: JobStatus
    total_runs: int
    completed_runs: int
    error: Optional[str] = None
    rows: Optional[list[dict[str, Any]]] = None
