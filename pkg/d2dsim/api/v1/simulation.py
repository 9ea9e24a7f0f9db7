"""Simulation API routes."""
import math
from typing import Optional

from fastapi import APIRouter
from fastapi.concurrency import run_in_threadpool

from d2dsim.decorators import handle_exceptions
from d2dsim.models.schemas import ExperimentConfig, GainOut, ReplicationOut, SimulationResponse
from d2dsim.services.experiment_service import ReplicationRecord, experiment_service

router = APIRouter(prefix="/simulations", tags=["Simulation"])


def _finite(value: float) -> Optional[float]:
    return None if math.isnan(value) else value


def _replication_out(record: ReplicationRecord) -> ReplicationOut:
    enabled, disabled, gains = record.enabled, record.disabled, record.gains
    return ReplicationOut(
        seed=enabled.seed,
        enb_density=enabled.enb_density,
        densification_ratio=enabled.densification_ratio,
        avg_total_ul_bps=enabled.avg_total_ul_bps,
        avg_pair_bps=enabled.avg_pair_bps,
        avg_cue_dl_bps=enabled.avg_cue_dl_bps,
        disabled_avg_total_ul_bps=disabled.avg_total_ul_bps,
        disabled_avg_pair_bps=disabled.avg_pair_bps,
        disabled_avg_cue_dl_bps=disabled.avg_cue_dl_bps,
        dm_fraction=enabled.dm_fraction,
        gains=GainOut(
            g_dir_pct=_finite(gains.g_dir),
            g_off_pct=_finite(gains.g_off),
            g_tot_pct=_finite(gains.g_tot),
        ),
    )


@router.post("/run", response_model=SimulationResponse)
@handle_exceptions
async def run_simulation(config: ExperimentConfig):
    """
    Run the D2D-enabled simulation and its disabled baseline per replication.

    Replication r uses seed `config.seed + r`.
    """
    records = await run_in_threadpool(experiment_service.run_experiment, [config], 1)
    return SimulationResponse(
        config=config,
        replications=[_replication_out(r) for r in records],
    )
