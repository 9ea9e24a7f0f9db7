"""Background sweep API routes."""
from fastapi import APIRouter, BackgroundTasks

from d2dsim.decorators import handle_exceptions
from d2dsim.models.schemas import SweepJobResponse, SweepRequest
from d2dsim.services.sweep_job_service import sweep_job_service

router = APIRouter(prefix="/sweeps", tags=["Sweeps"])


@router.post("", response_model=SweepJobResponse)
@handle_exceptions
async def start_sweep(req: SweepRequest, background_tasks: BackgroundTasks):
    """
    Start a densification or UE-density sweep in the background.

    Returns:
        Job status with the job_id to poll
    """
    return sweep_job_service.start_sweep(req, background_tasks)


@router.get("/{job_id}", response_model=SweepJobResponse)
@handle_exceptions
async def get_sweep_status(job_id: str):
    """Sweep progress; rows are included once the job has completed."""
    return sweep_job_service.get_status(job_id)
