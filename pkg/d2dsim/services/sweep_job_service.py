"""Background sweep jobs kept in memory for the HTTP surface."""
import logging
import math
import uuid
from typing import Any, Optional

from fastapi import BackgroundTasks

from d2dsim.config import settings
from d2dsim.core.exceptions import NotFoundError
from d2dsim.models.enums import JobStatus, SweepKind
from d2dsim.models.schemas import ExperimentConfig, SweepRequest
from d2dsim.services.experiment_service import experiment_service

logger = logging.getLogger(__name__)


class SweepJobService:
    """Service for running preset sweeps as FastAPI background tasks."""

    def __init__(self, retention: Optional[int] = None):
        self.jobs: dict[str, dict[str, Any]] = {}
        self.retention = settings.sweep_job_retention if retention is None else retention

    def evict_finished(self) -> None:
        """Drop the oldest completed or failed jobs beyond the retention count."""
        finished = [
            job_id
            for job_id, job in self.jobs.items()
            if job["status"] in (JobStatus.COMPLETED, JobStatus.ERROR)
        ]
        for job_id in finished[: max(0, len(finished) - self.retention)]:
            del self.jobs[job_id]

    def configs_for(self, request: SweepRequest) -> list[ExperimentConfig]:
        base = ExperimentConfig(
            snapshots=request.snapshots,
            replications=request.replications,
            seed=request.seed,
            policy=request.policy,
        )
        if request.kind is SweepKind.DENSIFICATION:
            return experiment_service.preset_densification_sweep(request.total_ues, base)
        return experiment_service.preset_ue_density_sweep(request.pair_counts, base)

    def process_sweep(self, job_id: str, configs: list[ExperimentConfig]) -> None:
        """
        Run every (config, replication) of a job and store its rows.

        Args:
            job_id: Job identifier
            configs: Sweep configurations
        """
        job = self.jobs[job_id]
        job["status"] = JobStatus.RUNNING
        try:
            rows: list[dict[str, Any]] = []
            for config in configs:
                for record in experiment_service.run_experiment([config], workers=1):
                    rows.append(
                        {k: (None if isinstance(v, float) and math.isnan(v) else v)
                         for k, v in record.row().items()}
                    )
                    job["completed_runs"] += 1
            job["rows"] = rows
            job["status"] = JobStatus.COMPLETED
        except Exception as e:
            logger.exception("Sweep job %s failed", job_id)
            job["status"] = JobStatus.ERROR
            job["error"] = str(e)
        self.evict_finished()

    def start_sweep(self, request: SweepRequest, background_tasks: BackgroundTasks) -> dict:
        """
        Register a sweep job and schedule it in the background.

        Returns:
            Status response with the job_id
        """
        configs = self.configs_for(request)
        job_id = str(uuid.uuid4())
        self.jobs[job_id] = {
            "job_id": job_id,
            "status": JobStatus.PENDING,
            "total_runs": sum(c.replications for c in configs),
            "completed_runs": 0,
            "error": None,
            "rows": None,
        }
        background_tasks.add_task(self.process_sweep, job_id, configs)
        logger.info("Queued %s sweep %s with %d configs", request.kind.value, job_id, len(configs))
        return dict(self.jobs[job_id])

    def get_status(self, job_id: str) -> dict:
        """
        Raises:
            NotFoundError: If the job id is unknown
        """
        job: Optional[dict[str, Any]] = self.jobs.get(job_id)
        if job is None:
            raise NotFoundError(f"Sweep job {job_id} not found")
        return dict(job)


sweep_job_service = SweepJobService()
