"""Tests for the in-memory sweep job registry."""
import pytest
from fastapi import BackgroundTasks

from d2dsim.core.exceptions import NotFoundError
from d2dsim.models.enums import JobStatus, SweepKind
from d2dsim.models.schemas import SweepRequest
from d2dsim.services.sweep_job_service import SweepJobService

REQUEST = SweepRequest(kind=SweepKind.UE_DENSITY, pair_counts=[1], snapshots=1)


def test_start_registers_a_pending_job():
    service = SweepJobService()
    tasks = BackgroundTasks()
    job = service.start_sweep(REQUEST, tasks)
    assert job["status"] is JobStatus.PENDING
    assert job["total_runs"] == 5
    assert len(tasks.tasks) == 1


def test_finished_jobs_beyond_retention_are_evicted():
    service = SweepJobService(retention=1)
    tasks = BackgroundTasks()
    first = service.start_sweep(REQUEST, tasks)["job_id"]
    second = service.start_sweep(REQUEST, tasks)["job_id"]
    pending = service.start_sweep(REQUEST, tasks)["job_id"]
    service.process_sweep(first, [])
    service.process_sweep(second, [])
    assert list(service.jobs) == [second, pending]
    with pytest.raises(NotFoundError):
        service.get_status(first)
    assert service.get_status(second)["status"] is JobStatus.COMPLETED
    assert service.get_status(pending)["status"] is JobStatus.PENDING


def test_failed_job_records_the_error():
    service = SweepJobService()
    job_id = service.start_sweep(REQUEST, BackgroundTasks())["job_id"]
    service.process_sweep(job_id, [None])
    status = service.get_status(job_id)
    assert status["status"] is JobStatus.ERROR
    assert status["error"]
