"""Ordinal trends over many matched-seed replications (run with --runslow)."""
import os

import pytest

from d2dsim.models.schemas import ExperimentConfig
from d2dsim.services.experiment_service import experiment_service

REPLICATIONS = 30
SNAPSHOTS = 200
WORKERS = os.cpu_count() or 1


@pytest.mark.slow
def test_densification_trends():
    base = ExperimentConfig(snapshots=SNAPSHOTS, replications=REPLICATIONS)
    records = experiment_service.run_experiment(
        experiment_service.preset_densification_sweep(108, base), WORKERS
    )
    checks = experiment_service.trend_report(experiment_service.to_frame(records))
    failed = [c.claim for c in checks if not c.holds]
    assert not failed, failed


@pytest.mark.slow
def test_overlay_total_gain_grows_with_ue_count():
    base = ExperimentConfig(snapshots=SNAPSHOTS, replications=REPLICATIONS)
    records = experiment_service.run_experiment(
        experiment_service.preset_ue_density_sweep(base=base), WORKERS
    )
    checks = [
        c
        for c in experiment_service.trend_report(experiment_service.to_frame(records))
        if "UE count" in c.claim
    ]
    assert checks
    failed = [c.claim for c in checks if not c.holds]
    assert not failed, failed
