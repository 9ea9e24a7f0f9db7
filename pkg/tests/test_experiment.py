"""Tests for configuration parsing, presets, the harness and CSV output."""
import json
import math

import numpy as np
import pandas as pd
import pytest

from d2dsim.core.exceptions import ConfigError, ValidationError
from d2dsim.models.enums import SchedulerPolicy, SharingScheme
from d2dsim.models.schemas import ExperimentConfig
from d2dsim.services.experiment_service import CSV_COLUMNS, experiment_service


@pytest.fixture
def tiny_config() -> ExperimentConfig:
    return ExperimentConfig(cell_type=2, n_cues=3, n_pairs=2, snapshots=4, seed=5)


def test_empty_config_gives_defaults():
    config = experiment_service.parse_config(text="")
    assert config == ExperimentConfig()
    assert config.scheme is SharingScheme.OVERLAY
    assert config.cell_type == 1
    assert config.policy is SchedulerPolicy.ROUND_ROBIN
    assert (config.a1, config.a2) == (0.5, 0.5)


def test_parse_values_comments_and_case():
    text = "# sweep\nScheme = UNDERLAY2\ncell_type=5  # densest\n\npolicy=Proportional_Fairness\n"
    config = experiment_service.parse_config(text=text)
    assert config.scheme is SharingScheme.UNDERLAY2
    assert config.cell_type == 5
    assert config.policy is SchedulerPolicy.PROPORTIONAL_FAIRNESS


def test_last_duplicate_wins():
    config = experiment_service.parse_config(text="seed=1\nseed=2\n")
    assert config.seed == 2


def test_flags_override_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("snapshots=50\nseed=3\n", encoding="utf-8")
    config = experiment_service.parse_config(path=path, overrides={"seed": 9, "n_pairs": None})
    assert config.snapshots == 50
    assert config.seed == 9
    assert config.n_pairs == 36


def test_zero_snapshots_rejected():
    with pytest.raises(ConfigError) as exc:
        experiment_service.parse_config(text="snapshots=0")
    assert "snapshots" in exc.value.detail
    assert ">= 1" in exc.value.detail


@pytest.mark.parametrize("text", ["colour=red", "cell_type=9", "scheme=hybrid", "seed"])
def test_bad_config_rejected(text):
    with pytest.raises(ConfigError):
        experiment_service.parse_config(text=text)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        experiment_service.parse_config(path=tmp_path / "absent.cfg")


def test_format_config_round_trip():
    config = ExperimentConfig(
        scheme=SharingScheme.UNDERLAY1, cell_type=4, n_pairs=12, a1=0.25, edge_interference=False
    )
    assert experiment_service.parse_config(text=experiment_service.format_config(config)) == config
    default = ExperimentConfig()
    assert experiment_service.parse_config(text=experiment_service.format_config(default)) == default


def test_densification_preset():
    configs = experiment_service.preset_densification_sweep(108)
    assert len(configs) == 15
    assert {(c.n_cues, c.n_pairs) for c in configs} == {(36, 36)}
    assert {c.seed for c in configs} == {0}
    assert {(c.scheme, c.cell_type) for c in configs} == {
        (s, t) for s in SharingScheme for t in range(1, 6)
    }


def test_ue_density_preset():
    configs = experiment_service.preset_ue_density_sweep()
    assert len(configs) == 20
    assert all(c.scheme is SharingScheme.OVERLAY for c in configs)
    assert all(c.n_cues == 36 for c in configs)
    assert sorted({c.n_pairs for c in configs}) == [12, 24, 36, 48]


def test_presets_are_pure():
    assert experiment_service.preset_ue_density_sweep([1, 2]) == (
        experiment_service.preset_ue_density_sweep([1, 2])
    )


def test_run_experiment_orders_and_seeds(tiny_config):
    other = tiny_config.model_copy(update={"scheme": SharingScheme.UNDERLAY2, "replications": 2})
    records = experiment_service.run_experiment([tiny_config, other], workers=1)
    assert [(r.config.scheme, r.replication, r.enabled.seed) for r in records] == [
        (SharingScheme.OVERLAY, 0, 5),
        (SharingScheme.UNDERLAY2, 0, 5),
        (SharingScheme.UNDERLAY2, 1, 6),
    ]
    for r in records:
        assert r.disabled.seed == r.enabled.seed
        assert not r.disabled.d2d_enabled


def test_emit_csv(tmp_path, tiny_config):
    records = experiment_service.run_experiment([tiny_config.model_copy(update={"replications": 2})])
    out = tmp_path / "results.csv"
    experiment_service.emit_csv(records, out)
    frame = pd.read_csv(out, float_precision="round_trip")
    assert list(frame.columns) == CSV_COLUMNS
    assert len(frame) == 2
    assert frame["enb_density"].tolist() == [8.5, 8.5]
    assert frame["seed"].tolist() == [5, 6]
    for r in records:
        expected = 0.5 * r.gains.g_dir + 0.5 * r.gains.g_off
        assert r.gains.g_tot == expected or (math.isnan(r.gains.g_tot) and math.isnan(expected))
    meta = json.loads((tmp_path / "results.csv.meta.json").read_text())
    assert meta["rows"] == 2
    assert meta["columns"] == CSV_COLUMNS


def test_emit_csv_is_byte_identical(tmp_path, tiny_config):
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    experiment_service.emit_csv(experiment_service.run_experiment([tiny_config]), first)
    experiment_service.emit_csv(experiment_service.run_experiment([tiny_config]), second)
    assert first.read_bytes() == second.read_bytes()


def test_emit_csv_unwritable(tmp_path, tiny_config):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    records = experiment_service.run_experiment([tiny_config])
    with pytest.raises(ValidationError):
        experiment_service.emit_csv(records, blocker / "out.csv")


def _frame(ul_step: float, dir_step: float, seeds: int = 8) -> pd.DataFrame:
    rng = np.random.default_rng(0)
    rows = []
    for cell_type in (1, 2):
        for seed in range(seeds):
            rows.append(
                {
                    "scheme": "overlay",
                    "cell_type": cell_type,
                    "n_pairs": 36,
                    "seed": seed,
                    "avg_total_ul_bps": 1e7 + ul_step * cell_type + rng.normal(0, 1.0),
                    "g_dir_pct": 50.0 + dir_step * cell_type + rng.normal(0, 1.0),
                    "g_off_pct": 10.0,
                    "g_tot_pct": 30.0,
                    "avg_pair_bps": 1.0,
                    "avg_cue_dl_bps": 1.0,
                }
            )
    return pd.DataFrame(rows)


def test_trend_report_holds():
    checks = experiment_service.trend_report(_frame(ul_step=100.0, dir_step=-10.0))
    assert len(checks) == 2
    assert all(c.holds for c in checks)


def test_trend_report_flags_violation():
    checks = {c.claim: c for c in experiment_service.trend_report(_frame(-100.0, -10.0))}
    ul = checks["overlay: total UL nondecreasing in eNB density"]
    assert not ul.holds
    assert ul.p_value < 0.05
    assert checks["overlay: direct gain nonincreasing in eNB density"].holds


def test_summarize_means():
    summary = experiment_service.summarize(_frame(100.0, -10.0))
    assert len(summary) == 2
    assert summary["g_off_pct"].tolist() == [10.0, 10.0]
