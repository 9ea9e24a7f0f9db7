"""Experiment configuration, sweep presets, replication harness and CSV output."""
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import ValidationError as PydanticValidationError
from scipy import stats

from d2dsim.config import settings
from d2dsim.core.exceptions import ConfigError, ValidationError
from d2dsim.models.domain import GainReport, RunResult, TrendCheck
from d2dsim.models.enums import SharingScheme
from d2dsim.models.schemas import ExperimentConfig
from d2dsim.services.simulation_service import simulation_service

logger = logging.getLogger(__name__)

CSV_COLUMNS = [
    "scheme",
    "cell_type",
    "enb_density",
    "n_cues",
    "n_pairs",
    "seed",
    "avg_total_ul_bps",
    "avg_pair_bps",
    "avg_cue_dl_bps",
    "g_dir_pct",
    "g_off_pct",
    "g_tot_pct",
]

ACCEPTED_RANGES = {
    "scheme": "one of overlay, underlay1, underlay2",
    "cell_type": "an integer in 1..5",
    "n_cues": "an integer >= 0",
    "n_pairs": "an integer >= 0",
    "snapshots": "an integer >= 1",
    "replications": "an integer >= 1",
    "seed": "an integer >= 0",
    "policy": "one of round_robin, proportional_fairness",
    "output": "a file path",
    "a1": "a number >= 0",
    "a2": "a number >= 0",
    "edge_interference": "true or false",
}

SIGNIFICANCE = 0.05


@dataclass(eq=False)
class ReplicationRecord:
    """Enabled run, disabled baseline and gains of one (config, replication)."""
    config: ExperimentConfig
    replication: int
    enabled: RunResult
    disabled: RunResult
    gains: GainReport

    def row(self) -> dict[str, Any]:
        return {
            "scheme": self.config.scheme.value,
            "cell_type": self.config.cell_type,
            "enb_density": round(self.enabled.enb_density, 1),
            "n_cues": self.config.n_cues,
            "n_pairs": self.config.n_pairs,
            "seed": self.enabled.seed,
            "avg_total_ul_bps": self.enabled.avg_total_ul_bps,
            "avg_pair_bps": self.enabled.avg_pair_bps,
            "avg_cue_dl_bps": self.enabled.avg_cue_dl_bps,
            "g_dir_pct": self.gains.g_dir,
            "g_off_pct": self.gains.g_off,
            "g_tot_pct": self.gains.g_tot,
        }


def _run_replication(job: tuple[ExperimentConfig, int]) -> ReplicationRecord:
    config, replication = job
    seeded = config.model_copy(update={"seed": config.seed + replication})
    enabled = simulation_service.run_simulation(seeded, d2d_enabled=True)
    disabled = simulation_service.run_disabled_baseline(seeded)
    gains = simulation_service.gain_report(enabled, disabled)
    return ReplicationRecord(seeded, replication, enabled, disabled, gains)


class ExperimentService:
    """Service for configuring and running sweeps of simulations."""

    def parse_config(
        self,
        path: Optional[str | Path] = None,
        text: Optional[str] = None,
        overrides: Optional[Mapping[str, Any]] = None,
    ) -> ExperimentConfig:
        """
        Validated configuration from a key=value file and/or overrides.

        Args:
            path: Config file (UTF-8 `key=value` lines, `#` comments)
            text: Config text, used when no path is given
            overrides: Values that win over the file (e.g. command-line flags)

        Returns:
            ExperimentConfig

        Raises:
            ConfigError: unknown key, malformed line, or out-of-range value
        """
        values: dict[str, Any] = {}
        if path is not None:
            try:
                text = Path(path).read_text(encoding="utf-8")
            except OSError as e:
                raise ConfigError(f"cannot read config file {path}: {e}") from e
        for lineno, raw in enumerate((text or "").splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key=value, got '{raw.strip()}'")
            key, value = (part.strip() for part in line.split("=", 1))
            values[key.lower()] = value
        for key, value in (overrides or {}).items():
            if value is not None:
                values[key] = value

        unknown = sorted(set(values) - set(ExperimentConfig.model_fields))
        if unknown:
            raise ConfigError(
                f"unknown config key(s): {', '.join(unknown)}; "
                f"accepted keys: {', '.join(ExperimentConfig.model_fields)}"
            )
        for key in ("scheme", "policy"):
            if isinstance(values.get(key), str):
                values[key] = values[key].strip().lower()
        try:
            return ExperimentConfig(**values)
        except PydanticValidationError as e:
            err = e.errors()[0]
            key = str(err["loc"][0]) if err.get("loc") else None
            if key in ACCEPTED_RANGES:
                raise ConfigError(
                    f"invalid value {values.get(key)!r} for '{key}': expected {ACCEPTED_RANGES[key]}"
                ) from e
            raise ConfigError(f"invalid configuration: {err['msg']}") from e

    def format_config(self, config: ExperimentConfig) -> str:
        """key=value text that parse_config reads back to the same config."""
        lines = []
        for key in ExperimentConfig.model_fields:
            value = getattr(config, key)
            if isinstance(value, bool):
                text = "true" if value else "false"
            elif hasattr(value, "value"):
                text = value.value
            elif isinstance(value, float):
                text = repr(value)
            else:
                text = str(value)
            lines.append(f"{key}={text}")
        return "\n".join(lines) + "\n"

    def preset_densification_sweep(
        self, total_ues: int = 108, base: Optional[ExperimentConfig] = None
    ) -> list[ExperimentConfig]:
        """
        Every scheme on every cell type at a fixed population size.

        The population splits as n_pairs = total // 3 and n_cues = total - 2 * n_pairs
        (108 UEs: 36 CUEs + 36 pairs). All configs share the base seed.
        """
        if total_ues < 1:
            raise ValidationError("total_ues must be at least 1")
        base = base or ExperimentConfig()
        n_pairs = total_ues // 3
        n_cues = total_ues - 2 * n_pairs
        return [
            base.model_copy(
                update={"scheme": scheme, "cell_type": cell_type, "n_cues": n_cues, "n_pairs": n_pairs}
            )
            for scheme in SharingScheme
            for cell_type in range(1, 6)
        ]

    def preset_ue_density_sweep(
        self,
        pair_counts: Optional[Sequence[int]] = None,
        base: Optional[ExperimentConfig] = None,
    ) -> list[ExperimentConfig]:
        """Overlay grid: 36 CUEs, swept pair counts, all five cell types."""
        counts = list(pair_counts or settings.default_pair_sweep)
        if any(c < 0 for c in counts):
            raise ValidationError("pair counts must be nonnegative")
        base = base or ExperimentConfig()
        return [
            base.model_copy(
                update={
                    "scheme": SharingScheme.OVERLAY,
                    "cell_type": cell_type,
                    "n_cues": 36,
                    "n_pairs": n_pairs,
                }
            )
            for cell_type in range(1, 6)
            for n_pairs in counts
        ]

    def run_experiment(
        self, configs: Sequence[ExperimentConfig], workers: Optional[int] = None
    ) -> list[ReplicationRecord]:
        """
        Enabled run and disabled baseline per (config, replication).

        Replication r uses seed = config.seed + r. Records come back in config
        order, then replication order, whatever the worker count.
        """
        jobs = [(config, rep) for config in configs for rep in range(config.replications)]
        workers = workers or settings.max_workers
        logger.info("Running %d replications on %d worker(s)", len(jobs), workers)
        if workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                return list(pool.map(_run_replication, jobs))
        return [_run_replication(job) for job in jobs]

    def run_replication(self, config: ExperimentConfig, replication: int = 0) -> ReplicationRecord:
        return _run_replication((config, replication))

    def to_frame(self, records: Iterable[ReplicationRecord]) -> pd.DataFrame:
        return pd.DataFrame([r.row() for r in records], columns=CSV_COLUMNS)

    def emit_csv(
        self,
        records: Sequence[ReplicationRecord],
        path: str | Path,
        pair_sweep: Optional[Sequence[int]] = None,
    ) -> Path:
        """
        Write one row per (config, replication) plus a `<path>.meta.json` sidecar.

        Raises:
            ValidationError: if the path is not writable
        """
        path = Path(path)
        frame = self.to_frame(records)
        meta = {
            "columns": CSV_COLUMNS,
            "rows": len(frame),
            "avg_total_ul_bps": "network-wide UL sum per snapshot, averaged over snapshots",
            "avg_pair_bps": "per-pair UL throughput averaged over pairs and snapshots",
            "avg_cue_dl_bps": "per-CUE DL throughput averaged over CUEs and snapshots",
            "gains": "percent, enabled vs D2D-disabled baseline on the same seed; nan when undefined",
            "dl_allocation": "DL slot to the CM pair of the cell, else round-robin over its legacy CUEs",
            "pair_sweep": list(pair_sweep) if pair_sweep is not None else None,
            "pair_sweep_note": "pair counts are a default grid, not read off a published axis",
        }
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            frame.to_csv(path, index=False, na_rep="nan")
            Path(f"{path}.meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        except OSError as e:
            logger.error("Could not write results to %s: %s", path, e)
            raise ValidationError(f"cannot write results to {path}: {e}") from e
        logger.info("Wrote %d rows to %s", len(frame), path)
        return path

    def summarize(self, frame: pd.DataFrame) -> pd.DataFrame:
        """Means over replications per (scheme, cell_type, n_pairs)."""
        metrics = [c for c in CSV_COLUMNS if c.startswith(("avg_", "g_"))]
        return (
            frame.groupby(["scheme", "cell_type", "n_pairs"], sort=True)[metrics]
            .mean()
            .reset_index()
        )

    @staticmethod
    def _ordered(
        claim: str,
        lower_label: str,
        upper_label: str,
        lower: pd.Series,
        upper: pd.Series,
    ) -> TrendCheck:
        """Claim upper >= lower on paired samples; violated only if significant."""
        paired = pd.concat([lower.rename("lo"), upper.rename("hi")], axis=1, join="inner").dropna()
        lo, hi = paired["lo"].to_numpy(), paired["hi"].to_numpy()
        lo_mean = float(lo.mean()) if lo.size else math.nan
        hi_mean = float(hi.mean()) if hi.size else math.nan
        p_value = math.nan
        if lo.size >= 2 and not np.array_equal(lo, hi):
            p_value = float(stats.ttest_rel(hi, lo, alternative="less").pvalue)
        if math.isnan(p_value):
            holds = not (hi_mean < lo_mean)
        else:
            holds = p_value >= SIGNIFICANCE
        return TrendCheck(claim, lower_label, upper_label, lo_mean, hi_mean, p_value, holds)

    def trend_report(self, frame: pd.DataFrame) -> list[TrendCheck]:
        """
        Ordinal checks over replication results.

        Total UL nondecreasing in eNB density and direct gain nonincreasing in it
        (per scheme), Underlay1 direct gain at least Overlay's (per cell type), and
        Overlay total gain nondecreasing in the pair count (per cell type).
        """
        checks: list[TrendCheck] = []
        df = frame.copy()
        n_pairs_mode = df["n_pairs"].mode()
        fixed = df[df["n_pairs"] == n_pairs_mode.iloc[0]] if len(n_pairs_mode) else df

        def series(sub: pd.DataFrame, column: str) -> pd.Series:
            return sub.set_index("seed")[column]

        for scheme, sub in fixed.groupby("scheme"):
            types = sorted(sub["cell_type"].unique())
            for lo_t, hi_t in zip(types, types[1:]):
                lo = sub[sub["cell_type"] == lo_t]
                hi = sub[sub["cell_type"] == hi_t]
                checks.append(
                    self._ordered(
                        f"{scheme}: total UL nondecreasing in eNB density",
                        f"type {lo_t}", f"type {hi_t}",
                        series(lo, "avg_total_ul_bps"), series(hi, "avg_total_ul_bps"),
                    )
                )
                checks.append(
                    self._ordered(
                        f"{scheme}: direct gain nonincreasing in eNB density",
                        f"type {hi_t}", f"type {lo_t}",
                        series(hi, "g_dir_pct"), series(lo, "g_dir_pct"),
                    )
                )

        for cell_type, sub in fixed.groupby("cell_type"):
            overlay = sub[sub["scheme"] == SharingScheme.OVERLAY.value]
            underlay1 = sub[sub["scheme"] == SharingScheme.UNDERLAY1.value]
            if len(overlay) and len(underlay1):
                checks.append(
                    self._ordered(
                        f"type {cell_type}: Underlay1 direct gain >= Overlay",
                        "overlay", "underlay1",
                        series(overlay, "g_dir_pct"), series(underlay1, "g_dir_pct"),
                    )
                )

        overlay = df[df["scheme"] == SharingScheme.OVERLAY.value]
        for cell_type, sub in overlay.groupby("cell_type"):
            counts = sorted(sub["n_pairs"].unique())
            for lo_n, hi_n in zip(counts, counts[1:]):
                checks.append(
                    self._ordered(
                        f"type {cell_type}: Overlay total gain nondecreasing in UE count",
                        f"{lo_n} pairs", f"{hi_n} pairs",
                        series(sub[sub["n_pairs"] == lo_n], "g_tot_pct"),
                        series(sub[sub["n_pairs"] == hi_n], "g_tot_pct"),
                    )
                )
        return checks


experiment_service = ExperimentService()
