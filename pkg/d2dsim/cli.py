"""Command-line entry point: single runs and the preset sweeps."""
import argparse
import logging
import sys
from typing import Optional, Sequence

from d2dsim import __version__
from d2dsim.config import settings
from d2dsim.core.exceptions import AppException
from d2dsim.core.logging import setup_logging
from d2dsim.services.experiment_service import experiment_service

logger = logging.getLogger(__name__)

COMMANDS = ("run", "sweep-densification", "sweep-ues")


def _pair_counts(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="d2dsim",
        description="Multi-cell D2D joint mode selection and scheduling simulator",
    )
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="key=value configuration file")
    ap.add_argument("--scheme", help="overlay | underlay1 | underlay2")
    ap.add_argument("--cell-type", dest="cell_type", type=int)
    ap.add_argument("--cues", dest="n_cues", type=int)
    ap.add_argument("--pairs", dest="n_pairs", type=int)
    ap.add_argument("--snapshots", type=int)
    ap.add_argument("--reps", dest="replications", type=int)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--policy", help="round_robin | proportional_fairness")
    ap.add_argument("--out", dest="output", help="CSV output path")
    ap.add_argument("--workers", type=int, default=None, help="worker processes")
    ap.add_argument("--total-ues", dest="total_ues", type=int, default=108)
    ap.add_argument("--pair-counts", dest="pair_counts", type=_pair_counts, default=None)
    ap.add_argument("--summary", action="store_true", help="print group means and trend checks")
    ap.add_argument("--log-level", dest="log_level", default=settings.log_level)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    overrides = {
        key: getattr(args, key)
        for key in (
            "scheme", "cell_type", "n_cues", "n_pairs", "snapshots",
            "replications", "seed", "policy", "output",
        )
    }
    try:
        config = experiment_service.parse_config(path=args.config, overrides=overrides)
        pair_sweep = None
        if args.command == "run":
            configs = [config]
        elif args.command == "sweep-densification":
            configs = experiment_service.preset_densification_sweep(args.total_ues, config)
        else:
            pair_sweep = args.pair_counts or settings.default_pair_sweep
            configs = experiment_service.preset_ue_density_sweep(pair_sweep, config)
        logger.info("%s: %d configuration(s)", args.command, len(configs))

        records = experiment_service.run_experiment(configs, args.workers)
        path = experiment_service.emit_csv(records, config.output, pair_sweep=pair_sweep)
        print(f"wrote {len(records)} rows to {path}")

        if args.summary:
            frame = experiment_service.to_frame(records)
            print(experiment_service.summarize(frame).to_string(index=False))
            for check in experiment_service.trend_report(frame):
                verdict = "holds" if check.holds else "VIOLATED"
                print(
                    f"{verdict:8s} {check.claim}: {check.lower}={check.lower_mean:.6g} "
                    f"{check.upper}={check.upper_mean:.6g} p={check.p_value:.3g}"
                )
    except AppException as e:
        print(f"error: {e.detail}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
