"""Logging setup shared by the CLI and the API."""
import logging

LOG_FORMAT = "%(asctime)s %(levelname)s [%(name)s] %(message)s"


def setup_logging(level: str | int = "INFO") -> None:
    """
    Configure the root logger with a single stream handler.

    Safe to call more than once; later calls only change the level.

    Args:
        level: Level name ("DEBUG", "INFO", ...) or numeric level
    """
    if isinstance(level, str):
        level = level.upper()
    root = logging.getLogger()
    if not any(getattr(h, "_d2dsim", False) for h in root.handlers):
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handler._d2dsim = True  # type: ignore[attr-defined]
        root.addHandler(handler)
    root.setLevel(level)
