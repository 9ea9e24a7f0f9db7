from pydantic_settings import BaseSettings
from typing import Optional


class Settings(BaseSettings):
    """Application settings loaded from environment variables."""

    # Application Configuration
    app_name: str = "D2D Simulator"
    app_version: str = "1.0.0"
    debug: bool = False
    log_level: str = "INFO"

    # CORS Configuration
    cors_origins: list[str] = [
        "http://localhost:3000",
        "http://127.0.0.1:3000",
    ]

    # Radio Configuration
    carrier_freq_ghz: float = 2.6
    bandwidth_hz: float = 5e6
    noise_density_dbm_hz: float = -174.0
    noise_figure_db: float = 7.0
    pathloss_exponent: float = 3.0
    pathloss_ref_db: Optional[float] = None  # None -> free-space loss at 1 m
    min_distance_m: float = 1.0

    # Geometry Configuration
    coverage_area_km2: float = 0.234
    receiver_retry_budget: int = 1000
    hexagon_retry_budget: int = 200  # rejection rounds for in-hexagon sampling

    # Boundary Interference Calibration
    edge_cdf_samples: int = 2000
    calibration_dir: Optional[str] = None  # cache directory for calibrated CDFs

    # Solver Configuration
    bruteforce_max_vars: int = 24

    # Experiment Harness Configuration
    max_workers: int = 1
    default_pair_sweep: list[int] = [12, 24, 36, 48]
    sweep_job_retention: int = 50  # finished sweep jobs kept in memory

    class Config:
        env_file = ".env"
        env_prefix = "D2DSIM_"
        case_sensitive = False


settings = Settings()
