"""Link budget, SINR, Shannon capacity and boundary-edge interference CDFs."""
import hashlib
import logging
import math
from pathlib import Path
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike

from d2dsim.config import settings
from d2dsim.core.exceptions import CalibrationError, ValidationError
from d2dsim.core.units import dbm_to_mw, mw_to_dbm
from d2dsim.models.domain import SQRT3, Cell, CellLayout, EmpiricalCdf, LinkSample
from d2dsim.models.enums import LinkDirection
from d2dsim.models.schemas import RadioParams
from d2dsim.services.topology_service import topology_service

logger = logging.getLogger(__name__)


class ChannelService:
    """Service for deterministic link budgets and boundary interference."""

    def path_loss_db(self, distance_m: ArrayLike, params: RadioParams) -> np.ndarray | float:
        """Log-distance path loss, distance clamped to min_distance."""
        d = np.maximum(np.asarray(distance_m, dtype=float), params.min_distance_m)
        loss = params.pathloss_ref_db + 10.0 * params.pathloss_exponent * np.log10(d)
        return float(loss) if loss.ndim == 0 else loss

    def noise_power_dbm(self, params: RadioParams) -> float:
        return (
            params.noise_density_dbm_hz
            + 10.0 * math.log10(params.bandwidth_hz)
            + params.noise_figure_db
        )

    def noise_power_mw(self, params: RadioParams) -> float:
        return float(dbm_to_mw(self.noise_power_dbm(params)))

    def rx_power_dbm(self, link: LinkSample, params: RadioParams) -> float:
        """tx power + both antenna gains - path loss."""
        return (
            link.tx_power_dbm
            + link.tx_gain_dbi
            + link.rx_gain_dbi
            - float(self.path_loss_db(link.distance_m, params))
        )

    def received_mw(
        self,
        tx_dbm: ArrayLike,
        gains_db: ArrayLike,
        distance_m: ArrayLike,
        params: RadioParams,
    ) -> np.ndarray:
        """Vectorized received power in mW (gains_db = tx gain + rx gain)."""
        rx_dbm = np.asarray(tx_dbm, dtype=float) + np.asarray(gains_db, dtype=float) - np.asarray(
            self.path_loss_db(distance_m, params)
        )
        return np.asarray(dbm_to_mw(rx_dbm))

    def sinr_linear(
        self,
        signal_dbm: float,
        interferers_mw: ArrayLike,
        params: RadioParams,
    ) -> float:
        """Signal over the sum of interferers plus thermal noise, all in mW."""
        interference = math.fsum(np.asarray(interferers_mw, dtype=float).ravel())
        return float(dbm_to_mw(signal_dbm)) / (interference + self.noise_power_mw(params))

    def capacity_bps(self, sinr: ArrayLike, bandwidth_hz: float) -> np.ndarray | float:
        """Shannon capacity B * log2(1 + sinr)."""
        s = np.asarray(sinr, dtype=float)
        if np.any(s < 0):
            raise ValidationError("SINR must be nonnegative")
        cap = bandwidth_hz * np.log2(1.0 + s)
        return float(cap) if cap.ndim == 0 else cap

    def link_capacity(
        self,
        signal_mw: np.ndarray,
        interference_mw: np.ndarray,
        params: RadioParams,
    ) -> np.ndarray:
        """Vectorized capacity of links given received signal and interference in mW."""
        sinr = np.asarray(signal_mw) / (np.asarray(interference_mw) + self.noise_power_mw(params))
        return np.asarray(self.capacity_bps(sinr, params.bandwidth_hz), dtype=float)

    def interior_cell(self, layout: CellLayout) -> Cell:
        """Cell with the most physical neighbors (lowest id on ties)."""
        best = max(layout.cells, key=lambda c: (len(layout.neighbors(c.cell_id)), -c.cell_id))
        return best

    def _adjacent_cells(self, layout: CellLayout, center: Cell) -> list[Cell]:
        neighbors = [layout.cell(i) for i in layout.neighbors(center.cell_id)]
        if neighbors:
            return neighbors
        # No physical neighbor: one synthetic cell an inter-site distance away.
        offset = SQRT3 * center.radius_m
        synthetic = Cell(
            cell_id=0,
            center=(center.center[0], center.center[1] + offset),
            radius_m=center.radius_m,
            enb_max_power_dbm=center.enb_max_power_dbm,
            enb_antenna_gain_dbi=center.enb_antenna_gain_dbi,
            ue_max_power_dbm=center.ue_max_power_dbm,
            ue_antenna_gain_dbi=center.ue_antenna_gain_dbi,
        )
        return [synthetic]

    def calibrate_edge_cdf(
        self,
        layout: CellLayout,
        params: RadioParams,
        rng: np.random.Generator,
        n_samples: int,
        direction: LinkDirection = LinkDirection.UPLINK,
        power_offset_db: float = 0.0,
    ) -> EmpiricalCdf:
        """
        Monte-Carlo CDF of the interference one adjacent cell causes at an interior cell.

        Uplink: a UE placed uniformly in a randomly chosen adjacent cell, at UE max
        power, received by the interior eNB. Downlink: an adjacent eNB received by a
        UE placed uniformly in the interior cell. Single-cell layouts use one
        synthetic neighbor.

        Args:
            layout: Layout whose geometry and power table are used
            params: Radio parameters
            rng: Random source consumed by the calibration only
            n_samples: Number of samples, at least 100
            direction: Link direction to calibrate
            power_offset_db: Offset added to the interferer's transmit power

        Returns:
            EmpiricalCdf of per-neighbor interference in mW
        """
        if n_samples < 100:
            raise ValidationError(f"n_samples must be at least 100, got {n_samples}")
        center = self.interior_cell(layout)
        adjacent = self._adjacent_cells(layout, center)
        picks = rng.integers(0, len(adjacent), size=n_samples)
        neighbor_centers = np.array([c.center for c in adjacent])[picks]
        ct = layout.cell_type

        offsets = topology_service.hexagon_offsets(center.radius_m, n_samples, rng)
        if direction is LinkDirection.UPLINK:
            tx_points = neighbor_centers + offsets
            distances = np.hypot(*(tx_points - np.asarray(center.center)).T)
            tx_dbm = ct.ue_max_power_dbm + power_offset_db
            gains = ct.ue_antenna_gain_dbi + ct.enb_antenna_gain_dbi
        else:
            rx_points = np.asarray(center.center) + offsets
            distances = np.hypot(*(rx_points - neighbor_centers).T)
            tx_dbm = ct.enb_max_power_dbm + power_offset_db
            gains = ct.enb_antenna_gain_dbi + ct.ue_antenna_gain_dbi

        samples = self.received_mw(tx_dbm, gains, distances, params)
        logger.debug(
            "Calibrated %s edge CDF for cell type %d: %d samples, median %.3e mW",
            direction.value, ct.id, n_samples, float(np.median(samples)),
        )
        return EmpiricalCdf(samples=samples, direction=direction)

    def sample_boundary_interference(
        self,
        cdf: Optional[EmpiricalCdf],
        missing_neighbors: int,
        rng: np.random.Generator,
    ) -> float:
        """Sum of `missing_neighbors` i.i.d. inverse-CDF draws (mW)."""
        if missing_neighbors < 0:
            raise ValidationError("missing_neighbors must be nonnegative")
        if cdf is None or cdf.size == 0:
            raise CalibrationError("boundary interference CDF is empty; run calibration first")
        if missing_neighbors == 0:
            return 0.0
        return math.fsum(cdf.sample(rng, missing_neighbors))

    def save_cdf(self, cdf: EmpiricalCdf, path: str | Path) -> None:
        """Write one mW value per line, ascending."""
        np.savetxt(path, cdf.samples, fmt="%.17g")

    def load_cdf(
        self, path: str | Path, direction: LinkDirection = LinkDirection.UPLINK
    ) -> EmpiricalCdf:
        try:
            values = np.loadtxt(path, dtype=float, ndmin=1)
        except (OSError, ValueError) as e:
            raise CalibrationError(f"cannot read boundary CDF from {path}: {e}") from e
        if values.size == 0:
            raise CalibrationError(f"boundary CDF file {path} is empty")
        return EmpiricalCdf(samples=values, direction=direction)

    def edge_cdf(
        self,
        layout: CellLayout,
        params: RadioParams,
        rng: np.random.Generator,
        direction: LinkDirection,
        n_samples: Optional[int] = None,
        cache_tag: str = "",
    ) -> EmpiricalCdf:
        """Calibrated CDF, read from / written to settings.calibration_dir when set."""
        n_samples = n_samples or settings.edge_cdf_samples
        if not settings.calibration_dir:
            return self.calibrate_edge_cdf(layout, params, rng, n_samples, direction)

        digest = hashlib.sha1(params.model_dump_json().encode()).hexdigest()[:10]
        name = f"edge_{direction.value}_type{layout.cell_type.id}_n{n_samples}_{digest}{cache_tag}.txt"
        path = Path(settings.calibration_dir) / name
        if path.exists():
            logger.debug("Loading boundary CDF from %s", path)
            return self.load_cdf(path, direction)
        logger.info("Boundary CDF cache miss, calibrating %s", path.name)
        cdf = self.calibrate_edge_cdf(layout, params, rng, n_samples, direction)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.save_cdf(cdf, path)
        return cdf

    def cell_edge_snr_db(self, layout: CellLayout, params: RadioParams) -> float:
        """Uplink SNR of a UE at the cell-edge distance (one radius), no interference."""
        ct = layout.cell_type
        rx = self.rx_power_dbm(
            LinkSample(ct.ue_max_power_dbm, ct.ue_antenna_gain_dbi, ct.enb_antenna_gain_dbi, ct.radius_m),
            params,
        )
        return float(mw_to_dbm(self.sinr_linear(rx, [], params)))


channel_service = ChannelService()
