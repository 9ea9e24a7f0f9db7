"""Hexagonal multi-cell layouts, UE drops and densification metrics."""
import logging
import math
from typing import Optional, Sequence

import numpy as np

from d2dsim.config import settings
from d2dsim.core.exceptions import GeometryError, ValidationError
from d2dsim.models.domain import (
    CELL_TYPES,
    SQRT3,
    Cell,
    CellLayout,
    CellType,
    PairRecord,
    Ue,
    UePopulation,
)
from d2dsim.models.enums import DeploymentClass, UeRole

logger = logging.getLogger(__name__)

Point = tuple[float, float]

# Axial (q, r) offsets of the compact flat-topped packings, one list per cell count.
PACKINGS: dict[int, list[tuple[int, int]]] = {
    1: [(0, 0)],
    2: [(0, 0), (1, 0)],
    4: [(0, 0), (1, 0), (0, 1), (1, -1)],
    6: [(0, 0), (1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1)],
    9: [(0, 0), (1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1), (2, -1), (1, 1)],
}


class TopologyService:
    """Service for cell layouts and user placement."""

    def build_layout(self, cell_type: CellType | int) -> CellLayout:
        """
        Build the compact flat-topped hexagonal packing of a cell type.

        Args:
            cell_type: CellType row or its id (1..5)

        Returns:
            CellLayout centered on the centroid of the cell centers
        """
        if isinstance(cell_type, int):
            if cell_type not in CELL_TYPES:
                raise ValidationError(f"cell_type must be in 1..5, got {cell_type}")
            cell_type = CELL_TYPES[cell_type]
        axial = PACKINGS[cell_type.num_cells]
        r = cell_type.radius_m
        centers = np.array([(1.5 * r * q, SQRT3 * r * (s + q / 2.0)) for q, s in axial])
        centers -= centers.mean(axis=0)
        cells = tuple(
            Cell(
                cell_id=i + 1,
                center=(float(x), float(y)),
                radius_m=r,
                enb_max_power_dbm=cell_type.enb_max_power_dbm,
                enb_antenna_gain_dbi=cell_type.enb_antenna_gain_dbi,
                ue_max_power_dbm=cell_type.ue_max_power_dbm,
                ue_antenna_gain_dbi=cell_type.ue_antenna_gain_dbi,
            )
            for i, (x, y) in enumerate(centers)
        )
        return CellLayout(cell_type=cell_type, cells=cells, total_area_km2=settings.coverage_area_km2)

    def sample_in_cells(
        self, layout: CellLayout, n: int, rng: np.random.Generator
    ) -> np.ndarray:
        """Draw n points i.i.d. uniform over the union of the hexagons."""
        if n == 0:
            return np.empty((0, 2))
        # Equal-area cells: pick the cell uniformly, then rejection-sample its hexagon.
        cell_idx = rng.integers(0, layout.num_cells, size=n)
        return layout.centers[cell_idx] + self.hexagon_offsets(layout.radius_m, n, rng)

    def hexagon_offsets(self, radius: float, n: int, rng: np.random.Generator) -> np.ndarray:
        """Uniform offsets inside a flat-topped hexagon centered at the origin."""
        half_h = SQRT3 / 2.0 * radius
        offsets = np.empty((n, 2))
        pending = np.arange(n)
        for _ in range(settings.hexagon_retry_budget):
            if pending.size == 0:
                break
            cand = np.column_stack(
                (rng.uniform(-radius, radius, pending.size), rng.uniform(-half_h, half_h, pending.size))
            )
            inside = SQRT3 * np.abs(cand[:, 0]) + np.abs(cand[:, 1]) <= SQRT3 * radius
            offsets[pending[inside]] = cand[inside]
            pending = pending[~inside]
        if pending.size:
            raise GeometryError(f"could not place {pending.size} points inside the hexagon")
        return offsets

    def sample_receivers(
        self,
        layout: CellLayout,
        tx_positions: np.ndarray,
        d_max: float,
        rng: np.random.Generator,
    ) -> np.ndarray:
        """Draw one receiver per transmitter, uniform in the coverage-clipped d_max disc."""
        n = len(tx_positions)
        rx = np.empty((n, 2))
        pending = np.arange(n)
        for _ in range(settings.receiver_retry_budget):
            if pending.size == 0:
                break
            radius = d_max * np.sqrt(rng.random(pending.size))
            angle = rng.uniform(0.0, 2.0 * math.pi, pending.size)
            cand = tx_positions[pending] + np.column_stack(
                (radius * np.cos(angle), radius * np.sin(angle))
            )
            inside = layout.locate(cand) > 0
            rx[pending[inside]] = cand[inside]
            pending = pending[~inside]
        if pending.size:
            raise GeometryError(
                f"receiver placement failed for {pending.size} pairs after "
                f"{settings.receiver_retry_budget} attempts (d_max={d_max} m)"
            )
        return rx

    def drop_ues(
        self,
        layout: CellLayout,
        n_cues: int,
        n_pairs: int,
        rng: np.random.Generator,
        d_max: Optional[float] = None,
    ) -> UePopulation:
        """
        Drop legacy CUEs and potential D2D pairs uniformly over the layout.

        Pair receivers are uniform in the disc of radius d_max (default: cell
        radius) around their transmitter, clipped to the coverage area.
        """
        if n_cues < 0 or n_pairs < 0:
            raise ValidationError("n_cues and n_pairs must be nonnegative")
        if n_cues + n_pairs < 1:
            raise ValidationError("at least one CUE or pair is required")
        d_max = layout.radius_m if d_max is None else d_max
        cue_pos = self.sample_in_cells(layout, n_cues, rng)
        tx_pos = self.sample_in_cells(layout, n_pairs, rng)
        rx_pos = self.sample_receivers(layout, tx_pos, d_max, rng)
        return self._assemble(layout, cue_pos, tx_pos, rx_pos)

    def place_population(
        self,
        layout: CellLayout,
        cue_positions: Sequence[Point],
        pair_positions: Sequence[tuple[Point, Point]] = (),
    ) -> UePopulation:
        """Build a population from given coordinates (serving cells by containment)."""
        cue_pos = np.asarray(cue_positions, dtype=float).reshape(-1, 2)
        pairs = np.asarray(pair_positions, dtype=float).reshape(-1, 2, 2)
        population = self._assemble(layout, cue_pos, pairs[:, 0, :], pairs[:, 1, :])
        if population.K < 1:
            raise ValidationError("at least one CUE or pair is required")
        return population

    def _assemble(
        self,
        layout: CellLayout,
        cue_pos: np.ndarray,
        tx_pos: np.ndarray,
        rx_pos: np.ndarray,
    ) -> UePopulation:
        cue_cells = layout.locate(cue_pos) if len(cue_pos) else np.empty(0, dtype=int)
        tx_cells = layout.locate(tx_pos) if len(tx_pos) else np.empty(0, dtype=int)
        rx_cells = layout.locate(rx_pos) if len(rx_pos) else np.empty(0, dtype=int)
        for name, cells in (("CUE", cue_cells), ("DUE tx", tx_cells), ("DUE rx", rx_cells)):
            if np.any(cells == 0):
                raise GeometryError(f"{name} position outside the coverage area")

        cues = [
            Ue(i + 1, (float(p[0]), float(p[1])), UeRole.LEGACY_CUE, int(c))
            for i, (p, c) in enumerate(zip(cue_pos, cue_cells))
        ]
        dues: dict[int, Ue] = {}
        pairs: list[PairRecord] = []
        next_id = len(cues) + 1
        for j in range(len(tx_pos)):
            tx = Ue(next_id, (float(tx_pos[j, 0]), float(tx_pos[j, 1])), UeRole.DUE_TX, int(tx_cells[j]))
            rx = Ue(next_id + 1, (float(rx_pos[j, 0]), float(rx_pos[j, 1])), UeRole.DUE_RX, int(rx_cells[j]))
            dues[tx.ue_id] = tx
            dues[rx.ue_id] = rx
            pairs.append(
                PairRecord(
                    pair_id=j + 1,
                    tx=tx.ue_id,
                    rx=rx.ue_id,
                    tx_cell=tx.serving_cell,
                    rx_cell=rx.serving_cell,
                    distance=float(math.dist(tx.position, rx.position)),
                )
            )
            next_id += 2
        return UePopulation(cues=cues, dues=dues, pairs=pairs)

    def densification_ratio(self, layout: CellLayout, population: UePopulation) -> float:
        """eNB density over UE density on the same area, i.e. num_cells / K."""
        if population.K < 1:
            raise ValidationError("densification ratio needs at least one UE")
        return layout.num_cells / population.K

    def classify_deployment(self, ratio: float) -> DeploymentClass:
        """Fewer eNBs than UEs is a sparse deployment, otherwise dense."""
        return DeploymentClass.SPARSE if ratio < 1.0 else DeploymentClass.DENSE

    def dump_population(self, layout: CellLayout, population: UePopulation) -> str:
        """Serialize layout and population as `id,role,x_m,y_m,serving_cell` records."""
        lines = [f"# cell_type={layout.cell_type.id}"]
        for cell in layout.cells:
            lines.append(f"{cell.cell_id},enb,{cell.center[0]!r},{cell.center[1]!r},{cell.cell_id}")
        for ue in population.cues:
            lines.append(self._record(ue))
        for pair in population.pairs:
            lines.append(self._record(population.dues[pair.tx]))
            lines.append(self._record(population.dues[pair.rx]))
        return "\n".join(lines) + "\n"

    @staticmethod
    def _record(ue: Ue) -> str:
        return f"{ue.ue_id},{ue.role.value},{ue.position[0]!r},{ue.position[1]!r},{ue.serving_cell}"

    def load_population(self, text: str) -> tuple[CellLayout, UePopulation]:
        """Parse the text written by dump_population."""
        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("# cell_type="):
            raise ValidationError("population file must start with '# cell_type=<id>'")
        try:
            layout = self.build_layout(int(lines[0].split("=", 1)[1]))
        except ValueError as e:
            raise ValidationError(f"bad cell_type header: {lines[0]}") from e

        cues: list[Point] = []
        pairs: list[tuple[Point, Point]] = []
        recorded: list[int] = []
        pending_tx: Optional[Point] = None
        for lineno, line in enumerate(lines[1:], start=2):
            parts = line.split(",")
            if len(parts) != 5:
                raise ValidationError(f"line {lineno}: expected 5 fields, got {len(parts)}")
            role = parts[1]
            try:
                point = (float(parts[2]), float(parts[3]))
                serving = int(parts[4])
            except ValueError as e:
                raise ValidationError(f"line {lineno}: bad coordinate or cell in '{line}'") from e
            if role == "enb":
                continue
            if pending_tx is not None and role != UeRole.DUE_RX.value:
                raise ValidationError(f"line {lineno}: due_tx must be followed by its due_rx")
            if role == UeRole.LEGACY_CUE.value:
                cues.append(point)
            elif role == UeRole.DUE_TX.value:
                pending_tx = point
            elif role == UeRole.DUE_RX.value:
                if pending_tx is None:
                    raise ValidationError(f"line {lineno}: due_rx without a preceding due_tx")
                pairs.append((pending_tx, point))
                pending_tx = None
            else:
                raise ValidationError(f"line {lineno}: unknown role '{role}'")
            recorded.append(serving)
        if pending_tx is not None:
            raise ValidationError("trailing due_tx without its due_rx")

        population = self.place_population(layout, cues, pairs)
        located = [u.serving_cell for u in population.cues]
        for pair in population.pairs:
            located += [pair.tx_cell, pair.rx_cell]
        if located != recorded:
            raise ValidationError("serving cells in file disagree with hexagon containment")
        return layout, population


topology_service = TopologyService()
