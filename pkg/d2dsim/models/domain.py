"""Domain types of the simulator: geometry, population, programs and results."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from d2dsim.models.enums import LinkDirection, Sense, SharingScheme, UeRole
from d2dsim.models.schemas import ExperimentConfig

SQRT3 = math.sqrt(3.0)
HEX_TOLERANCE_M = 1e-9


# Geometry
@dataclass(frozen=True)
class CellType:
    """One row of the cell-type table."""
    id: int
    radius_m: float
    num_cells: int
    enb_density: float  # per km^2, as tabulated
    enb_max_power_dbm: float
    enb_antenna_gain_dbi: float
    ue_max_power_dbm: float
    ue_antenna_gain_dbi: float

    @property
    def hexagon_area_km2(self) -> float:
        return 1.5 * SQRT3 * self.radius_m**2 / 1e6

    @property
    def coverage_km2(self) -> float:
        return self.num_cells * self.hexagon_area_km2


CELL_TYPES: dict[int, CellType] = {
    1: CellType(1, 300.0, 1, 4.3, 23.0, 3.0, 23.0, 3.0),
    2: CellType(2, 212.0, 2, 8.5, 21.0, 1.8, 21.0, 1.8),
    3: CellType(3, 150.0, 4, 17.1, 20.0, 0.0, 20.0, 0.0),
    4: CellType(4, 123.0, 6, 25.6, 17.4, 0.0, 17.4, 0.0),
    5: CellType(5, 100.0, 9, 38.5, 14.7, 0.0, 14.7, 0.0),
}


@dataclass(frozen=True)
class Cell:
    """Flat-topped hexagonal cell with its eNB at the center."""
    cell_id: int
    center: tuple[float, float]
    radius_m: float
    enb_max_power_dbm: float
    enb_antenna_gain_dbi: float
    ue_max_power_dbm: float
    ue_antenna_gain_dbi: float

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Vectorized containment test for an (n, 2) array of points."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        dx = np.abs(pts[:, 0] - self.center[0])
        dy = np.abs(pts[:, 1] - self.center[1])
        r = self.radius_m
        return (dy <= SQRT3 / 2.0 * r + HEX_TOLERANCE_M) & (
            SQRT3 * dx + dy <= SQRT3 * r + HEX_TOLERANCE_M
        )


@dataclass(frozen=True)
class CellLayout:
    cell_type: CellType
    cells: tuple[Cell, ...]
    total_area_km2: float = 0.234

    @property
    def num_cells(self) -> int:
        return len(self.cells)

    @property
    def radius_m(self) -> float:
        return self.cell_type.radius_m

    @property
    def enb_density(self) -> float:
        """eNBs per km^2 over the nominal coverage area."""
        return self.num_cells / self.total_area_km2

    @cached_property
    def centers(self) -> np.ndarray:
        return np.array([c.center for c in self.cells], dtype=float)

    def locate(self, points: np.ndarray) -> np.ndarray:
        """
        Serving cell id of each point by hexagon containment.

        Points on a shared edge go to the lowest cell id; points outside the
        coverage area get 0.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        serving = np.zeros(len(pts), dtype=int)
        for cell in reversed(self.cells):
            serving[cell.contains(pts)] = cell.cell_id
        return serving

    @cached_property
    def adjacency(self) -> dict[int, tuple[int, ...]]:
        spacing = SQRT3 * self.radius_m
        result: dict[int, tuple[int, ...]] = {}
        for cell in self.cells:
            d = np.hypot(*(self.centers - np.asarray(cell.center)).T)
            result[cell.cell_id] = tuple(
                other.cell_id
                for other, dist in zip(self.cells, d)
                if abs(dist - spacing) <= 1e-6 * spacing
            )
        return result

    def neighbors(self, cell_id: int) -> tuple[int, ...]:
        return self.adjacency[cell_id]

    def missing_neighbors(self, cell_id: int) -> int:
        """Hexagon edges without a physical neighbor cell."""
        return 6 - len(self.adjacency[cell_id])

    def cell(self, cell_id: int) -> Cell:
        return self.cells[cell_id - 1]


# Population
@dataclass(frozen=True)
class Ue:
    ue_id: int
    position: tuple[float, float]
    role: UeRole
    serving_cell: int


@dataclass(frozen=True)
class PairRecord:
    pair_id: int
    tx: int
    rx: int
    tx_cell: int
    rx_cell: int
    distance: float

    @property
    def cross_cell(self) -> bool:
        return self.tx_cell != self.rx_cell


@dataclass(eq=False)
class UePopulation:
    """Legacy CUEs and potential D2D pairs dropped over a layout."""
    cues: list[Ue]
    dues: dict[int, Ue]
    pairs: list[PairRecord]

    @property
    def n_cues(self) -> int:
        return len(self.cues)

    @property
    def n_pairs(self) -> int:
        return len(self.pairs)

    @property
    def K(self) -> int:
        return len(self.cues) + 2 * len(self.pairs)

    @cached_property
    def cue_positions(self) -> np.ndarray:
        return np.array([u.position for u in self.cues], dtype=float).reshape(-1, 2)

    @cached_property
    def cue_cells(self) -> np.ndarray:
        return np.array([u.serving_cell for u in self.cues], dtype=int)

    @cached_property
    def tx_positions(self) -> np.ndarray:
        return np.array([self.dues[p.tx].position for p in self.pairs], dtype=float).reshape(-1, 2)

    @cached_property
    def rx_positions(self) -> np.ndarray:
        return np.array([self.dues[p.rx].position for p in self.pairs], dtype=float).reshape(-1, 2)

    @cached_property
    def tx_cells(self) -> np.ndarray:
        return np.array([p.tx_cell for p in self.pairs], dtype=int)

    @cached_property
    def rx_cells(self) -> np.ndarray:
        return np.array([p.rx_cell for p in self.pairs], dtype=int)

    @cached_property
    def pair_distances(self) -> np.ndarray:
        return np.array([p.distance for p in self.pairs], dtype=float)


# Channel
@dataclass(frozen=True)
class LinkSample:
    tx_power_dbm: float
    tx_gain_dbi: float
    rx_gain_dbi: float
    distance_m: float


@dataclass(frozen=True, eq=False)
class EmpiricalCdf:
    """Sorted interference samples (mW) with inverse-CDF sampling."""
    samples: np.ndarray
    direction: LinkDirection = LinkDirection.UPLINK

    def __post_init__(self) -> None:
        values = np.sort(np.asarray(self.samples, dtype=float).ravel())
        if values.size and (values[0] < 0 or not np.all(np.isfinite(values))):
            raise ValueError("interference samples must be finite and nonnegative")
        values.setflags(write=False)
        object.__setattr__(self, "samples", values)

    @property
    def size(self) -> int:
        return int(self.samples.size)

    def quantile(self, q: float) -> float:
        return float(np.quantile(self.samples, q))

    @property
    def median(self) -> float:
        return self.quantile(0.5)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Inverse-CDF draws: u ~ U[0, 1) picks the floor(u * size)-th sample."""
        u = rng.random(n)
        idx = np.minimum((u * self.size).astype(int), self.size - 1)
        return self.samples[idx]


@dataclass
class InterferenceEstimate:
    """Lagged aggregate interference (mW) seen by each link."""
    cue_ul: np.ndarray  # at the CUE's serving eNB
    cm_ul: np.ndarray  # at eNB of the pair's tx cell
    cm_dl: np.ndarray  # at the DUE receiver from other eNBs
    dm: np.ndarray  # at the DUE receiver on the UL resource

    @classmethod
    def zeros(cls, n_cues: int, n_pairs: int) -> InterferenceEstimate:
        return cls(
            cue_ul=np.zeros(n_cues),
            cm_ul=np.zeros(n_pairs),
            cm_dl=np.zeros(n_pairs),
            dm=np.zeros(n_pairs),
        )


# Scheduling problem
@dataclass(eq=False)
class EntityUtilities:
    """Per-entity utilities (bit/s) and weight factors; CUEs first, then pairs."""
    u_leg: np.ndarray
    u_dm: np.ndarray
    u_cm: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        self.u_leg = np.asarray(self.u_leg, dtype=float).ravel()
        self.u_dm = np.asarray(self.u_dm, dtype=float).ravel()
        self.u_cm = np.asarray(self.u_cm, dtype=float).ravel()
        self.weights = np.asarray(self.weights, dtype=float).ravel()
        if self.u_dm.size != self.u_cm.size:
            raise ValueError("u_dm and u_cm must have one entry per pair")
        if self.weights.size != self.u_leg.size + self.u_dm.size:
            raise ValueError("one weight per schedulable entity is required")
        for name in ("u_leg", "u_dm", "u_cm"):
            values = getattr(self, name)
            if np.any(values < 0) or not np.all(np.isfinite(values)):
                raise ValueError(f"{name} must be finite and nonnegative")
        if np.any(self.weights <= 0) or not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite and positive")


@dataclass(eq=False)
class SnapshotProblem:
    scheme: SharingScheme
    utilities: EntityUtilities
    cue_cell: np.ndarray
    pair_tx_cell: np.ndarray
    pair_rx_cell: np.ndarray
    pair_distance: np.ndarray
    d_max: float
    force_cellular: bool = False

    def __post_init__(self) -> None:
        self.cue_cell = np.asarray(self.cue_cell, dtype=int).ravel()
        self.pair_tx_cell = np.asarray(self.pair_tx_cell, dtype=int).ravel()
        self.pair_rx_cell = np.asarray(self.pair_rx_cell, dtype=int).ravel()
        self.pair_distance = np.asarray(self.pair_distance, dtype=float).ravel()

    @property
    def n_cues(self) -> int:
        return int(self.cue_cell.size)

    @property
    def n_pairs(self) -> int:
        return int(self.pair_tx_cell.size)


@dataclass(frozen=True)
class Constraint:
    """Linear row sum(coef * var) <sense> rhs with integer coefficients."""
    name: str
    terms: tuple[tuple[int, int], ...]  # (variable index, coefficient)
    sense: Sense
    rhs: int

    def activity(self, values: np.ndarray) -> int:
        return int(sum(coef * int(values[i]) for i, coef in self.terms))

    def satisfied(self, values: np.ndarray) -> bool:
        lhs = self.activity(values)
        return lhs <= self.rhs if self.sense is Sense.LE else lhs == self.rhs


@dataclass(eq=False)
class ProgramStructure:
    """
    Variables, entity blocks and constraint rows of a snapshot program.

    Independent of utilities and weights, so one run builds it once and only
    swaps the objective per snapshot.
    """
    variables: tuple[str, ...]
    blocks: tuple[tuple[int, ...], ...]
    constraints: tuple[Constraint, ...]
    n_cues: int = 0
    n_pairs: int = 0

    @property
    def num_vars(self) -> int:
        return len(self.variables)

    def y_index(self, entity: int) -> int:
        if entity < self.n_cues:
            return entity
        return self.n_cues + 3 * (entity - self.n_cues)

    def x_index(self, pair: int) -> int:
        return self.n_cues + 3 * pair + 1

    def w_index(self, pair: int) -> int:
        return self.n_cues + 3 * pair + 2


@dataclass(eq=False)
class BinaryProgram:
    """Maximize objective . v subject to the structure's rows, v binary."""
    structure: ProgramStructure
    objective: np.ndarray

    def __post_init__(self) -> None:
        self.objective = np.asarray(self.objective, dtype=float).ravel()
        if self.objective.size != self.structure.num_vars:
            raise ValueError("one objective coefficient per variable is required")
        if not np.all(np.isfinite(self.objective)):
            raise ValueError("objective coefficients must be finite")

    @property
    def variables(self) -> tuple[str, ...]:
        return self.structure.variables

    @property
    def constraints(self) -> tuple[Constraint, ...]:
        return self.structure.constraints

    @property
    def num_vars(self) -> int:
        return self.structure.num_vars

    def value_of(self, values: np.ndarray) -> float:
        """Canonical objective value: exactly rounded sum of selected coefficients."""
        return math.fsum(float(c) for c, v in zip(self.objective, values) if v)


@dataclass(eq=False)
class Decision:
    """Scheduling flags per entity (CUEs, then pairs) and DM flags per pair."""
    y: np.ndarray
    x: np.ndarray
    objective_value: float
    values: np.ndarray
    nodes: int = 0

    @classmethod
    def from_values(
        cls, program: BinaryProgram, values: np.ndarray, nodes: int = 0
    ) -> Decision:
        s = program.structure
        values = np.asarray(values, dtype=np.int8)
        y = np.array([values[s.y_index(e)] for e in range(s.n_cues + s.n_pairs)], dtype=np.int8)
        x = np.array([values[s.x_index(j)] for j in range(s.n_pairs)], dtype=np.int8)
        return cls(y=y, x=x, objective_value=program.value_of(values), values=values, nodes=nodes)


# Simulation
@dataclass(eq=False)
class ThroughputLedger:
    """Cumulative per-entity credits. UL entries: CUEs, then pairs."""
    ul_bits: np.ndarray
    dl_bits: np.ndarray
    scheduled: np.ndarray
    dm_count: np.ndarray
    snapshots: int = 0

    @classmethod
    def empty(cls, n_cues: int, n_pairs: int) -> ThroughputLedger:
        return cls(
            ul_bits=np.zeros(n_cues + n_pairs),
            dl_bits=np.zeros(n_cues),
            scheduled=np.zeros(n_cues + n_pairs, dtype=int),
            dm_count=np.zeros(n_pairs, dtype=int),
        )


@dataclass(eq=False)
class RunResult:
    avg_total_ul_bps: float
    avg_pair_bps: float
    avg_cue_dl_bps: float
    dm_fraction: float
    densification_ratio: float
    enb_density: float
    ledger: ThroughputLedger
    config: ExperimentConfig
    seed: int
    d2d_enabled: bool = True

    def same_metrics(self, other: RunResult) -> bool:
        """Bit-identical averages and ledgers."""
        return (
            self.avg_total_ul_bps == other.avg_total_ul_bps
            and self.avg_pair_bps == other.avg_pair_bps
            and self.avg_cue_dl_bps == other.avg_cue_dl_bps
            and self.dm_fraction == other.dm_fraction
            and np.array_equal(self.ledger.ul_bits, other.ledger.ul_bits)
            and np.array_equal(self.ledger.dl_bits, other.ledger.dl_bits)
            and np.array_equal(self.ledger.scheduled, other.ledger.scheduled)
            and np.array_equal(self.ledger.dm_count, other.ledger.dm_count)
        )


@dataclass(frozen=True)
class GainReport:
    g_dir: float
    g_off: float
    g_tot: float
    a1: float = 0.5
    a2: float = 0.5


@dataclass(frozen=True)
class TrendCheck:
    """Outcome of one ordinal claim over replication means."""
    claim: str
    lower: str
    upper: str
    lower_mean: float
    upper_mean: float
    p_value: float
    holds: bool
    note: Optional[str] = field(default=None)


