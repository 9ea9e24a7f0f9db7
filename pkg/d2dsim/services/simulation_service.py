"""Snapshot loop, UL/DL throughput accounting and D2D gain metrics."""
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from d2dsim.core.exceptions import SolverError, ValidationError
from d2dsim.models.domain import (
    CellLayout,
    Decision,
    EmpiricalCdf,
    GainReport,
    InterferenceEstimate,
    ProgramStructure,
    RunResult,
    SnapshotProblem,
    ThroughputLedger,
    UePopulation,
)
from d2dsim.models.enums import GainSource, LinkDirection, SchedulerPolicy, SharingScheme
from d2dsim.models.schemas import ExperimentConfig, RadioParams
from d2dsim.services.channel_service import channel_service
from d2dsim.services.rrm_service import rrm_service
from d2dsim.services.topology_service import topology_service

logger = logging.getLogger(__name__)

GAIN_SOURCES: dict[SharingScheme, dict[str, tuple[GainSource, ...]]] = {
    SharingScheme.OVERLAY: {
        "g_dir": (GainSource.PROXIMITY,),
        "g_off": (GainSource.HOP,),
    },
    SharingScheme.UNDERLAY1: {
        "g_dir": (GainSource.PROXIMITY, GainSource.REUSE),
        "g_off": (GainSource.HOP,),
    },
    SharingScheme.UNDERLAY2: {
        "g_dir": (GainSource.PROXIMITY, GainSource.REUSE),
        "g_off": (GainSource.REUSE,),
    },
}


@dataclass(eq=False)
class SimulationState:
    """Serial state carried by one run from snapshot to snapshot."""
    layout: CellLayout
    population: UePopulation
    params: RadioParams
    scheme: SharingScheme
    policy: SchedulerPolicy
    ledger: ThroughputLedger
    interference: InterferenceEstimate
    boundary_rng: np.random.Generator
    ul_cdf: Optional[EmpiricalCdf] = None
    dl_cdf: Optional[EmpiricalCdf] = None
    force_cellular: bool = False
    edge_interference: bool = True
    d_max: Optional[float] = None
    structure: Optional[ProgramStructure] = None
    dl_pointer: dict[int, int] = field(default_factory=dict)
    snapshot: int = 0

    def __post_init__(self) -> None:
        if self.d_max is None:
            self.d_max = self.layout.radius_m
        cells = self.population.cue_cells
        self.cues_by_cell = {
            c.cell_id: np.flatnonzero(cells == c.cell_id) for c in self.layout.cells
        }


@dataclass(eq=False)
class SnapshotOutcome:
    decision: Decision
    ul_credit: np.ndarray  # per entity, CUEs then pairs
    dl_grants: dict[int, tuple[str, int, float]]  # cell -> (kind, index, DL bit/s)
    ul_transmitters: dict[int, int]  # cell -> UL transmissions


class SimulationService:
    """Service driving the joint mode selection and scheduling loop."""

    def new_state(
        self,
        config: ExperimentConfig,
        d2d_enabled: bool = True,
        population: Optional[UePopulation] = None,
    ) -> SimulationState:
        """Layout, drop, calibration and random streams for one run."""
        layout = topology_service.build_layout(config.cell_type)
        params = RadioParams.from_settings()
        drop_ss, ul_ss, dl_ss, boundary_ss = np.random.SeedSequence(config.seed).spawn(4)
        if population is None:
            population = topology_service.drop_ues(
                layout, config.n_cues, config.n_pairs, np.random.default_rng(drop_ss)
            )
        ul_cdf = dl_cdf = None
        if config.edge_interference:
            tag = f"_seed{config.seed}"
            ul_cdf = channel_service.edge_cdf(
                layout, params, np.random.default_rng(ul_ss), LinkDirection.UPLINK, cache_tag=tag
            )
            dl_cdf = channel_service.edge_cdf(
                layout, params, np.random.default_rng(dl_ss), LinkDirection.DOWNLINK, cache_tag=tag
            )
        return SimulationState(
            layout=layout,
            population=population,
            params=params,
            scheme=config.scheme,
            policy=config.policy,
            ledger=ThroughputLedger.empty(population.n_cues, population.n_pairs),
            interference=InterferenceEstimate.zeros(population.n_cues, population.n_pairs),
            boundary_rng=np.random.default_rng(boundary_ss),
            ul_cdf=ul_cdf,
            dl_cdf=dl_cdf,
            force_cellular=not d2d_enabled,
            edge_interference=config.edge_interference,
        )

    def _boundary_draws(self, state: SimulationState) -> tuple[np.ndarray, np.ndarray]:
        n = state.layout.num_cells
        if not state.edge_interference:
            return np.zeros(n), np.zeros(n)
        missing = [state.layout.missing_neighbors(c.cell_id) for c in state.layout.cells]
        ul = [
            channel_service.sample_boundary_interference(state.ul_cdf, m, state.boundary_rng)
            for m in missing
        ]
        dl = [
            channel_service.sample_boundary_interference(state.dl_cdf, m, state.boundary_rng)
            for m in missing
        ]
        return np.array(ul), np.array(dl)

    def run_snapshot(self, state: SimulationState) -> SnapshotOutcome:
        """
        One UL+DL scheduling interval.

        Utilities from the lagged interference, program for the active scheme,
        exact solve, UL credits, DL grant per cell (claimed by a CM pair or handed
        round-robin to a legacy CUE), then the interference estimate for the next
        snapshot.
        """
        pop, layout, params = state.population, state.layout, state.params
        n_cues, n_pairs = pop.n_cues, pop.n_pairs

        weights = rrm_service.update_weights(state.ledger, state.policy)
        utilities = rrm_service.compute_utilities(
            pop, layout, params, state.interference, weights
        )
        problem = SnapshotProblem(
            scheme=state.scheme,
            utilities=utilities,
            cue_cell=pop.cue_cells,
            pair_tx_cell=pop.tx_cells,
            pair_rx_cell=pop.rx_cells,
            pair_distance=pop.pair_distances,
            d_max=state.d_max,
            force_cellular=state.force_cellular,
        )
        if state.structure is None:
            state.structure = rrm_service.build_structure(problem)
        program = rrm_service.build_program(problem, state.structure)
        decision = rrm_service.solve_exact(program)
        violated = rrm_service.check_decision(program, decision)
        if violated:
            logger.error("Snapshot %d decision violates %s", state.snapshot, violated)
            raise SolverError(f"decision violates rows {', '.join(violated)}")

        scheduled = decision.y.astype(bool)
        cue_on = scheduled[:n_cues]
        pair_on = scheduled[n_cues:]
        dm = pair_on & decision.x.astype(bool)
        cm = pair_on & ~dm

        credit = np.zeros(n_cues + n_pairs)
        credit[:n_cues] = np.where(cue_on, utilities.u_leg, 0.0)
        credit[n_cues:] = np.where(dm, utilities.u_dm, np.where(cm, utilities.u_cm, 0.0))

        ul_edge, dl_edge = self._boundary_draws(state)
        dl_grants = self._downlink(state, cm, dl_edge)

        ledger = state.ledger
        ledger.ul_bits += credit
        ledger.scheduled += scheduled.astype(int)
        ledger.dm_count += dm.astype(int)
        ledger.snapshots += 1
        for cell, (kind, index, bits) in dl_grants.items():
            if kind == "cue":
                ledger.dl_bits[index] += bits

        state.interference = self._next_interference(state, cue_on, cm, dm, dl_grants, ul_edge, dl_edge)
        state.snapshot += 1

        ul_count = {c.cell_id: 0 for c in layout.cells}
        for cell in pop.cue_cells[cue_on]:
            ul_count[int(cell)] += 1
        for cell in pop.tx_cells[pair_on]:
            ul_count[int(cell)] += 1
        return SnapshotOutcome(decision, credit, dl_grants, ul_count)

    def _downlink(
        self, state: SimulationState, cm: np.ndarray, dl_edge: np.ndarray
    ) -> dict[int, tuple[str, int, float]]:
        pop, layout, params = state.population, state.layout, state.params
        ct = layout.cell_type
        grants: dict[int, tuple[str, int, float]] = {}
        for j in np.flatnonzero(cm):
            grants[int(pop.rx_cells[j])] = ("pair", int(j), 0.0)
        for cell in layout.cells:
            cid = cell.cell_id
            if cid in grants:
                continue
            members = state.cues_by_cell[cid]
            if members.size == 0:
                continue
            pointer = state.dl_pointer.get(cid, 0)
            grants[cid] = ("cue", int(members[pointer % members.size]), 0.0)
            state.dl_pointer[cid] = pointer + 1

        active = np.array(sorted(grants), dtype=int)
        for cid, (kind, index, _) in list(grants.items()):
            if kind != "cue":
                continue
            position = pop.cue_positions[index]
            d = np.hypot(*(layout.centers[active - 1] - position).T)
            powers = channel_service.received_mw(
                ct.enb_max_power_dbm, ct.enb_antenna_gain_dbi + ct.ue_antenna_gain_dbi, d, params
            )
            interference = math.fsum(powers[active != cid]) + dl_edge[cid - 1]
            signal = powers[active == cid]
            capacity = float(channel_service.link_capacity(signal, interference, params)[0])
            grants[cid] = (kind, index, capacity)
        return grants

    def _next_interference(
        self,
        state: SimulationState,
        cue_on: np.ndarray,
        cm: np.ndarray,
        dm: np.ndarray,
        dl_grants: dict[int, tuple[str, int, float]],
        ul_edge: np.ndarray,
        dl_edge: np.ndarray,
    ) -> InterferenceEstimate:
        """Interference each link would have seen from this snapshot's transmitters."""
        pop, layout, params = state.population, state.layout, state.params
        ct = layout.cell_type
        n_cues = pop.n_cues
        g_cue, g_cm, g_dm = rrm_service.resource_groups(state.scheme)

        cue_idx = np.flatnonzero(cue_on)
        cm_idx = np.flatnonzero(cm)
        dm_idx = np.flatnonzero(dm)
        tx_pos = np.vstack(
            (pop.cue_positions[cue_idx], pop.tx_positions[cm_idx], pop.tx_positions[dm_idx])
        ).reshape(-1, 2)
        tx_cell = np.concatenate(
            (pop.cue_cells[cue_idx], pop.tx_cells[cm_idx], pop.tx_cells[dm_idx])
        ).astype(int)
        tx_group = np.array(
            [g_cue.value] * cue_idx.size + [g_cm.value] * cm_idx.size + [g_dm.value] * dm_idx.size
        )
        tx_owner = np.concatenate((cue_idx, n_cues + cm_idx, n_cues + dm_idx)).astype(int)

        def uplink(rx_pos, rx_gain, owner, cell, group, edge):
            if tx_pos.shape[0] == 0 or rx_pos.shape[0] == 0:
                return np.asarray(edge, dtype=float) + np.zeros(rx_pos.shape[0])
            d = np.hypot(
                rx_pos[:, None, 0] - tx_pos[None, :, 0], rx_pos[:, None, 1] - tx_pos[None, :, 1]
            )
            power = channel_service.received_mw(
                ct.ue_max_power_dbm, ct.ue_antenna_gain_dbi + rx_gain, d, params
            )
            # Same-cell transmitters on the same resource group are mutually exclusive.
            coexist = (tx_cell[None, :] != cell[:, None]) | (tx_group[None, :] != group)
            coexist &= tx_owner[None, :] != owner[:, None]
            return (power * coexist).sum(axis=1) + edge

        enb_pos = layout.centers
        cue_ul = uplink(
            enb_pos[pop.cue_cells - 1],
            ct.enb_antenna_gain_dbi,
            np.arange(n_cues),
            pop.cue_cells,
            g_cue.value,
            ul_edge[pop.cue_cells - 1],
        )
        pair_owner = n_cues + np.arange(pop.n_pairs)
        cm_ul = uplink(
            enb_pos[pop.tx_cells - 1],
            ct.enb_antenna_gain_dbi,
            pair_owner,
            pop.tx_cells,
            g_cm.value,
            ul_edge[pop.tx_cells - 1],
        )
        dm_int = uplink(
            pop.rx_positions,
            ct.ue_antenna_gain_dbi,
            pair_owner,
            pop.tx_cells,
            g_dm.value,
            ul_edge[pop.rx_cells - 1],
        )

        active = np.array(sorted(dl_grants), dtype=int)
        cm_dl = dl_edge[pop.rx_cells - 1].astype(float)
        if active.size and pop.n_pairs:
            d = np.hypot(
                pop.rx_positions[:, None, 0] - enb_pos[active - 1][None, :, 0],
                pop.rx_positions[:, None, 1] - enb_pos[active - 1][None, :, 1],
            )
            power = channel_service.received_mw(
                ct.enb_max_power_dbm, ct.enb_antenna_gain_dbi + ct.ue_antenna_gain_dbi, d, params
            )
            cm_dl = cm_dl + (power * (active[None, :] != pop.rx_cells[:, None])).sum(axis=1)
        return InterferenceEstimate(cue_ul=cue_ul, cm_ul=cm_ul, cm_dl=cm_dl, dm=dm_int)

    def run_simulation(
        self,
        config: ExperimentConfig,
        d2d_enabled: bool = True,
        population: Optional[UePopulation] = None,
    ) -> RunResult:
        """
        Fixed population, `config.snapshots` scheduling intervals.

        Args:
            config: Validated experiment configuration (its seed drives every draw)
            d2d_enabled: False fixes every DM flag to 0
            population: Optional hand-built population replacing the random drop

        Returns:
            RunResult with per-snapshot averages and the ledgers
        """
        started = time.perf_counter()
        state = self.new_state(config, d2d_enabled, population)
        for _ in range(config.snapshots):
            self.run_snapshot(state)
        result = self._result(state, config, d2d_enabled)
        logger.info(
            "Run %s type=%d cues=%d pairs=%d seed=%d d2d=%s: UL %.4g bit/s in %.2fs",
            config.scheme.value, config.cell_type, state.population.n_cues,
            state.population.n_pairs, config.seed, d2d_enabled, result.avg_total_ul_bps,
            time.perf_counter() - started,
        )
        return result

    def run_disabled_baseline(
        self, config: ExperimentConfig, population: Optional[UePopulation] = None
    ) -> RunResult:
        """Same pipeline with every pair forced to cellular mode."""
        return self.run_simulation(config, d2d_enabled=False, population=population)

    def _result(
        self, state: SimulationState, config: ExperimentConfig, d2d_enabled: bool
    ) -> RunResult:
        ledger = state.ledger
        pop = state.population
        n = ledger.snapshots
        n_cues, n_pairs = pop.n_cues, pop.n_pairs
        pair_scheduled = int(ledger.scheduled[n_cues:].sum())
        return RunResult(
            avg_total_ul_bps=math.fsum(ledger.ul_bits) / n,
            avg_pair_bps=math.fsum(ledger.ul_bits[n_cues:]) / (n_pairs * n) if n_pairs else 0.0,
            avg_cue_dl_bps=math.fsum(ledger.dl_bits) / (n_cues * n) if n_cues else 0.0,
            dm_fraction=int(ledger.dm_count.sum()) / pair_scheduled if pair_scheduled else 0.0,
            densification_ratio=topology_service.densification_ratio(state.layout, pop),
            enb_density=state.layout.enb_density,
            ledger=ledger,
            config=config,
            seed=config.seed,
            d2d_enabled=d2d_enabled,
        )

    @staticmethod
    def _relative_gain(enabled: float, disabled: float, what: str) -> float:
        if disabled == 0:
            logger.warning("%s gain undefined: disabled-baseline throughput is zero", what)
            return math.nan
        if enabled == disabled:
            return 0.0
        return 100.0 * (enabled - disabled) / disabled

    def direct_gain(self, enabled: RunResult, disabled: RunResult) -> float:
        """Percent gain of the average pair UL throughput."""
        return self._relative_gain(enabled.avg_pair_bps, disabled.avg_pair_bps, "Direct")

    def offload_gain(self, enabled: RunResult, disabled: RunResult) -> float:
        """Percent gain of the average legacy CUE DL throughput."""
        return self._relative_gain(enabled.avg_cue_dl_bps, disabled.avg_cue_dl_bps, "Offloading")

    def total_gain(self, g_dir: float, g_off: float, a1: float = 0.5, a2: float = 0.5) -> float:
        if a1 < 0 or a2 < 0:
            raise ValidationError("gain weights a1 and a2 must be nonnegative")
        return a1 * g_dir + a2 * g_off

    def gain_report(
        self,
        enabled: RunResult,
        disabled: RunResult,
        a1: Optional[float] = None,
        a2: Optional[float] = None,
    ) -> GainReport:
        a1 = enabled.config.a1 if a1 is None else a1
        a2 = enabled.config.a2 if a2 is None else a2
        g_dir = self.direct_gain(enabled, disabled)
        g_off = self.offload_gain(enabled, disabled)
        return GainReport(g_dir, g_off, self.total_gain(g_dir, g_off, a1, a2), a1, a2)

    def gain_sources(self, scheme: SharingScheme) -> dict[str, tuple[GainSource, ...]]:
        """Which D2D benefits feed the direct and the offloading gain under a scheme."""
        return GAIN_SOURCES[scheme]

    def evm_to_snr_db(self, evm: float) -> float:
        """SNR (dB) ~ 10 log10(1 / EVM^2)."""
        if not 0.0 < evm <= 1.0:
            raise ValidationError(f"evm must be in (0, 1], got {evm}")
        return -20.0 * math.log10(evm) + 0.0


simulation_service = SimulationService()
