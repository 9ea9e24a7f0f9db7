"""Joint mode selection and scheduling: utilities, 0-1 program, weights."""
import logging
from typing import Optional

import numpy as np

from d2dsim.core.exceptions import ValidationError
from d2dsim.models.domain import (
    BinaryProgram,
    CellLayout,
    Constraint,
    Decision,
    EntityUtilities,
    InterferenceEstimate,
    ProgramStructure,
    SnapshotProblem,
    ThroughputLedger,
    UePopulation,
)
from d2dsim.models.enums import ResourceGroup, SchedulerPolicy, Sense, SharingScheme
from d2dsim.models.schemas import RadioParams
from d2dsim.services.channel_service import channel_service
from d2dsim.services.solver import solver_service

logger = logging.getLogger(__name__)

PF_EPSILON_BPS = 1.0

# (CUE, CM pair, DM pair) resource group inside a cell.
RESOURCE_GROUPS: dict[SharingScheme, tuple[ResourceGroup, ResourceGroup, ResourceGroup]] = {
    SharingScheme.OVERLAY: (ResourceGroup.A, ResourceGroup.A, ResourceGroup.A),
    SharingScheme.UNDERLAY1: (ResourceGroup.A, ResourceGroup.A, ResourceGroup.B),
    SharingScheme.UNDERLAY2: (ResourceGroup.A, ResourceGroup.B, ResourceGroup.B),
}


class RrmService:
    """Service building and solving the per-snapshot scheduling program."""

    def resource_groups(
        self, scheme: SharingScheme
    ) -> tuple[ResourceGroup, ResourceGroup, ResourceGroup]:
        """Resource groups of CUE, CM and DM transmissions for a scheme."""
        return RESOURCE_GROUPS[scheme]

    def compute_utilities(
        self,
        population: UePopulation,
        layout: CellLayout,
        params: RadioParams,
        interference: Optional[InterferenceEstimate] = None,
        weights: Optional[np.ndarray] = None,
    ) -> EntityUtilities:
        """
        Per-entity capacities against the lagged interference estimate.

        u_leg: CUE -> serving eNB (UL). u_dm: DUE tx -> DUE rx. u_cm: the worse of
        DUE tx -> eNB of the tx cell (UL) and eNB of the rx cell -> DUE rx (DL).
        """
        n_cues, n_pairs = population.n_cues, population.n_pairs
        est = interference or InterferenceEstimate.zeros(n_cues, n_pairs)
        ct = layout.cell_type
        centers = layout.centers
        ue_gain, enb_gain = ct.ue_antenna_gain_dbi, ct.enb_antenna_gain_dbi

        u_leg = np.zeros(n_cues)
        if n_cues:
            d = np.hypot(*(population.cue_positions - centers[population.cue_cells - 1]).T)
            signal = channel_service.received_mw(ct.ue_max_power_dbm, ue_gain + enb_gain, d, params)
            u_leg = channel_service.link_capacity(signal, est.cue_ul, params)

        u_dm = np.zeros(n_pairs)
        u_cm = np.zeros(n_pairs)
        if n_pairs:
            tx, rx = population.tx_positions, population.rx_positions
            d_dm = population.pair_distances
            s_dm = channel_service.received_mw(ct.ue_max_power_dbm, 2 * ue_gain, d_dm, params)
            u_dm = channel_service.link_capacity(s_dm, est.dm, params)

            d_ul = np.hypot(*(tx - centers[population.tx_cells - 1]).T)
            s_ul = channel_service.received_mw(ct.ue_max_power_dbm, ue_gain + enb_gain, d_ul, params)
            d_dl = np.hypot(*(rx - centers[population.rx_cells - 1]).T)
            s_dl = channel_service.received_mw(ct.enb_max_power_dbm, enb_gain + ue_gain, d_dl, params)
            u_cm = np.minimum(
                channel_service.link_capacity(s_ul, est.cm_ul, params),
                channel_service.link_capacity(s_dl, est.cm_dl, params),
            )

        if weights is None:
            weights = np.ones(n_cues + n_pairs)
        return EntityUtilities(u_leg=u_leg, u_dm=u_dm, u_cm=u_cm, weights=weights)

    def build_structure(self, problem: SnapshotProblem) -> ProgramStructure:
        """
        Variables, blocks and rows of the scheme's program (objective excluded).

        Variable order: y per CUE, then (y, x, w) per pair where w linearizes x*y.
        """
        n_cues, n_pairs = problem.n_cues, problem.n_pairs
        names = [f"y_cue{i + 1}" for i in range(n_cues)]
        blocks: list[tuple[int, ...]] = [(i,) for i in range(n_cues)]
        for j in range(n_pairs):
            base = n_cues + 3 * j
            names += [f"y_pair{j + 1}", f"x_pair{j + 1}", f"w_pair{j + 1}"]
            blocks.append((base, base + 1, base + 2))

        def y(j: int) -> int:
            return n_cues + 3 * j

        rows: list[Constraint] = []

        def add(name: str, terms: list[tuple[int, int]], sense: Sense, rhs: int) -> None:
            if terms:
                rows.append(Constraint(name, tuple(terms), sense, rhs))

        cells = sorted(set(problem.cue_cell.tolist()) | set(problem.pair_tx_cell.tolist()))
        for cell in cells:
            cue_terms = [(i, 1) for i in range(n_cues) if problem.cue_cell[i] == cell]
            tx_pairs = [j for j in range(n_pairs) if problem.pair_tx_cell[j] == cell]
            if problem.scheme is SharingScheme.OVERLAY:
                add(f"C1_cell{cell}", cue_terms + [(y(j), 1) for j in tx_pairs], Sense.LE, 1)
            elif problem.scheme is SharingScheme.UNDERLAY1:
                cm_terms = [t for j in tx_pairs for t in ((y(j), 1), (y(j) + 2, -1))]
                add(f"C1a_cell{cell}", cue_terms + cm_terms, Sense.LE, 1)
                add(f"C1b_cell{cell}", [(y(j) + 2, 1) for j in tx_pairs], Sense.LE, 1)
            else:
                add(f"C1a_cell{cell}", cue_terms, Sense.LE, 1)
                add(f"C1b_cell{cell}", [(y(j), 1) for j in tx_pairs], Sense.LE, 1)

        for cell in sorted(set(problem.pair_rx_cell.tolist())):
            rx_pairs = [j for j in range(n_pairs) if problem.pair_rx_cell[j] == cell]
            add(
                f"C2_cell{cell}",
                [t for j in rx_pairs for t in ((y(j), 1), (y(j) + 2, -1))],
                Sense.LE,
                1,
            )

        for j in range(n_pairs):
            yj, xj, wj = y(j), y(j) + 1, y(j) + 2
            add(f"C3_pair{j + 1}", [(xj, 1), (yj, -1)], Sense.LE, 0)
            add(f"Lx_pair{j + 1}", [(wj, 1), (xj, -1)], Sense.LE, 0)
            add(f"Ly_pair{j + 1}", [(wj, 1), (yj, -1)], Sense.LE, 0)
            add(f"Lxy_pair{j + 1}", [(xj, 1), (yj, 1), (wj, -1)], Sense.LE, 1)
            if problem.pair_distance[j] > problem.d_max:
                add(f"C4_pair{j + 1}", [(xj, 1)], Sense.EQ, 0)
            elif problem.force_cellular:
                add(f"CM_pair{j + 1}", [(xj, 1)], Sense.EQ, 0)

        return ProgramStructure(
            variables=tuple(names),
            blocks=tuple(blocks),
            constraints=tuple(rows),
            n_cues=n_cues,
            n_pairs=n_pairs,
        )

    def objective_for(self, problem: SnapshotProblem) -> np.ndarray:
        """Weighted utilities: y_i -> b*u_leg, y_j -> b*u_cm, w_j -> b*(u_dm - u_cm)."""
        u = problem.utilities
        n_cues, n_pairs = problem.n_cues, problem.n_pairs
        if u.u_leg.size != n_cues or u.u_dm.size != n_pairs:
            raise ValidationError("utilities do not match the problem's entities")
        c = np.zeros(n_cues + 3 * n_pairs)
        c[:n_cues] = u.weights[:n_cues] * u.u_leg
        beta = u.weights[n_cues:]
        c[n_cues::3] = beta * u.u_cm
        c[n_cues + 2 :: 3] = beta * u.u_dm - beta * u.u_cm
        return c

    def build_program(
        self, problem: SnapshotProblem, structure: Optional[ProgramStructure] = None
    ) -> BinaryProgram:
        """Linearized 0-1 program of one snapshot; reuses `structure` when given."""
        structure = structure or self.build_structure(problem)
        return BinaryProgram(structure=structure, objective=self.objective_for(problem))

    def solve_exact(self, program: BinaryProgram) -> Decision:
        return solver_service.solve_exact(program)

    def solve_bruteforce(self, program: BinaryProgram) -> Decision:
        return solver_service.solve_bruteforce(program)

    def check_decision(self, program: BinaryProgram, decision: Decision) -> list[str]:
        return solver_service.check_decision(program, decision)

    def update_weights(self, ledger: ThroughputLedger, policy: SchedulerPolicy) -> np.ndarray:
        """
        Scheduler weight factor per entity.

        Round robin: 1 / (1 + times scheduled). Proportional fairness: reciprocal of
        the average delivered UL throughput, floored at 1 bit/s.
        """
        if policy is SchedulerPolicy.ROUND_ROBIN:
            return 1.0 / (1.0 + ledger.scheduled.astype(float))
        average = ledger.ul_bits / max(ledger.snapshots, 1)
        return 1.0 / np.maximum(average, PF_EPSILON_BPS)

    def to_lp_text(self, program: BinaryProgram) -> str:
        """LP-style listing: Maximize / Subject To / Binary / End."""

        def expr(terms: list[tuple[float, str]]) -> str:
            if not terms:
                return "0"
            out = []
            for k, (coef, name) in enumerate(terms):
                sign = "-" if coef < 0 else ("+" if k else "")
                out.append(f"{sign} {abs(coef):.17g} {name}".strip())
            return " ".join(out)

        obj = [(float(c), v) for c, v in zip(program.objective, program.variables) if c != 0]
        lines = ["Maximize", f" obj: {expr(obj)}", "Subject To"]
        for row in program.constraints:
            terms = [(float(coef), program.variables[v]) for v, coef in row.terms]
            lines.append(f" {row.name}: {expr(terms)} {row.sense.value} {row.rhs}")
        lines.append("Binary")
        lines.extend(f" {name}" for name in program.variables)
        lines.append("End")
        return "\n".join(lines) + "\n"


rrm_service = RrmService()
