"""Tests for utilities, the snapshot program and the exact solvers."""
from dataclasses import replace

import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from d2dsim.config import settings
from d2dsim.core.exceptions import SolverError
from d2dsim.models.domain import (
    BinaryProgram,
    EntityUtilities,
    ProgramStructure,
    SnapshotProblem,
    ThroughputLedger,
)
from d2dsim.models.enums import ResourceGroup, SchedulerPolicy, SharingScheme
from d2dsim.services.channel_service import channel_service
from d2dsim.services.rrm_service import rrm_service
from d2dsim.services.solver import _Search, plan_for
from d2dsim.services.topology_service import topology_service

SCHEMES = list(SharingScheme)


def make_problem(
    scheme,
    cue_cells=(),
    u_leg=(),
    pairs=(),
    weights=None,
    d_max=300.0,
    force_cellular=False,
):
    """pairs: (tx_cell, rx_cell, distance, u_dm, u_cm) tuples."""
    n = len(cue_cells) + len(pairs)
    utilities = EntityUtilities(
        u_leg=list(u_leg),
        u_dm=[p[3] for p in pairs],
        u_cm=[p[4] for p in pairs],
        weights=np.ones(n) if weights is None else weights,
    )
    return SnapshotProblem(
        scheme=scheme,
        utilities=utilities,
        cue_cell=list(cue_cells),
        pair_tx_cell=[p[0] for p in pairs],
        pair_rx_cell=[p[1] for p in pairs],
        pair_distance=[p[2] for p in pairs],
        d_max=d_max,
        force_cellular=force_cellular,
    )


def random_problem(rng, scheme, max_vars=18, n_cells=3):
    """Up to 10 entities and at most `max_vars` binaries over `n_cells` cells."""
    n_entities = int(rng.integers(1, 11))
    n_pairs = int(rng.integers(0, min(n_entities, (max_vars - n_entities) // 2) + 1))
    n_cues = n_entities - n_pairs
    pairs = [
        (
            int(rng.integers(1, n_cells + 1)),
            int(rng.integers(1, n_cells + 1)),
            float(rng.uniform(0.0, 400.0)),
            float(rng.uniform(0.0, 2e7)),
            float(rng.uniform(0.0, 1e7)),
        )
        for _ in range(n_pairs)
    ]
    return make_problem(
        scheme,
        cue_cells=rng.integers(1, n_cells + 1, n_cues).tolist(),
        u_leg=rng.uniform(0.0, 1e7, n_cues).tolist(),
        pairs=pairs,
        weights=rng.uniform(0.1, 2.0, n_cues + n_pairs),
    )


def names(structure: ProgramStructure) -> list[str]:
    return [row.name for row in structure.constraints]


def test_resource_groups():
    assert rrm_service.resource_groups(SharingScheme.OVERLAY) == (ResourceGroup.A,) * 3
    assert rrm_service.resource_groups(SharingScheme.UNDERLAY1)[2] is ResourceGroup.B
    assert rrm_service.resource_groups(SharingScheme.UNDERLAY2)[1:] == (ResourceGroup.B,) * 2


def test_structure_one_cue_one_pair_overlay():
    problem = make_problem(SharingScheme.OVERLAY, [1], [10.0], [(1, 1, 50.0, 20.0, 8.0)])
    structure = rrm_service.build_structure(problem)
    assert structure.variables == ("y_cue1", "y_pair1", "x_pair1", "w_pair1")
    assert names(structure) == [
        "C1_cell1", "C2_cell1", "C3_pair1", "Lx_pair1", "Ly_pair1", "Lxy_pair1",
    ]
    assert len(structure.constraints[0].terms) == 2


def test_pair_beyond_d_max_is_fixed_to_cellular():
    problem = make_problem(SharingScheme.OVERLAY, pairs=[(1, 1, 301.0, 20.0, 8.0)])
    rows = {row.name: row for row in rrm_service.build_structure(problem).constraints}
    assert rows["C4_pair1"].terms == ((1, 1),)
    assert rows["C4_pair1"].rhs == 0


def test_cross_cell_pair_rows():
    problem = make_problem(SharingScheme.OVERLAY, pairs=[(1, 2, 100.0, 20.0, 8.0)])
    structure = rrm_service.build_structure(problem)
    rows = {row.name: row for row in structure.constraints}
    assert rows["C1_cell1"].terms == ((0, 1),)
    assert rows["C2_cell2"].terms == ((0, 1), (2, -1))
    assert "C2_cell1" not in rows


def test_underlay_rows_split_cue_and_pair_resources():
    problem = make_problem(SharingScheme.UNDERLAY2, [1], [1.0], [(1, 1, 10.0, 2.0, 1.0)])
    rows = {row.name: row for row in rrm_service.build_structure(problem).constraints}
    assert rows["C1a_cell1"].terms == ((0, 1),)
    assert rows["C1b_cell1"].terms == ((1, 1),)


def test_objective_layout():
    problem = make_problem(
        SharingScheme.OVERLAY, [1], [10.0], [(1, 1, 50.0, 20.0, 8.0)], weights=[1.0, 0.5]
    )
    assert rrm_service.objective_for(problem).tolist() == [10.0, 4.0, 0.0, 6.0]


def test_single_cue_is_scheduled():
    problem = make_problem(SharingScheme.OVERLAY, [1], [5e6])
    decision = rrm_service.solve_exact(rrm_service.build_program(problem))
    assert decision.y.tolist() == [1]
    assert decision.objective_value == 5e6


def test_overlay_prefers_direct_pair():
    problem = make_problem(SharingScheme.OVERLAY, [1], [10.0], [(1, 1, 50.0, 20.0, 8.0)])
    decision = rrm_service.solve_exact(rrm_service.build_program(problem))
    assert decision.y.tolist() == [0, 1]
    assert decision.x.tolist() == [1]
    assert decision.objective_value == 20.0


def test_underlay1_schedules_cue_and_direct_pair_together():
    problem = make_problem(SharingScheme.UNDERLAY1, [1], [10.0], [(1, 1, 50.0, 20.0, 8.0)])
    decision = rrm_service.solve_exact(rrm_service.build_program(problem))
    assert decision.y.tolist() == [1, 1]
    assert decision.x.tolist() == [1]
    assert decision.objective_value == 30.0


def test_forced_cellular_keeps_pair_out_of_direct_mode():
    problem = make_problem(
        SharingScheme.UNDERLAY1, [], [], [(1, 1, 50.0, 20.0, 8.0)], force_cellular=True
    )
    decision = rrm_service.solve_exact(rrm_service.build_program(problem))
    assert decision.x.tolist() == [0]
    assert decision.objective_value == 8.0


def test_empty_program():
    program = rrm_service.build_program(make_problem(SharingScheme.OVERLAY))
    for solve in (rrm_service.solve_exact, rrm_service.solve_bruteforce):
        decision = solve(program)
        assert decision.values.size == 0
        assert decision.objective_value == 0.0


def test_bruteforce_enumeration_cap():
    problem = make_problem(SharingScheme.UNDERLAY2, list(range(1, 26)), [1.0] * 25)
    assert problem.n_cues > settings.bruteforce_max_vars
    with pytest.raises(SolverError):
        rrm_service.solve_bruteforce(rrm_service.build_program(problem))


def test_check_decision_reports_violations():
    problem = make_problem(SharingScheme.OVERLAY, [1, 1], [1.0, 2.0])
    program = rrm_service.build_program(problem)
    decision = rrm_service.solve_exact(program)
    assert rrm_service.check_decision(program, decision) == []
    decision.values = np.array([1, 1], dtype=np.int8)
    assert rrm_service.check_decision(program, decision) == ["C1_cell1"]
    decision.values = np.array([2, 0], dtype=np.int8)
    assert rrm_service.check_decision(program, decision) == ["<binary>"]


def test_exact_matches_bruteforce_on_random_instances():
    rng = np.random.default_rng(2024)
    checked = 0
    for _ in range(70):
        for scheme in SCHEMES:
            problem = random_problem(rng, scheme)
            program = rrm_service.build_program(problem)
            assert program.num_vars <= 18
            assert problem.n_cues + problem.n_pairs <= 10
            exact = rrm_service.solve_exact(program)
            brute = rrm_service.solve_bruteforce(program)
            assert exact.objective_value == brute.objective_value
            assert rrm_service.check_decision(program, exact) == []
            assert rrm_service.check_decision(program, brute) == []
            checked += 1
    assert checked >= 200


def test_scheme_ordering_on_random_instances():
    rng = np.random.default_rng(99)
    for _ in range(70):
        base = random_problem(rng, SharingScheme.OVERLAY)
        values = {}
        for scheme in SCHEMES:
            problem = SnapshotProblem(
                scheme=scheme,
                utilities=base.utilities,
                cue_cell=base.cue_cell,
                pair_tx_cell=base.pair_tx_cell,
                pair_rx_cell=base.pair_rx_cell,
                pair_distance=base.pair_distance,
                d_max=base.d_max,
            )
            values[scheme] = rrm_service.solve_exact(
                rrm_service.build_program(problem)
            ).objective_value
        assert values[SharingScheme.OVERLAY] <= values[SharingScheme.UNDERLAY1]
        assert values[SharingScheme.OVERLAY] <= values[SharingScheme.UNDERLAY2]


def test_structure_is_reused_across_objectives():
    problem = make_problem(SharingScheme.OVERLAY, [1, 2], [3.0, 4.0], [(1, 2, 10.0, 9.0, 1.0)])
    structure = rrm_service.build_structure(problem)
    program = rrm_service.build_program(problem, structure)
    assert program.structure is structure
    other = BinaryProgram(structure, np.zeros(structure.num_vars))
    assert rrm_service.solve_exact(other).objective_value == 0.0


def test_compute_utilities(params):
    layout = topology_service.build_layout(1)
    pop = topology_service.place_population(
        layout, [(100.0, 0.0)], [((0.0, 100.0), (0.0, 100.0))]
    )
    u = rrm_service.compute_utilities(pop, layout, params)
    assert u.u_leg[0] > 0
    # co-located pair: distance clamped to 1 m
    assert u.u_dm[0] > u.u_cm[0]
    assert u.weights.tolist() == [1.0, 1.0]


def test_cellular_utility_is_worse_leg(params):
    layout = topology_service.build_layout(2)
    (x1, y1), (x2, y2) = layout.cell(1).center, layout.cell(2).center
    pop = topology_service.place_population(
        layout, [], [((x1 + 150.0, y1), (x2, y2 + 50.0))]
    )
    u = rrm_service.compute_utilities(pop, layout, params)
    ct = layout.cell_type
    ul = channel_service.link_capacity(
        channel_service.received_mw(
            ct.ue_max_power_dbm, ct.ue_antenna_gain_dbi + ct.enb_antenna_gain_dbi, 150.0, params
        ),
        0.0,
        params,
    )
    dl = channel_service.link_capacity(
        channel_service.received_mw(
            ct.enb_max_power_dbm, ct.enb_antenna_gain_dbi + ct.ue_antenna_gain_dbi, 50.0, params
        ),
        0.0,
        params,
    )
    assert u.u_cm[0] == pytest.approx(min(float(ul), float(dl)))


def test_round_robin_weights():
    ledger = ThroughputLedger.empty(2, 1)
    ledger.scheduled[:] = [0, 4, 1]
    weights = rrm_service.update_weights(ledger, SchedulerPolicy.ROUND_ROBIN)
    assert weights.tolist() == [1.0, 0.2, 0.5]


def test_proportional_fair_weights():
    ledger = ThroughputLedger.empty(2, 0)
    ledger.ul_bits[:] = [10e6 * 5, 0.0]
    ledger.snapshots = 5
    weights = rrm_service.update_weights(ledger, SchedulerPolicy.PROPORTIONAL_FAIRNESS)
    assert weights[0] == pytest.approx(1e-7)
    assert weights[1] == 1.0


def test_lp_listing():
    problem = make_problem(SharingScheme.OVERLAY, [1], [10.0], [(1, 1, 50.0, 20.0, 8.0)])
    text = rrm_service.to_lp_text(rrm_service.build_program(problem))
    lines = text.splitlines()
    assert lines[0] == "Maximize"
    assert lines[1] == " obj: 10 y_cue1 + 8 y_pair1 + 12 w_pair1"
    assert " C1_cell1: 1 y_cue1 + 1 y_pair1 <= 1" in lines
    assert lines[-1] == "End"
    assert " w_pair1" in lines[lines.index("Binary"):]


def solve(problem, exact=True):
    program = rrm_service.build_program(problem)
    return (rrm_service.solve_exact if exact else rrm_service.solve_bruteforce)(program)


def equal_weights(problem):
    u = problem.utilities
    return replace(
        problem, utilities=EntityUtilities(u.u_leg, u.u_dm, u.u_cm, np.ones(u.weights.size))
    )


@pytest.mark.parametrize(
    "scheme, n_cues, n_pairs",
    [
        (SharingScheme.OVERLAY, 4, 6),
        (SharingScheme.UNDERLAY1, 4, 6),
        (SharingScheme.UNDERLAY2, 4, 6),
        (SharingScheme.UNDERLAY1, 3, 7),
    ],
)
def test_exact_matches_bruteforce_on_ten_entities(scheme, n_cues, n_pairs):
    rng = np.random.default_rng(n_cues * 10 + n_pairs)
    pairs = [
        (
            int(rng.integers(1, 3)),
            int(rng.integers(1, 3)),
            float(rng.uniform(0.0, 400.0)),
            float(rng.uniform(0.0, 2e7)),
            float(rng.uniform(0.0, 1e7)),
        )
        for _ in range(n_pairs)
    ]
    problem = make_problem(
        scheme,
        cue_cells=rng.integers(1, 3, n_cues).tolist(),
        u_leg=rng.uniform(0.0, 1e7, n_cues).tolist(),
        pairs=pairs,
        weights=rng.uniform(0.1, 2.0, n_cues + n_pairs),
    )
    program = rrm_service.build_program(problem)
    assert program.num_vars == n_cues + 3 * n_pairs
    exact = rrm_service.solve_exact(program)
    brute = rrm_service.solve_bruteforce(program)
    assert exact.objective_value == brute.objective_value
    assert exact.values.tolist() == brute.values.tolist()


def test_linearization_rows_force_w_to_the_product():
    problem = make_problem(SharingScheme.OVERLAY, pairs=[(1, 1, 50.0, 2.0, 1.0)])
    rows = [r for r in rrm_service.build_structure(problem).constraints if r.name.startswith("L")]
    assert len(rows) == 3
    for y in (0, 1):
        for x in (0, 1):
            feasible = [
                w
                for w in (0, 1)
                if all(r.satisfied(np.array([y, x, w], dtype=np.int8)) for r in rows)
            ]
            assert feasible == [x * y]


def test_scaling_utilities_keeps_the_argmax():
    rng = np.random.default_rng(7)
    for _ in range(30):
        for scheme in SCHEMES:
            problem = random_problem(rng, scheme)
            base = solve(problem)
            u = problem.utilities
            # Powers of two scale every coefficient without rounding.
            for factor in (0.25, 8.0):
                scaled = replace(
                    problem,
                    utilities=EntityUtilities(
                        u.u_leg * factor, u.u_dm * factor, u.u_cm * factor, u.weights
                    ),
                )
                decision = solve(scaled)
                assert decision.values.tolist() == base.values.tolist()
                assert decision.objective_value == base.objective_value * factor


def test_freeing_direct_mode_never_lowers_single_cell_optimum():
    rng = np.random.default_rng(31)
    for _ in range(40):
        for scheme in SCHEMES:
            problem = equal_weights(random_problem(rng, scheme, n_cells=1))
            free = solve(problem, exact=False).objective_value
            forced = solve(replace(problem, force_cellular=True), exact=False).objective_value
            assert free >= forced
            assert solve(problem).objective_value == free


def assignment_optimum(problem):
    """
    Optimum of an Overlay or Underlay2 program via bipartite assignment.

    Each transmit cell either takes its best single option or matches one
    receive cell's downlink through its best cellular-mode pair.
    """
    u = problem.utilities
    n_cues = problem.n_cues
    cells = np.concatenate((problem.cue_cell, problem.pair_tx_cell, problem.pair_rx_cell))
    size = 1 + int(cells.max())
    beta = u.weights[n_cues:]
    best_cue = np.zeros(size)
    np.maximum.at(best_cue, problem.cue_cell, u.weights[:n_cues] * u.u_leg)
    best_dm = np.zeros(size)
    direct = problem.pair_distance <= problem.d_max
    np.maximum.at(best_dm, problem.pair_tx_cell[direct], (beta * u.u_dm)[direct])
    edge = np.zeros((size, size))
    np.maximum.at(edge, (problem.pair_tx_cell, problem.pair_rx_cell), beta * u.u_cm)
    if problem.scheme is SharingScheme.OVERLAY:
        single = np.maximum(best_cue, best_dm)
        base = single.sum()
    else:
        single = best_dm
        base = best_cue.sum() + best_dm.sum()
    gain = np.maximum(edge - single[:, None], 0.0)
    rows, cols = linear_sum_assignment(gain, maximize=True)
    return base + gain[rows, cols].sum()


@pytest.mark.parametrize("scheme", [SharingScheme.OVERLAY, SharingScheme.UNDERLAY2])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_exact_matches_assignment_on_full_size_snapshot(scheme, seed):
    rng = np.random.default_rng(seed)
    n_cues = n_pairs = 36
    pairs = [
        (
            int(rng.integers(1, 10)),
            int(rng.integers(1, 10)),
            float(rng.uniform(0.0, 400.0)),
            float(rng.uniform(0.0, 2e7)),
            float(rng.uniform(0.0, 1e7)),
        )
        for _ in range(n_pairs)
    ]
    problem = make_problem(
        scheme,
        cue_cells=rng.integers(1, 10, n_cues).tolist(),
        u_leg=rng.uniform(0.0, 1e7, n_cues).tolist(),
        pairs=pairs,
        weights=rng.uniform(0.1, 2.0, n_cues + n_pairs),
    )
    program = rrm_service.build_program(problem)
    decision = rrm_service.solve_exact(program)
    assert rrm_service.check_decision(program, decision) == []
    assert decision.objective_value == pytest.approx(assignment_optimum(problem), rel=1e-9)


def test_search_visits_blocks_grouped_by_cell():
    problem = make_problem(
        SharingScheme.OVERLAY,
        [2, 1],
        [1.0, 1.0],
        [(1, 1, 50.0, 2.0, 1.0), (2, 2, 50.0, 2.0, 1.0)],
    )
    plan = plan_for(rrm_service.build_structure(problem))
    assert [blk.variables.tolist() for blk in plan.blocks] == [[1], [2, 3, 4], [0], [5, 6, 7]]


def test_root_bound_covers_the_optimum():
    rng = np.random.default_rng(5)
    for _ in range(20):
        for scheme in SCHEMES:
            program = rrm_service.build_program(random_problem(rng, scheme))
            plan = plan_for(program.structure)
            search = _Search(program, plan)
            bound = search._optimism(np.zeros(len(plan.rows)), 0)
            optimum = rrm_service.solve_exact(program).objective_value
            assert bound >= optimum - 1e-9 * max(1.0, optimum)
