"""Exact 0-1 solvers for snapshot programs.

`solve_exact` is a depth-first branch and bound over entity blocks with
constraint propagation and an LP-free bound. `solve_bruteforce` enumerates all
vectors and serves as the verification oracle. Both return the optimum with the
largest exactly rounded objective and, among those, the lexicographically
smallest variable vector.
"""
from __future__ import annotations

import itertools
import logging
import math
import weakref
from dataclasses import dataclass
from typing import Optional

import numpy as np

from d2dsim.config import settings
from d2dsim.core.exceptions import SolverError
from d2dsim.models.domain import BinaryProgram, Decision, ProgramStructure
from d2dsim.models.enums import Sense

logger = logging.getLogger(__name__)

FEAS_EPS = 1e-9
BRUTEFORCE_CHUNK = 1 << 16


def _tolerance(value: float) -> float:
    return 1e-9 * max(1.0, abs(value))


@dataclass(eq=False)
class _Block:
    variables: np.ndarray
    states: np.ndarray  # (n_states, block size) int8, lexicographic order
    usage: np.ndarray  # (n_states, n_rows) coupling-row usage
    owner: np.ndarray  # (n_states,) packing row owning the state, -1 if none
    zero_state: int  # index of the all-zero state, -1 if infeasible
    low_ahead: Optional[np.ndarray] = None  # usage + least usage of the later blocks
    high_ahead: Optional[np.ndarray] = None  # usage + largest usage of the later blocks


@dataclass(eq=False)
class SearchPlan:
    """Objective-independent precomputation over a program structure.

    Blocks are visited grouped by the first packing row they own, so a row stops
    contributing to the bound as soon as its blocks are behind the search.
    """
    blocks: list[_Block]
    rows: list[int]  # coupling row indices into structure.constraints
    sense_eq: np.ndarray
    rhs: np.ndarray
    rest_min: np.ndarray  # (n_blocks + 1, n_rows) usage lower bound of blocks k..end
    rest_max: np.ndarray
    zero_ok_from: np.ndarray  # (n_blocks + 1,) all-zero completion available from block k

    @property
    def has_eq(self) -> bool:
        return bool(self.sense_eq.any())


_plans: "weakref.WeakKeyDictionary[ProgramStructure, SearchPlan]" = weakref.WeakKeyDictionary()


def plan_for(structure: ProgramStructure) -> SearchPlan:
    """Build (once per structure) the block states and coupling rows."""
    plan = _plans.get(structure)
    if plan is None:
        plan = _build_plan(structure)
        _plans[structure] = plan
    return plan


def _build_plan(structure: ProgramStructure) -> SearchPlan:
    var_block = {}
    for b, block in enumerate(structure.blocks):
        for v in block:
            var_block[v] = b
    covered = sorted(var_block)
    if covered != list(range(structure.num_vars)):
        raise SolverError("every variable must belong to exactly one block")

    local: dict[int, list] = {b: [] for b in range(len(structure.blocks))}
    coupling = []
    for idx, row in enumerate(structure.constraints):
        owners = {var_block[v] for v, _ in row.terms}
        if len(owners) == 1:
            local[owners.pop()].append(row)
        elif owners:
            coupling.append(idx)
        elif not row.satisfied(np.zeros(structure.num_vars, dtype=np.int8)):
            raise SolverError(f"constant row {row.name} is infeasible")

    n_rows = len(coupling)
    rows = [structure.constraints[i] for i in coupling]
    sense_eq = np.array([r.sense is Sense.EQ for r in rows], dtype=bool)
    rhs = np.array([r.rhs for r in rows], dtype=float)
    packing = [
        r.sense is Sense.LE and r.rhs == 1 for r in rows
    ]

    blocks: list[_Block] = []
    for b, block_vars in enumerate(structure.blocks):
        variables = np.asarray(block_vars, dtype=int)
        position = {v: k for k, v in enumerate(block_vars)}
        states = []
        for bits in itertools.product((0, 1), repeat=len(block_vars)):
            full = {v: bit for v, bit in zip(block_vars, bits)}
            ok = True
            for row in local[b]:
                lhs = sum(coef * full[v] for v, coef in row.terms)
                if (row.sense is Sense.LE and lhs > row.rhs) or (
                    row.sense is Sense.EQ and lhs != row.rhs
                ):
                    ok = False
                    break
            if ok:
                states.append(bits)
        if not states:
            raise SolverError(f"block {b} has no feasible assignment")
        state_arr = np.array(states, dtype=np.int8).reshape(len(states), len(block_vars))
        usage = np.zeros((len(states), n_rows))
        for r, row in enumerate(rows):
            for v, coef in row.terms:
                if v in position:
                    usage[:, r] += coef * state_arr[:, position[v]]
        for r in range(n_rows):
            if packing[r] and not np.all((usage[:, r] == 0) | (usage[:, r] == 1)):
                packing[r] = False
        zero = [k for k, s in enumerate(states) if not any(s)]
        blocks.append(
            _Block(
                variables=variables,
                states=state_arr,
                usage=usage,
                owner=np.full(len(states), -1),
                zero_state=zero[0] if zero else -1,
            )
        )

    # A state belongs to the first packing row it uses.
    for blk in blocks:
        for k in range(len(blk.states)):
            for r in range(n_rows):
                if packing[r] and blk.usage[k, r] == 1:
                    blk.owner[k] = r
                    break

    def group(b: int) -> tuple[int, int]:
        owned = blocks[b].owner[blocks[b].owner >= 0]
        return (int(owned.min()) if owned.size else n_rows, b)

    blocks = [blocks[b] for b in sorted(range(len(blocks)), key=group)]

    nb = len(blocks)
    rest_min = np.zeros((nb + 1, n_rows))
    rest_max = np.zeros((nb + 1, n_rows))
    zero_ok_from = np.ones(nb + 1, dtype=bool)
    for b in range(nb - 1, -1, -1):
        rest_min[b] = rest_min[b + 1] + blocks[b].usage.min(axis=0)
        rest_max[b] = rest_max[b + 1] + blocks[b].usage.max(axis=0)
        zero_ok_from[b] = zero_ok_from[b + 1] and blocks[b].zero_state >= 0
    for b, blk in enumerate(blocks):
        blk.low_ahead = blk.usage + rest_min[b + 1]
        blk.high_ahead = blk.usage + rest_max[b + 1]
    return SearchPlan(
        blocks=blocks,
        rows=coupling,
        sense_eq=sense_eq,
        rhs=rhs,
        rest_min=rest_min,
        rest_max=rest_max,
        zero_ok_from=zero_ok_from,
    )


class _Search:
    """One branch-and-bound run over a plan and an objective."""

    def __init__(self, program: BinaryProgram, plan: SearchPlan):
        self.program = program
        self.plan = plan
        self.n = program.num_vars
        self.values = [blk.states @ program.objective[blk.variables] for blk in plan.blocks]
        # Best-first within a block; states are enumerated in lexicographic order,
        # so a stable sort keeps the smaller state first among ties.
        self.order = [np.argsort(-v, kind="stable").tolist() for v in self.values]
        self.unowned_rest, self.owned_rest = self._suffix_bounds()
        self.limit = plan.rhs + FEAS_EPS
        self.best_value = -math.inf
        self.best_vector: tuple[int, ...] | None = None
        self.nodes = 0
        self.assignment = np.zeros(self.n, dtype=np.int8)

    def _suffix_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """
        Bound ingredients over blocks k..end.

        unowned_rest[k]: sum of each block's best positive state owned by no row.
        owned_rest[k, r]: best positive state owned by packing row r.
        """
        plan = self.plan
        nb, n_rows = len(plan.blocks), len(plan.rows)
        unowned = np.zeros(nb)
        owned = np.zeros((nb, n_rows))
        for b, (v, blk) in enumerate(zip(self.values, plan.blocks)):
            positive = v > 0
            free = positive & (blk.owner < 0)
            if free.any():
                unowned[b] = v[free].max()
            held = positive & (blk.owner >= 0)
            np.maximum.at(owned[b], blk.owner[held], v[held])
        unowned_rest = np.zeros(nb + 1)
        unowned_rest[:nb] = np.cumsum(unowned[::-1])[::-1]
        owned_rest = np.zeros((nb + 1, n_rows))
        if nb:
            owned_rest[:nb] = np.maximum.accumulate(owned[::-1], axis=0)[::-1]
        return unowned_rest, owned_rest

    def _fitting(self, activity: np.ndarray, k: int) -> np.ndarray:
        """Mask of the states of block k that keep every coupling row satisfiable."""
        plan = self.plan
        blk = plan.blocks[k]
        ok = np.all(activity + blk.low_ahead <= self.limit, axis=1)
        if plan.has_eq:
            eq = plan.sense_eq
            ok &= np.all(activity[eq] + blk.high_ahead[:, eq] >= plan.rhs[eq] - FEAS_EPS, axis=1)
        return ok

    def _optimism(self, activity: np.ndarray, k: int) -> float:
        """Upper bound on the value the blocks k.. can still add."""
        open_rows = activity + 1.0 <= self.limit
        return float(self.unowned_rest[k] + self.owned_rest[k][open_rows].sum())

    def seed_greedy(self) -> None:
        """Start from a feasible greedy vector: blocks by best value, best fitting state."""
        plan = self.plan
        activity = np.zeros(len(plan.rows))
        vector = np.zeros(self.n, dtype=np.int8)
        ranked = sorted(range(len(plan.blocks)), key=lambda b: -float(self.values[b].max()))
        for b in ranked:
            blk = plan.blocks[b]
            for s in self.order[b]:
                if np.all(activity + blk.usage[s] <= self.limit):
                    vector[blk.variables] = blk.states[s]
                    activity = activity + blk.usage[s]
                    break
            else:
                return
        eq = plan.sense_eq
        if np.any(np.abs(activity[eq] - plan.rhs[eq]) > FEAS_EPS):
            return
        self.best_value = self.program.value_of(vector)
        self.best_vector = tuple(int(v) for v in vector)

    def _leaf(self) -> None:
        vec = tuple(int(v) for v in self.assignment)
        value = self.program.value_of(self.assignment)
        if value > self.best_value or (
            value == self.best_value and (self.best_vector is None or vec < self.best_vector)
        ):
            self.best_value = value
            self.best_vector = vec

    def _zero_completion_feasible(self, activity: np.ndarray, k: int) -> bool:
        plan = self.plan
        if not plan.zero_ok_from[k]:
            return False
        if np.any(activity > self.limit):
            return False
        eq = plan.sense_eq
        return not np.any(np.abs(activity[eq] - plan.rhs[eq]) > FEAS_EPS)

    def run(self, k: int, activity: np.ndarray, value: float) -> None:
        self.nodes += 1
        plan = self.plan
        if k == len(plan.blocks):
            self._leaf()
            return
        extra = self._optimism(activity, k)
        if self.best_vector is not None and value + extra < self.best_value - _tolerance(
            self.best_value
        ):
            return
        if extra <= 0.0 and self._zero_completion_feasible(activity, k):
            for b in range(k, len(plan.blocks)):
                self.assignment[plan.blocks[b].variables] = 0
            self._leaf()
            return

        blk = plan.blocks[k]
        fitting = self._fitting(activity, k)
        for s in self.order[k]:
            if not fitting[s]:
                continue
            self.assignment[blk.variables] = blk.states[s]
            self.run(k + 1, activity + blk.usage[s], value + self.values[k][s])
        self.assignment[blk.variables] = 0


class SolverService:
    """Exact and exhaustive solvers for snapshot programs."""

    def solve_exact(self, program: BinaryProgram) -> Decision:
        """
        Globally optimal decision by depth-first branch and bound.

        Raises:
            SolverError: if the program has no feasible assignment
        """
        if program.num_vars == 0:
            return Decision.from_values(program, np.zeros(0, dtype=np.int8))
        plan = plan_for(program.structure)
        if np.any(plan.rest_min[0] > plan.rhs + FEAS_EPS) or np.any(
            plan.rest_max[0][plan.sense_eq] < plan.rhs[plan.sense_eq] - FEAS_EPS
        ):
            raise SolverError("snapshot program is infeasible")
        search = _Search(program, plan)
        search.seed_greedy()
        search.run(0, np.zeros(len(plan.rows)), 0.0)
        if search.best_vector is None:
            raise SolverError("snapshot program is infeasible")
        logger.debug(
            "B&B solved %d vars in %d nodes, objective %.6g",
            program.num_vars, search.nodes, search.best_value,
        )
        return Decision.from_values(program, np.array(search.best_vector), nodes=search.nodes)

    def solve_bruteforce(self, program: BinaryProgram) -> Decision:
        """
        Exhaustive enumeration in lexicographic order.

        Raises:
            SolverError: above settings.bruteforce_max_vars variables, or if infeasible
        """
        n = program.num_vars
        if n > settings.bruteforce_max_vars:
            raise SolverError(
                f"{n} variables exceed the enumeration cap of {settings.bruteforce_max_vars}"
            )
        if n == 0:
            return Decision.from_values(program, np.zeros(0, dtype=np.int8))

        a = np.zeros((len(program.constraints), n))
        for r, row in enumerate(program.constraints):
            for v, coef in row.terms:
                a[r, v] += coef
        rhs = np.array([row.rhs for row in program.constraints], dtype=float)
        eq = np.array([row.sense is Sense.EQ for row in program.constraints], dtype=bool)
        shifts = np.arange(n - 1, -1, -1)

        best = -math.inf
        candidates: list[tuple[float, int]] = []
        total = 1 << n
        for start in range(0, total, BRUTEFORCE_CHUNK):
            idx = np.arange(start, min(start + BRUTEFORCE_CHUNK, total), dtype=np.int64)
            x = ((idx[:, None] >> shifts) & 1).astype(np.int8)
            lhs = x @ a.T
            ok = np.all(np.where(eq, lhs == rhs, lhs <= rhs + FEAS_EPS), axis=1)
            if not ok.any():
                continue
            values = x[ok] @ program.objective
            chunk_best = float(values.max())
            if chunk_best > best:
                best = chunk_best
                candidates = [(v, c) for v, c in candidates if v >= best - _tolerance(best)]
            keep = values >= best - _tolerance(best)
            candidates.extend(zip(values[keep].tolist(), idx[ok][keep].tolist()))

        if not candidates:
            raise SolverError("snapshot program is infeasible")
        exact_best = -math.inf
        chosen = -1
        for _, c in sorted(candidates, key=lambda item: item[1]):
            vec = (np.int64(c) >> shifts) & 1
            value = program.value_of(vec)
            if value > exact_best:
                exact_best, chosen = value, c
        values = ((np.int64(chosen) >> shifts) & 1).astype(np.int8)
        return Decision.from_values(program, values, nodes=total)

    def check_decision(self, program: BinaryProgram, decision: Decision) -> list[str]:
        """Names of the rows the decision violates (empty when feasible)."""
        values = np.asarray(decision.values)
        if values.size != program.num_vars or np.any((values != 0) & (values != 1)):
            return ["<binary>"]
        return [row.name for row in program.constraints if not row.satisfied(values)]


solver_service = SolverService()
