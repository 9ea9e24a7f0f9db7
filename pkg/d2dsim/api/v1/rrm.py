"""Single-snapshot scheduling and mode selection API routes."""
import numpy as np
from fastapi import APIRouter
from fastapi.concurrency import run_in_threadpool

from d2dsim.core.exceptions import ValidationError
from d2dsim.decorators import handle_exceptions
from d2dsim.models.domain import EntityUtilities, SnapshotProblem
from d2dsim.models.schemas import SolveRequest, SolveResponse
from d2dsim.services.rrm_service import rrm_service

router = APIRouter(prefix="/rrm", tags=["Scheduling"])


def _solve(req: SolveRequest) -> SolveResponse:
    if not req.cues and not req.pairs:
        raise ValidationError("at least one CUE or pair is required")
    try:
        utilities = EntityUtilities(
            u_leg=[c.utility_bps for c in req.cues],
            u_dm=[p.dm_utility_bps for p in req.pairs],
            u_cm=[p.cm_utility_bps for p in req.pairs],
            weights=[c.weight for c in req.cues] + [p.weight for p in req.pairs],
        )
    except ValueError as e:
        raise ValidationError(str(e)) from e
    problem = SnapshotProblem(
        scheme=req.scheme,
        utilities=utilities,
        cue_cell=np.array([c.cell for c in req.cues], dtype=int),
        pair_tx_cell=np.array([p.tx_cell for p in req.pairs], dtype=int),
        pair_rx_cell=np.array([p.rx_cell for p in req.pairs], dtype=int),
        pair_distance=np.array([p.distance_m for p in req.pairs], dtype=float),
        d_max=req.d_max_m,
        force_cellular=req.force_cellular,
    )
    program = rrm_service.build_program(problem)
    decision = rrm_service.solve_exact(program)
    return SolveResponse(
        scheduled=decision.y.tolist(),
        direct_mode=decision.x.tolist(),
        objective_value=decision.objective_value,
        nodes=decision.nodes,
        lp=rrm_service.to_lp_text(program) if req.include_lp else None,
    )


@router.post("/solve", response_model=SolveResponse)
@handle_exceptions
async def solve_snapshot(req: SolveRequest):
    """
    Optimal joint mode selection and scheduling for one snapshot.

    Entities are the listed CUEs followed by the listed pairs; `scheduled` holds one
    flag per entity and `direct_mode` one flag per pair.
    """
    return await run_in_threadpool(_solve, req)
