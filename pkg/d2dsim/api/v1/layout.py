"""Cell layout API routes."""
from fastapi import APIRouter, Depends, Path

from d2dsim.decorators import handle_exceptions
from d2dsim.dependencies import get_radio_params
from d2dsim.models.schemas import CellOut, LayoutResponse, RadioParams
from d2dsim.services.channel_service import channel_service
from d2dsim.services.topology_service import topology_service

router = APIRouter(prefix="/layouts", tags=["Topology"])


@router.get("/{cell_type}", response_model=LayoutResponse)
@handle_exceptions
async def get_layout(
    cell_type: int = Path(..., ge=1, le=5),
    params: RadioParams = Depends(get_radio_params),
):
    """
    Hexagonal layout of a cell type.

    Args:
        cell_type: Cell type id (1..5)
        params: Radio parameters used for the cell-edge SNR

    Returns:
        Cell centers, neighbor lists, eNB density, areas and cell-edge SNR
    """
    layout = topology_service.build_layout(cell_type)
    return LayoutResponse(
        cell_type=cell_type,
        num_cells=layout.num_cells,
        radius_m=layout.radius_m,
        enb_density_per_km2=layout.enb_density,
        hexagon_area_km2=layout.cell_type.hexagon_area_km2,
        coverage_km2=layout.cell_type.coverage_km2,
        cell_edge_snr_db=channel_service.cell_edge_snr_db(layout, params),
        cells=[
            CellOut(
                cell_id=cell.cell_id,
                center=cell.center,
                radius_m=cell.radius_m,
                neighbors=list(layout.neighbors(cell.cell_id)),
            )
            for cell in layout.cells
        ],
    )
