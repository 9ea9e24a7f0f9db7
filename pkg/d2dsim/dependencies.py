"""Dependency injection for FastAPI routes."""
from d2dsim.config import settings
from d2dsim.models.schemas import RadioParams


def get_radio_params() -> RadioParams:
    """
    Dependency to get the radio parameters derived from settings.

    Usage:
        @router.get("/layouts/{cell_type}")
        async def get_layout(params: RadioParams = Depends(get_radio_params)):
            ...
    """
    return RadioParams.from_settings(settings)
