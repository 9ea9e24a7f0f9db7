"""Custom decorators for route handlers."""
from functools import wraps
from typing import Any, Callable

from fastapi import HTTPException


def handle_exceptions(func: Callable) -> Callable:
    """
    Decorator to handle common exceptions in routes.

    Usage:
        @router.post("/endpoint")
        @handle_exceptions
        async def endpoint():
            ...
    """
    @wraps(func)
    async def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return await func(*args, **kwargs)
        except HTTPException:
            # AppException subclasses carry their own status code
            raise
        except Exception as e:
            error_msg = str(e) or repr(e) or f"{type(e).__name__}: An error occurred"
            raise HTTPException(
                status_code=500,
                detail=f"Internal server error: {error_msg}"
            )

    return wrapper
