"""Custom exceptions for the simulator."""
from fastapi import HTTPException


class AppException(HTTPException):
    """Base application exception."""

    def __str__(self) -> str:
        return str(self.detail)


class ValidationError(AppException):
    """Validation errors."""
    def __init__(self, detail: str = "Validation failed"):
        super().__init__(status_code=400, detail=detail)


class ConfigError(ValidationError):
    """Experiment configuration errors (bad key or out-of-range value)."""
    def __init__(self, detail: str = "Invalid configuration"):
        super().__init__(detail=detail)


class NotFoundError(AppException):
    """Resource not found errors."""
    def __init__(self, detail: str = "Resource not found"):
        super().__init__(status_code=404, detail=detail)


class GeometryError(AppException):
    """Geometrically impossible placement (rejection sampling gave up)."""
    def __init__(self, detail: str = "Placement failed"):
        super().__init__(status_code=422, detail=detail)


class CalibrationError(AppException):
    """Boundary interference CDF missing or empty."""
    def __init__(self, detail: str = "Boundary interference calibration not run"):
        super().__init__(status_code=409, detail=detail)


class SolverError(AppException):
    """Solver defects: infeasible program, enumeration cap, violated rows."""
    def __init__(self, detail: str = "Solver failure"):
        super().__init__(status_code=500, detail=detail)
