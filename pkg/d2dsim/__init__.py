"""Multi-cell D2D-enabled cellular network simulator."""

__version__ = "1.0.0"
