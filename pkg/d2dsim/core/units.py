"""dBm / mW conversions."""
import numpy as np
from numpy.typing import ArrayLike


def dbm_to_mw(dbm: ArrayLike) -> np.ndarray | float:
    """Convert dBm to mW. -inf dBm maps to 0 mW."""
    value = np.power(10.0, np.asarray(dbm, dtype=float) / 10.0)
    return float(value) if value.ndim == 0 else value


def mw_to_dbm(mw: ArrayLike) -> np.ndarray | float:
    """Convert mW to dBm. 0 mW maps to -inf dBm."""
    with np.errstate(divide="ignore"):
        value = 10.0 * np.log10(np.asarray(mw, dtype=float))
    return float(value) if value.ndim == 0 else value
