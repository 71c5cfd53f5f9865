import math

import numpy as np

from frackin.errors import DomainError, GridMismatchError


def is_power_of_two(count: int) -> bool:
    """Check if a node count is a positive power of two."""
    return count > 0 and count & (count - 1) == 0


def check_finite(name: str, values: "np.ndarray | float") -> None:
    """Raise if any value is NaN or infinite."""
    if not np.all(np.isfinite(values)):
        raise DomainError(f"{name} contains non-finite values")


def check_positive(name: str, value: float) -> None:
    """Raise if a scalar is not strictly positive and finite."""
    if not (math.isfinite(value) and value > 0):
        raise DomainError(f"{name} must be positive, got {value}")


def check_alpha(alpha: float, lower: float = 0.0, upper: float = 2.0) -> None:
    """Raise unless `lower < alpha <= upper`."""
    if not (math.isfinite(alpha) and lower < alpha <= upper):
        raise DomainError(f"alpha must lie in ({lower}, {upper}], got {alpha}")


def check_same_grid(*fields: object) -> None:
    """Raise if the given fields do not all share one grid."""
    grids = [field.grid for field in fields]
    if any(grid != grids[0] for grid in grids[1:]):
        raise GridMismatchError("fields are defined on different grids")
