"""Threshold grid shared by every algorithm in the package.

For resolution ``m`` the loss parameters are ``theta_i = i/m - 1/(2m)``
(``i = 1..m``) and predictions live on the interleaved grid
``{0, 1/m, ..., 1}``.  Over the common denominator ``2m`` the thetas have odd
numerators and the prediction values even numerators, so "prediction vs theta"
comparisons reduce to exact integer comparisons:

    j/m >  theta_i  <=>  j >= i
    j/m <= theta_i  <=>  j <  i

All grid-based code in this package works on the integer indices (``j`` for
predictions, ``i`` for thetas) and only converts to floats at the edges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class ThetaGrid:
    """The ``m`` loss parameters and the ``m + 1`` point prediction grid."""

    m: int
    thetas: np.ndarray = field(init=False, repr=False)
    pred_grid: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not isinstance(self.m, (int, np.integer)) or self.m < 1:
            raise ValidationError(f"grid resolution must be a positive integer, got {self.m!r}")
        m = int(self.m)
        object.__setattr__(self, "m", m)
        thetas = (2.0 * np.arange(1, m + 1) - 1.0) / (2.0 * m)
        preds = np.arange(m + 1) / m
        thetas.setflags(write=False)
        preds.setflags(write=False)
        object.__setattr__(self, "thetas", thetas)
        object.__setattr__(self, "pred_grid", preds)

    def theta(self, i: int) -> float:
        """Value of theta_i for a 1-based theta index."""
        if not 1 <= i <= self.m:
            raise ValidationError(f"theta index {i} outside 1..{self.m}")
        return (2 * i - 1) / (2 * self.m)

    def pred_value(self, j: int) -> float:
        """Value of the j-th prediction grid point, ``j = 0..m``."""
        if not 0 <= j <= self.m:
            raise ValidationError(f"prediction index {j} outside 0..{self.m}")
        return j / self.m

    def nearest_theta_index(self, theta: float) -> int:
        """1-based index of the grid theta closest to ``theta`` (ties round up)."""
        if not 0.0 <= theta <= 1.0:
            raise ValidationError(f"theta {theta} outside [0, 1]")
        # theta_i is nearest iff theta in [(i-1)/m, i/m]; ties at cell edges go up.
        i = int(math.floor(theta * self.m)) + 1
        return min(max(i, 1), self.m)


def round_to_grid(p: float, m: int) -> float:
    """Round ``p`` to the nearest point of ``{0, 1/m, ..., 1}``, ties down.

    The output differs from ``p`` by at most ``1/(2m)``; exact midpoints map to
    the lower neighbour.
    """
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"prediction {p} outside [0, 1]")
    if not isinstance(m, (int, np.integer)) or m < 1:
        raise ValidationError(f"grid resolution must be a positive integer, got {m!r}")
    j = int(math.ceil(p * m - 0.5))
    j = min(max(j, 0), int(m))
    return j / m


def default_grid_size(n: int) -> int:
    """Default resolution ``2 ** floor(log2(sqrt(n)))`` for a sample of size n."""
    if n < 1:
        raise ValidationError(f"sample size must be positive, got {n}")
    if n < 4:
        return 1
    return 2 ** int(math.floor(math.log2(math.sqrt(n))))
