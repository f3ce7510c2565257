"""Weighted 0-1 losses and their mixtures.

The two-branch loss

    loss_theta(p, y) = theta * 1{p > theta, y = 0} + (1 - theta) * 1{p <= theta, y = 1}

is proper: reporting the true Bernoulli parameter always minimises its
expectation.  Mixtures of these losses over theta recover every bounded,
left-continuous proper loss (up to translation), which is why the algorithms
here only ever need to control a finite grid of thetas.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


def _check_unit(name: str, value: float) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ValidationError(f"{name} must lie in [0, 1], got {value}")
    return value


def _check_binary(y) -> int:
    if y not in (0, 1):
        raise ValidationError(f"label must be 0 or 1, got {y!r}")
    return int(y)


def weighted_loss(theta: float, p: float, y) -> float:
    """Weighted 0-1 loss. Comparison ``p > theta`` is strict, ``p <= theta`` inclusive."""
    theta = _check_unit("theta", theta)
    p = _check_unit("p", p)
    y = _check_binary(y)
    if y == 0:
        return theta if p > theta else 0.0
    return (1.0 - theta) if p <= theta else 0.0


def expected_weighted_loss(theta: float, p: float, p_true: float) -> float:
    """Expectation of ``weighted_loss(theta, p, Y)`` under ``Y ~ Bernoulli(p_true)``."""
    theta = _check_unit("theta", theta)
    p = _check_unit("p", p)
    p_true = _check_unit("p_true", p_true)
    if p > theta:
        return theta * (1.0 - p_true)
    return p_true * (1.0 - theta)


@dataclass(frozen=True)
class MixtureMeasure:
    """Discrete measure over theta used to build mixtures of weighted losses.

    Atoms are ``(theta, weight)`` pairs with nonnegative weights, sorted by
    theta.  Continuous measures are approximated by the caller with a fine
    atom grid.
    """

    atoms: tuple

    def __post_init__(self):
        cleaned = []
        last = -1.0
        for theta, weight in self.atoms:
            theta = _check_unit("atom theta", theta)
            weight = float(weight)
            if weight < 0.0:
                raise ValidationError(f"atom weight must be nonnegative, got {weight}")
            if theta < last:
                raise ValidationError("atom thetas must be sorted ascending")
            last = theta
            cleaned.append((theta, weight))
        object.__setattr__(self, "atoms", tuple(cleaned))

    @classmethod
    def from_density(cls, density, k: int) -> "MixtureMeasure":
        """Midpoint discretisation of ``density`` on [0, 1] with ``k`` atoms."""
        if k < 1:
            raise ValidationError("atom count must be positive")
        thetas = (2.0 * np.arange(1, k + 1) - 1.0) / (2.0 * k)
        return cls(tuple((float(t), float(density(t)) / k) for t in thetas))

    def total_mass(self) -> float:
        return float(sum(w for _, w in self.atoms))


def mixture_loss(measure: MixtureMeasure, p: float, y) -> float:
    """Mixture ``sum_atoms weight * weighted_loss(theta, p, y)``; empty measure gives 0."""
    p = _check_unit("p", p)
    y = _check_binary(y)
    if not measure.atoms:
        return 0.0
    thetas = np.array([t for t, _ in measure.atoms])
    weights = np.array([w for _, w in measure.atoms])
    if y == 0:
        branch = np.where(p > thetas, thetas, 0.0)
    else:
        branch = np.where(p <= thetas, 1.0 - thetas, 0.0)
    return float(weights @ branch)


def grid_loss_table(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Loss of every grid prediction against every grid theta, split by label.

    Returns ``(L0, L1)`` of shape ``(m + 1, m)`` where ``L0[j, i-1]`` is the
    loss of predicting ``j/m`` under ``theta_i`` when ``y = 0`` and ``L1`` the
    same for ``y = 1``.  Grid comparisons are exact: ``j/m > theta_i`` iff
    ``j >= i``.
    """
    i = np.arange(1, m + 1)
    j = np.arange(m + 1)[:, None]
    thetas = (2.0 * i - 1.0) / (2.0 * m)
    above = j >= i
    L0 = np.where(above, thetas, 0.0)
    L1 = np.where(~above, 1.0 - thetas, 0.0)
    return L0, L1


def loss_values_vector(thetas: np.ndarray, p: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Vectorised ``weighted_loss`` for per-sample predictions against many thetas.

    ``p`` and ``y`` have shape (n,), ``thetas`` shape (m,); result is (n, m).
    Used for off-grid predictions, where float comparisons are the contract.
    """
    p = np.asarray(p, dtype=float)[:, None]
    y = np.asarray(y)[:, None]
    t = np.asarray(thetas, dtype=float)[None, :]
    above = p > t
    return np.where(y == 0, np.where(above, t, 0.0), np.where(~above, 1.0 - t, 0.0))
