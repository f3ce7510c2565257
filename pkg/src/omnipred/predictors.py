"""Datasets, deterministic predictors, and per-threshold base fitting.

Base predictors are fitted one per grid theta by empirical risk minimisation
over a finite candidate list, then recoded onto the two-point support
``{theta_i - 1/(2m), theta_i + 1/(2m)}`` so that each member carries exactly
one bit of information: whether the fitted function sits above or below its
theta.  Those two support values are the prediction-grid points ``(i-1)/m``
and ``i/m``, so downstream algorithms can work on integer grid indices.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from .errors import UnseenCovariateError, UnsupportedDimensionError, ValidationError
from .grids import ThetaGrid
from .losses import loss_values_vector


@dataclass(frozen=True)
class Dataset:
    """Covariate/label pairs with a stable row order.

    ``X`` has shape (n, dim) and ``y`` contains 0/1 labels.  Online algorithms
    consume rows in order, so the order is part of the data.
    """

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2:
            raise ValidationError(f"covariates must be a 2-D array, got shape {X.shape}")
        y = np.asarray(self.y)
        if y.shape != (X.shape[0],):
            raise ValidationError(f"labels must have shape ({X.shape[0]},), got {y.shape}")
        if not np.isin(y, (0, 1)).all():
            raise ValidationError("labels must be 0 or 1")
        y = y.astype(np.int8)
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.X[idx], self.y[idx])


@runtime_checkable
class DeterministicPredictor(Protocol):
    """Anything that maps a batch of covariates to values in [0, 1]."""

    def predict(self, X: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class ConstantPredictor:
    value: float

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.full(X.shape[0], float(self.value))

    def to_config(self) -> dict:
        return {"kind": "constant", "value": self.value}


@dataclass(frozen=True)
class AffinePredictor:
    """1-D affine rule ``clip(b0 + b1 * x, 0, 1)``.

    Clipping keeps outputs in [0, 1] and never changes which side of a theta
    in (0, 1) the output falls on, so it does not perturb weighted losses.
    """

    b0: float
    b1: float

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != 1:
            raise UnsupportedDimensionError("affine candidates are defined for 1-D covariates")
        return np.clip(self.b0 + self.b1 * X[:, 0], 0.0, 1.0)

    def to_config(self) -> dict:
        return {"kind": "affine", "b0": self.b0, "b1": self.b1}


@dataclass(frozen=True)
class LookupPredictor:
    """Predictor backed by a per-covariate table; unseen covariates are an error."""

    table: dict

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.empty(X.shape[0])
        for k, row in enumerate(X):
            key = tuple(row.tolist())
            if key not in self.table:
                raise UnseenCovariateError(f"no stored prediction for covariate {key}")
            out[k] = self.table[key]
        return out

    def to_config(self) -> dict:
        return {
            "kind": "lookup",
            "entries": [[list(k), v] for k, v in sorted(self.table.items())],
        }


def predictor_from_config(config: dict) -> DeterministicPredictor:
    kind = config.get("kind")
    if kind == "constant":
        return ConstantPredictor(float(config["value"]))
    if kind == "affine":
        return AffinePredictor(float(config["b0"]), float(config["b1"]))
    if kind == "lookup":
        return LookupPredictor({tuple(k): float(v) for k, v in config["entries"]})
    if kind == "recoded":
        return RecodedPredictor(
            predictor_from_config(config["inner"]),
            int(config["theta_index"]),
            int(config["m"]),
        )
    raise ValidationError(f"unknown predictor kind {kind!r}")


@dataclass(frozen=True)
class GridDistribution:
    """Probability distribution over the prediction grid ``{0, 1/m, ..., 1}``."""

    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim != 1 or probs.size < 2:
            raise ValidationError("grid distribution needs a 1-D vector of length m + 1")
        if (probs < 0).any():
            raise ValidationError("grid distribution entries must be nonnegative")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValidationError(f"grid distribution must sum to 1, got {probs.sum()!r}")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def m(self) -> int:
        return self.probs.size - 1

    def mean(self) -> float:
        m = self.m
        return float(self.probs @ (np.arange(m + 1) / m))


@dataclass(frozen=True)
class RecodedPredictor:
    """A fitted predictor collapsed to the two-point support around theta_i.

    Outputs ``(i-1)/m`` when the inner function is <= theta_i (tie goes low)
    and ``i/m`` otherwise.
    """

    inner: DeterministicPredictor
    theta_index: int
    m: int

    @property
    def theta(self) -> float:
        return (2 * self.theta_index - 1) / (2 * self.m)

    @property
    def support(self) -> tuple[float, float]:
        return ((self.theta_index - 1) / self.m, self.theta_index / self.m)

    def is_low(self, X: np.ndarray) -> np.ndarray:
        return self.inner.predict(X) <= self.theta

    def predict(self, X: np.ndarray) -> np.ndarray:
        low, high = self.support
        return np.where(self.is_low(X), low, high)

    def to_config(self) -> dict:
        return {
            "kind": "recoded",
            "theta_index": self.theta_index,
            "m": self.m,
            "inner": self.inner.to_config(),
        }


@dataclass(frozen=True)
class BasePredictorSet:
    """One recoded predictor per grid theta, in theta order."""

    grid: ThetaGrid
    members: tuple

    def __post_init__(self):
        if len(self.members) != self.grid.m:
            raise ValidationError(
                f"expected {self.grid.m} members, got {len(self.members)}"
            )
        for i, member in enumerate(self.members, start=1):
            if member.theta_index != i or member.m != self.grid.m:
                raise ValidationError(f"member {i} does not match its grid slot")
        object.__setattr__(self, "members", tuple(self.members))

    @property
    def m(self) -> int:
        return self.grid.m

    def low_matrix(self, X: np.ndarray) -> np.ndarray:
        """Boolean (n, m) matrix: member i output sits at its low support value."""
        return np.column_stack([member.is_low(X) for member in self.members])

    def value_matrix(self, X: np.ndarray) -> np.ndarray:
        """Float (n, m) matrix of recoded member outputs."""
        return np.column_stack([member.predict(X) for member in self.members])

    def to_config(self) -> dict:
        return {"m": self.grid.m, "members": [mb.to_config() for mb in self.members]}

    @classmethod
    def from_config(cls, config: dict) -> "BasePredictorSet":
        grid = ThetaGrid(int(config["m"]))
        members = []
        for raw in config["members"]:
            if raw.get("kind") != "recoded":
                raise ValidationError("base set members must be recoded predictors")
            members.append(
                RecodedPredictor(
                    predictor_from_config(raw["inner"]),
                    int(raw["theta_index"]),
                    int(raw["m"]),
                )
            )
        return cls(grid, tuple(members))


def erm_fit(
    candidates: Sequence[DeterministicPredictor], data: Dataset, theta: float
) -> DeterministicPredictor:
    """Candidate with the lowest empirical weighted loss at ``theta``.

    Ties are broken by the lowest candidate index, which keeps repeated sweeps
    reproducible.
    """
    if not candidates:
        raise ValidationError("candidate list is empty")
    if data.n == 0:
        raise ValidationError("cannot fit on an empty dataset")
    if not 0.0 <= theta <= 1.0:
        raise ValidationError(f"theta {theta} outside [0, 1]")
    best_idx = 0
    best_risk = np.inf
    for idx, candidate in enumerate(candidates):
        p = candidate.predict(data.X)
        risk = loss_values_vector(np.array([theta]), p, data.y)[:, 0].mean()
        if risk < best_risk - 1e-15:
            best_idx, best_risk = idx, risk
    return candidates[best_idx]


def enumerate_linear_candidates(data: Dataset) -> list[DeterministicPredictor]:
    """Affine candidates realising every monotone above/below pattern on the sample.

    For 1-D covariates an affine function thresholds the sorted x values one
    way or the other, so it suffices to return one steep (saturated) affine
    function per cut and direction.  Saturation pins each sample's output to
    0 or 1, which makes the induced pattern independent of the theta it is
    later compared against.  The list grows linearly with the number of
    distinct x values; duplicates do not add candidates.
    """
    if data.dim != 1:
        raise UnsupportedDimensionError(
            f"linear candidate enumeration supports 1-D covariates, got dim={data.dim}"
        )
    xs = np.unique(data.X[:, 0])
    cuts = [xs[0] - 1.0]
    cuts.extend((xs[:-1] + xs[1:]) / 2.0)
    cuts.append(xs[-1] + 1.0)
    min_gap = np.min(np.diff(xs)) if xs.size > 1 else 1.0
    slope = 2.0 / min_gap
    candidates: list[DeterministicPredictor] = []
    for cut in cuts:
        candidates.append(AffinePredictor(0.5 - slope * cut, slope))
        candidates.append(AffinePredictor(0.5 + slope * cut, -slope))
    return candidates


def fit_base_set(
    candidates: Sequence[DeterministicPredictor], data: Dataset, grid: ThetaGrid
) -> BasePredictorSet:
    """ERM per grid theta followed by the two-point recoding."""
    members = []
    for i in range(1, grid.m + 1):
        fitted = erm_fit(candidates, data, grid.theta(i))
        members.append(RecodedPredictor(fitted, i, grid.m))
    return BasePredictorSet(grid, tuple(members))
