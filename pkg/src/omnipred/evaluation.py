"""Omniprediction-error estimation and sanity checkers.

The error of a predictor is its worst per-theta excess empirical loss over
the fitted base members: ``max_i E_n[loss_i(p(X), Y)] - E_n[loss_i(f_i(X), Y)]``.
Randomized predictors are scored by exact expectation over their output law,
never by sampling.  A population mode computes the same quantities in closed
form under a declared finite covariate distribution.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataio import FiniteDistributionSpec
from .errors import ValidationError
from .losses import loss_values_vector
from .predictors import BasePredictorSet, Dataset, DeterministicPredictor


@dataclass(frozen=True)
class OmniReport:
    """Per-theta gaps against the base members plus their maximum."""

    per_theta_gaps: np.ndarray
    sup_gap: float
    argmax_theta: int  # 1-based index of the worst theta
    n_test: int  # 0 marks an exact population evaluation

    def __post_init__(self):
        gaps = np.asarray(self.per_theta_gaps, dtype=float)
        if gaps.ndim != 1 or gaps.size < 1:
            raise ValidationError("per-theta gaps must be a nonempty vector")
        if (np.abs(gaps) > 1.0 + 1e-12).any():
            raise ValidationError("per-theta gaps must lie in [-1, 1]")
        if abs(self.sup_gap - gaps.max()) > 1e-12:
            raise ValidationError("sup gap must equal the largest per-theta gap")
        if not 1 <= self.argmax_theta <= gaps.size:
            raise ValidationError("argmax theta index out of range")
        gaps.setflags(write=False)
        object.__setattr__(self, "per_theta_gaps", gaps)

    @classmethod
    def from_gaps(cls, gaps: np.ndarray, n_test: int) -> "OmniReport":
        gaps = np.asarray(gaps, dtype=float)
        worst = int(np.argmax(gaps))
        return cls(gaps, float(gaps[worst]), worst + 1, n_test)


def _is_randomized(predictor) -> bool:
    return hasattr(predictor, "predict_dist_matrix") and hasattr(predictor, "support_values")


def _loss_tables(values: np.ndarray, thetas: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Weighted losses of each support value against each theta, per label."""
    v = np.asarray(values, dtype=float)[:, None]
    t = np.asarray(thetas, dtype=float)[None, :]
    above = v > t
    return np.where(above, t, 0.0), np.where(~above, 1.0 - t, 0.0)


def _base_member_losses(base: BasePredictorSet, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Mean loss of member i under theta_i, vectorised; shape (m,)."""
    lows = base.low_matrix(X)
    thetas = base.grid.thetas
    y_col = y[:, None]
    loss = np.where(y_col == 1, np.where(lows, 1.0 - thetas, 0.0), np.where(lows, 0.0, thetas))
    return loss.mean(axis=0)


def predictor_theta_losses(predictor, base: BasePredictorSet, data: Dataset) -> np.ndarray:
    """Mean weighted loss of ``predictor`` at every grid theta; shape (m,)."""
    thetas = base.grid.thetas
    if _is_randomized(predictor):
        values = np.asarray(predictor.support_values(), dtype=float)
        probs = predictor.predict_dist_matrix(data.X)
        L0, L1 = _loss_tables(values, thetas)
        y_col = data.y[:, None]
        expected = np.where(y_col == 1, probs @ L1, probs @ L0)
        return expected.mean(axis=0)
    preds = np.asarray(predictor.predict(data.X), dtype=float)
    return loss_values_vector(thetas, preds, data.y).mean(axis=0)


def omni_error(predictor, base: BasePredictorSet, test: Dataset) -> OmniReport:
    """Empirical omniprediction error of a predictor against the base members."""
    if test.n == 0:
        raise ValidationError("cannot evaluate on an empty test set")
    gaps = predictor_theta_losses(predictor, base, test) - _base_member_losses(
        base, test.X, test.y
    )
    return OmniReport.from_gaps(gaps, test.n)


def _expected_theta_losses_at(values, probs, p_true: float, thetas: np.ndarray) -> np.ndarray:
    """Exact E_{Y ~ Ber(p_true)} expected loss per theta for an output law."""
    L0, L1 = _loss_tables(np.asarray(values, dtype=float), thetas)
    mix = np.asarray(probs, dtype=float)
    return (1.0 - p_true) * (mix @ L0) + p_true * (mix @ L1)


def population_omni_error(
    predictor, base: BasePredictorSet, dist: FiniteDistributionSpec
) -> OmniReport:
    """Exact omniprediction error under a finite covariate distribution."""
    thetas = base.grid.thetas
    X = dist.covariates()
    lows = base.low_matrix(X)
    gaps = np.zeros(base.m)
    if _is_randomized(predictor):
        values = predictor.support_values()
        prob_rows = predictor.predict_dist_matrix(X)
    else:
        values = None
        preds = np.asarray(predictor.predict(X), dtype=float)
    for k, (w, p_true) in enumerate(zip(dist.px, dist.py_given_x)):
        if values is not None:
            pred_loss = _expected_theta_losses_at(values, prob_rows[k], p_true, thetas)
        else:
            pred_loss = _expected_theta_losses_at([preds[k]], [1.0], p_true, thetas)
        member_vals = np.where(
            lows[k], (np.arange(1, base.m + 1) - 1) / base.m, np.arange(1, base.m + 1) / base.m
        )
        member_loss = np.array(
            [
                _expected_theta_losses_at([member_vals[i]], [1.0], p_true, thetas[i : i + 1])[0]
                for i in range(base.m)
            ]
        )
        gaps += w * (pred_loss - member_loss)
    return OmniReport.from_gaps(gaps, 0)


def best_base_model(
    pool: Sequence[DeterministicPredictor], base: BasePredictorSet, data: Dataset
) -> DeterministicPredictor:
    """Pool member minimising the empirical omniprediction error; ties by index."""
    if not pool:
        raise ValidationError("candidate pool is empty")
    if data.n == 0:
        raise ValidationError("cannot select on an empty dataset")
    base_losses = _base_member_losses(base, data.X, data.y)
    best_idx = 0
    best_gap = np.inf
    for idx, candidate in enumerate(pool):
        losses = predictor_theta_losses(candidate, base, data)
        gap = float((losses - base_losses).max())
        if gap < best_gap - 1e-15:
            best_idx, best_gap = idx, gap
    return pool[best_idx]


def l1_sandwich(
    p: DeterministicPredictor,
    p_star: DeterministicPredictor,
    dist: FiniteDistributionSpec,
    fine_grid_size: int = 500,
) -> tuple[float, float, float]:
    """L1-distance sandwich around the worst-case proper-loss gap.

    Returns ``(lower, middle, upper)`` where ``middle`` is the exact maximum
    expected-loss gap over a ``fine_grid_size``-point theta grid and the
    bounds are ``E[|p - p*|]^2 / 210`` and ``2 E[|p - p*|]``.  The sandwich is
    asserted up to the grid-discretisation slack ``2 / fine_grid_size``.
    """
    if fine_grid_size < 100:
        raise ValidationError("sandwich check needs a theta grid of at least 100 points")
    X = dist.covariates()
    w = np.asarray(dist.px, dtype=float)
    p_true = np.asarray(dist.py_given_x, dtype=float)
    pv = np.asarray(p.predict(X), dtype=float)
    sv = np.asarray(p_star.predict(X), dtype=float)

    l1 = float(w @ np.abs(pv - sv))
    lower = l1 * l1 / 210.0
    upper = 2.0 * l1

    k = fine_grid_size
    thetas = (2.0 * np.arange(1, k + 1) - 1.0) / (2.0 * k)
    above_p = pv[:, None] > thetas[None, :]
    above_s = sv[:, None] > thetas[None, :]

    def expected(above):
        return np.where(above, thetas * (1.0 - p_true[:, None]), (1.0 - thetas) * p_true[:, None])

    gap = w @ (expected(above_p) - expected(above_s))
    middle = float(gap.max())

    tol = 2.0 / k
    if not (lower - tol <= middle <= upper + tol):
        raise ValidationError(
            f"sandwich violated: lower={lower}, middle={middle}, upper={upper}, tol={tol}"
        )
    return lower, middle, upper
