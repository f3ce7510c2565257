"""Scikit-learn style estimator wrappers.

Each estimator validates ``(X, y)``, runs the corresponding fitting routine,
and stores the fitted artifact on a trailing-underscore attribute.  The
ensembling estimators take a fitted ``BasePredictorSet`` as a constructor
parameter: base predictors are meant to be fitted on a sample disjoint from
the ensembling sample, so that split stays in the caller's hands (use
``ThresholdERMFitter`` on the held-out part).
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator

from .calma import AuxiliaryClass, calma_boost, default_alpha
from .ensemble import ensemble_scheme
from .errors import ValidationError
from .evaluation import best_base_model
from .game import default_eta, run_two_player
from .grids import ThetaGrid
from .predictors import BasePredictorSet, Dataset, enumerate_linear_candidates, fit_base_set


def _as_dataset(X, y) -> Dataset:
    if y is None:
        raise ValidationError("binary labels are required")
    return Dataset(np.asarray(X, dtype=float), np.asarray(y))


def _require_base(base) -> BasePredictorSet:
    if not isinstance(base, BasePredictorSet):
        raise ValidationError(
            "pass a fitted BasePredictorSet (see ThresholdERMFitter), fitted on "
            "data disjoint from the ensembling sample"
        )
    return base


class ThresholdERMFitter(BaseEstimator):
    """Fits one recoded threshold predictor per grid level.

    Parameters
    ----------
    m : grid resolution (number of thresholds).
    candidates : "linear-1d" to enumerate affine candidates on the sample,
        or an explicit list of predictors.
    """

    def __init__(self, m=16, candidates="linear-1d"):
        self.m = m
        self.candidates = candidates

    def fit(self, X, y):
        data = _as_dataset(X, y)
        if self.candidates == "linear-1d":
            candidates = enumerate_linear_candidates(data)
        else:
            candidates = list(self.candidates)
        self.base_set_ = fit_base_set(candidates, data, ThetaGrid(self.m))
        return self

    def transform(self, X):
        """Recoded member outputs, shape (n, m)."""
        return self.base_set_.value_matrix(np.atleast_2d(np.asarray(X, dtype=float)))


class TwoPlayerOmnipredictor(BaseEstimator):
    """Randomized omnipredictor driven by the online two-player game.

    ``predict`` returns the mean of the averaged response distribution;
    ``predict_dist`` exposes the full distribution over the prediction grid.
    """

    def __init__(self, base=None, eta=None, eta_c=32.0, stride=1):
        self.base = base
        self.eta = eta
        self.eta_c = eta_c
        self.stride = stride

    def fit(self, X, y):
        base = _require_base(self.base)
        data = _as_dataset(X, y)
        eta = self.eta if self.eta is not None else default_eta(base.m, data.n, self.eta_c)
        self.predictor_ = run_two_player(data, base, eta)
        self.eta_ = eta
        return self

    def predict(self, X):
        return self.predictor_.predict(np.atleast_2d(np.asarray(X, dtype=float)))

    def predict_dist(self, X):
        return self.predictor_.predict_dist_matrix(
            np.atleast_2d(np.asarray(X, dtype=float)), stride=self.stride
        )


class DirectEnsembleOmnipredictor(BaseEstimator):
    """Deterministic omnipredictor built by pairwise merging."""

    def __init__(self, base=None, epsilon=None, eps_c=0.0, split=False):
        self.base = base
        self.epsilon = epsilon
        self.eps_c = eps_c
        self.split = split

    def fit(self, X, y):
        base = _require_base(self.base)
        data = _as_dataset(X, y)
        if self.epsilon is not None:
            epsilon = self.epsilon
        else:
            epsilon = self.eps_c * math.sqrt(math.log(max(base.m, 2)) / data.n)
        self.predictor_ = ensemble_scheme(base, data, epsilon=epsilon, split=self.split)
        self.epsilon_ = epsilon
        return self

    def predict(self, X):
        return self.predictor_.predict(np.atleast_2d(np.asarray(X, dtype=float)))


class CalibratedMultiaccuracyOmnipredictor(BaseEstimator):
    """Boosting baseline: alternate residual corrections with recalibration."""

    def __init__(self, base=None, alpha=None, alpha_c=0.5, max_iters=100_000):
        self.base = base
        self.alpha = alpha
        self.alpha_c = alpha_c
        self.max_iters = max_iters

    def fit(self, X, y):
        base = _require_base(self.base)
        data = _as_dataset(X, y)
        aux = AuxiliaryClass.from_base_set(base)
        alpha = self.alpha if self.alpha is not None else default_alpha(base.m, data.n, self.alpha_c)
        self.predictor_ = calma_boost(base, aux, data, alpha=alpha, max_iters=self.max_iters)
        self.alpha_ = alpha
        self.warning_ = self.predictor_.warning
        return self

    def predict(self, X):
        return self.predictor_.predict(np.atleast_2d(np.asarray(X, dtype=float)))


class BestBaseOmnipredictor(BaseEstimator):
    """Selects the pool member with the lowest empirical omniprediction error."""

    def __init__(self, base=None, pool=None):
        self.base = base
        self.pool = pool

    def fit(self, X, y):
        base = _require_base(self.base)
        data = _as_dataset(X, y)
        pool = list(self.pool) if self.pool is not None else list(base.members)
        self.predictor_ = best_base_model(pool, base, data)
        return self

    def predict(self, X):
        return self.predictor_.predict(np.atleast_2d(np.asarray(X, dtype=float)))
