import numpy as np
import pytest
from sklearn.base import clone

from omnipred import (
    BestBaseOmnipredictor,
    CalibratedMultiaccuracyOmnipredictor,
    DirectEnsembleOmnipredictor,
    ThresholdERMFitter,
    TwoPlayerOmnipredictor,
    ValidationError,
    gen_simulated,
)


@pytest.fixture(scope="module")
def fitted_base():
    fit = gen_simulated(400, 0)
    return ThresholdERMFitter(m=4).fit(fit.X, fit.y).base_set_


@pytest.fixture(scope="module")
def train():
    return gen_simulated(150, 1)


def test_threshold_fitter_api(fitted_base):
    fitter = ThresholdERMFitter(m=4)
    assert fitter.get_params() == {"m": 4, "candidates": "linear-1d"}
    fit = gen_simulated(100, 2)
    fitter.fit(fit.X, fit.y)
    out = fitter.transform(fit.X[:5])
    assert out.shape == (5, 4)
    assert fitter.base_set_.m == 4


@pytest.mark.parametrize(
    "estimator_cls, kwargs",
    [
        (TwoPlayerOmnipredictor, {"eta_c": 8.0}),
        (DirectEnsembleOmnipredictor, {"eps_c": 0.0}),
        (CalibratedMultiaccuracyOmnipredictor, {"alpha_c": 0.5}),
        (BestBaseOmnipredictor, {}),
    ],
)
def test_estimators_fit_predict_and_clone(estimator_cls, kwargs, fitted_base, train):
    est = estimator_cls(base=fitted_base, **kwargs)
    cloned = clone(est)  # sklearn param contract: params survive a clone
    assert cloned.get_params()["base"].m == fitted_base.m
    for key, value in kwargs.items():
        assert cloned.get_params()[key] == value
    est.fit(train.X, train.y)
    preds = est.predict(np.array([[0.05], [0.45], [0.85]]))
    assert preds.shape == (3,)
    assert np.all((preds >= 0) & (preds <= 1))
    assert hasattr(est, "predictor_")


def test_estimators_require_fitted_base(train):
    with pytest.raises(ValidationError):
        TwoPlayerOmnipredictor().fit(train.X, train.y)
    with pytest.raises(ValidationError):
        DirectEnsembleOmnipredictor(base="nope").fit(train.X, train.y)


def test_estimators_validate_labels(fitted_base):
    X = np.zeros((4, 1))
    with pytest.raises(ValidationError):
        DirectEnsembleOmnipredictor(base=fitted_base).fit(X, np.array([0, 1, 2, 0]))
    with pytest.raises(ValidationError):
        DirectEnsembleOmnipredictor(base=fitted_base).fit(X, None)


def test_two_player_predict_dist_shape(fitted_base, train):
    est = TwoPlayerOmnipredictor(base=fitted_base, eta=0.9, stride=3).fit(train.X, train.y)
    dist = est.predict_dist(np.array([[0.45]]))
    assert dist.shape == (1, 5)
    assert dist.sum() == pytest.approx(1.0, abs=1e-12)
    assert est.eta_ == 0.9


def test_direct_estimator_explicit_epsilon(fitted_base, train):
    est = DirectEnsembleOmnipredictor(base=fitted_base, epsilon=0.05).fit(train.X, train.y)
    assert est.epsilon_ == 0.05
    grid_values = set(np.arange(5) / 4)
    assert set(np.unique(est.predict(train.X))) <= grid_values


def test_calma_estimator_exposes_warning_flag(fitted_base, train):
    est = CalibratedMultiaccuracyOmnipredictor(base=fitted_base).fit(train.X, train.y)
    assert est.warning_ in (True, False)
    assert est.alpha_ > 0


def test_best_base_estimator_uses_pool(fitted_base, train):
    pool = list(fitted_base.members[:2])
    est = BestBaseOmnipredictor(base=fitted_base, pool=pool).fit(train.X, train.y)
    assert est.predictor_ in pool
