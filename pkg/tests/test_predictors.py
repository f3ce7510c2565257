import numpy as np
import pytest

from omnipred import (
    AffinePredictor,
    ConstantPredictor,
    Dataset,
    LookupPredictor,
    ThetaGrid,
    UnseenCovariateError,
    UnsupportedDimensionError,
    ValidationError,
    enumerate_linear_candidates,
    erm_fit,
    fit_base_set,
    simulated_spec,
)
from omnipred.losses import weighted_loss


def population_dataset(scale=1000):
    """Dataset whose empirical frequencies match the simulated distribution exactly."""
    spec = simulated_spec()
    xs, ys = [], []
    for x, px, py in zip(spec.support[:, 0], spec.px, spec.py_given_x):
        total = int(round(px * scale))
        ones = int(round(py * total))
        xs.extend([x] * total)
        ys.extend([1] * ones + [0] * (total - ones))
    return Dataset(np.array(xs), np.array(ys))


def test_dataset_validation():
    with pytest.raises(ValidationError):
        Dataset(np.zeros((3, 1)), np.array([0, 1]))
    with pytest.raises(ValidationError):
        Dataset(np.zeros((2, 1)), np.array([0, 2]))


def test_erm_fit_constant_candidates():
    data = Dataset(np.zeros((5, 1)), np.ones(5, dtype=int))
    candidates = [ConstantPredictor(0.0), ConstantPredictor(1.0)]
    assert erm_fit(candidates, data, 0.5) is candidates[1]


def test_erm_fit_errors():
    data = Dataset(np.zeros((2, 1)), np.array([0, 1]))
    with pytest.raises(ValidationError):
        erm_fit([], data, 0.5)
    with pytest.raises(ValidationError):
        erm_fit([ConstantPredictor(0.5)], Dataset(np.zeros((0, 1)), np.zeros(0, dtype=int)), 0.5)


def test_erm_fit_tie_breaks_by_index():
    data = Dataset(np.zeros((4, 1)), np.array([0, 0, 1, 1]))
    tied = [ConstantPredictor(0.9), ConstantPredictor(0.8)]  # same losses at theta=0.5
    assert erm_fit(tied, data, 0.5) is tied[0]


def test_population_erm_optima_disagree_across_thetas():
    # the simulated distribution makes the optimal monotone rule flip sides
    # at x = 0.05 between low and high thetas
    data = population_dataset()
    candidates = enumerate_linear_candidates(data)
    low_fit = erm_fit(candidates, data, 0.35)
    high_fit = erm_fit(candidates, data, 0.75)
    x = np.array([[0.05]])
    assert low_fit.predict(x)[0] <= 0.35
    assert high_fit.predict(x)[0] > 0.75


def test_erm_optimality_brute_force():
    rng = np.random.default_rng(11)
    for _ in range(30):
        n = int(rng.integers(3, 30))
        data = Dataset(rng.random(n), rng.integers(0, 2, n))
        candidates = enumerate_linear_candidates(data)
        theta = float(rng.random())
        chosen = erm_fit(candidates, data, theta)
        chosen_risk = np.mean(
            [weighted_loss(theta, p, y) for p, y in zip(chosen.predict(data.X), data.y)]
        )
        for cand in candidates:
            risk = np.mean(
                [weighted_loss(theta, p, y) for p, y in zip(cand.predict(data.X), data.y)]
            )
            assert chosen_risk <= risk + 1e-12


def _patterns(candidates, xs, theta=0.5):
    out = set()
    for cand in candidates:
        out.add(tuple(cand.predict(xs[:, None]) > theta))
    return out


def test_enumerate_linear_candidates_patterns():
    xs = np.array([0.05, 0.45, 0.85])
    data = Dataset(xs, np.array([0, 1, 0]))
    candidates = enumerate_linear_candidates(data)
    assert len(candidates) == 8  # 4 up-thresholds + 4 down-thresholds
    patterns = _patterns(candidates, xs)
    # every monotone above/below labeling of the sorted sample
    expected = set()
    for cut in range(4):
        expected.add(tuple(k >= cut for k in range(3)))
        expected.add(tuple(k < cut for k in range(3)))
    assert patterns == expected
    # saturated candidates induce the same pattern at every theta
    for theta in (0.1, 0.5, 0.9):
        assert _patterns(candidates, xs, theta) == expected


def test_enumerate_linear_candidates_covers_brute_force_affine_patterns():
    xs = np.array([0.05, 0.45, 0.85])
    data = Dataset(xs, np.array([0, 1, 0]))
    enumerated = _patterns(enumerate_linear_candidates(data), xs)
    brute = set()
    for b0 in np.linspace(-3, 3, 61):
        for b1 in np.linspace(-30, 30, 121):
            brute.add(tuple(np.clip(b0 + b1 * xs, 0, 1) > 0.5))
    assert brute <= enumerated


def test_enumerate_linear_candidates_edge_cases():
    single = Dataset(np.array([0.3]), np.array([1]))
    candidates = enumerate_linear_candidates(single)
    assert len(candidates) >= 2
    assert {tuple(c.predict(np.array([[0.3]])) > 0.5) for c in candidates} == {(True,), (False,)}

    dup = Dataset(np.array([0.2, 0.2, 0.7]), np.array([0, 1, 0]))
    nodup = Dataset(np.array([0.2, 0.7]), np.array([0, 1]))
    assert len(enumerate_linear_candidates(dup)) == len(enumerate_linear_candidates(nodup))

    with pytest.raises(UnsupportedDimensionError):
        enumerate_linear_candidates(Dataset(np.zeros((3, 2)), np.array([0, 1, 0])))


def test_recoding_two_point_support():
    grid = ThetaGrid(2)
    data = Dataset(np.zeros((4, 1)), np.array([1, 1, 1, 1]))
    high = fit_base_set([ConstantPredictor(0.9)], data, grid)
    assert np.all(high.members[0].predict(data.X) == 0.5)  # theta_1 + 1/(2m)
    low = fit_base_set([ConstantPredictor(0.1)], data, grid)
    assert np.all(low.members[0].predict(data.X) == 0.0)  # theta_1 - 1/(2m)


def test_recoding_boundary_goes_low():
    # an inner value exactly equal to theta_i recodes to the low support point
    grid = ThetaGrid(2)
    data = Dataset(np.array([0.25]), np.array([1]))
    base = fit_base_set([AffinePredictor(0.0, 1.0)], data, grid)
    assert base.members[0].predict(np.array([[0.25]]))[0] == 0.0


def test_recoded_outputs_exactly_on_support():
    rng = np.random.default_rng(4)
    data = Dataset(rng.random(60), rng.integers(0, 2, 60))
    grid = ThetaGrid(8)
    base = fit_base_set(enumerate_linear_candidates(data), data, grid)
    for i, member in enumerate(base.members, start=1):
        values = member.predict(data.X)
        assert set(np.unique(values)) <= {(i - 1) / 8, i / 8}


def test_base_set_rate_trend_with_sample_size():
    # the worst population excess of the fitted thresholds shrinks as the fit
    # sample grows
    spec = simulated_spec()
    grid = ThetaGrid(8)
    pop = population_dataset()
    candidates_pop = enumerate_linear_candidates(pop)

    def pop_risk(predictor, theta):
        xs = spec.support
        preds = predictor.predict(xs)
        return sum(
            w * ((theta * (1 - p_true)) if p > theta else (p_true * (1 - theta)))
            for w, p_true, p in zip(spec.px, spec.py_given_x, preds)
        )

    best = {
        i: min(pop_risk(c, grid.theta(i)) for c in candidates_pop) for i in range(1, 9)
    }
    averages = []
    for n in (100, 400, 1600):
        excesses = []
        for rep in range(20):
            rng = np.random.Generator(np.random.Philox(key=np.uint64(1000 * n + rep)))
            sample = spec.sample(n, rng)
            candidates = enumerate_linear_candidates(sample)
            fitted = fit_base_set(candidates, sample, grid)
            worst = max(
                pop_risk(member.inner, grid.theta(i)) - best[i]
                for i, member in enumerate(fitted.members, start=1)
            )
            excesses.append(worst)
        averages.append(np.mean(excesses))
    assert averages[0] >= averages[1] >= averages[2]


def test_lookup_predictor_rejects_unseen():
    table = {(0.5,): 0.7}
    pred = LookupPredictor(table)
    assert pred.predict(np.array([[0.5]]))[0] == 0.7
    with pytest.raises(UnseenCovariateError):
        pred.predict(np.array([[0.6]]))


def test_base_set_round_trip_config():
    data = population_dataset(100)
    base = fit_base_set(enumerate_linear_candidates(data), data, ThetaGrid(4))
    from omnipred import BasePredictorSet

    clone = BasePredictorSet.from_config(base.to_config())
    X = np.array([[0.05], [0.45], [0.85]])
    assert np.array_equal(clone.value_matrix(X), base.value_matrix(X))
