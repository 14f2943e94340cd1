import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bernreg.bernstein import BernsteinPoly, ShapeClass, poly_eval
from bernreg.errors import ConfigurationError, DegenerateInputError, DomainError
from bernreg.model import (
    Dataset,
    NoiseModel,
    TestFunction,
    empirical_hyperparams,
    estimate_sigma_sq,
    generate_dataset,
    log_likelihood,
    true_fn_eval,
)


@pytest.mark.parametrize(
    "f, t, expected",
    [
        (TestFunction.F1, 1.0, 1.0),
        (TestFunction.F1, 0.0, 0.0),
        (TestFunction.F2, 0.5, 0.5),
        (TestFunction.F2, 0.25, 0.5),
        (TestFunction.F2, 0.9, 0.8),
        (TestFunction.F3, 0.25, 0.0),
        (TestFunction.F3, 1.0, 1.0),
        (TestFunction.F4, 0.0, 1.0),
        (TestFunction.F4, 0.5, 0.0),
        (TestFunction.F4, 1.0, 1.0),
    ],
)
def test_true_function_values(f, t, expected):
    assert true_fn_eval(f, t) == pytest.approx(expected, abs=1e-15)


def test_true_function_domain_and_parse():
    with pytest.raises(DomainError):
        true_fn_eval(TestFunction.F1, 1.5)
    with pytest.raises(DomainError):
        TestFunction.parse("f7")
    assert TestFunction.parse("F3") is TestFunction.F3
    assert TestFunction.F2(np.array([0.1, 0.2])).shape == (2,)


def test_true_functions_have_their_shapes():
    t = np.linspace(0, 1, 1001)
    for f in (TestFunction.F1, TestFunction.F2):
        assert np.all(np.diff(f(t)) >= -1e-15)
    for f in (TestFunction.F3, TestFunction.F4):
        assert np.all(np.diff(f(t), 2) >= -1e-12)


def test_generate_dataset_zero_noise_and_determinism():
    d = generate_dataset(TestFunction.F3, 50, NoiseModel(0.0), np.random.default_rng(1))
    np.testing.assert_array_equal(d.obs_y, true_fn_eval(TestFunction.F3, d.obs_x))
    assert d == generate_dataset(TestFunction.F3, 50, NoiseModel(0.0), np.random.default_rng(1))
    assert np.all((d.xs >= 0) & (d.xs <= 1)) and d.K == 50 and d.n_obs == 50


def test_generate_dataset_residual_variance(rng):
    v = [np.var(d.obs_y - TestFunction.F1(d.obs_x), ddof=1)
         for d in (generate_dataset(TestFunction.F1, 100, NoiseModel(1.0), rng) for _ in range(400))]
    se = np.std(v, ddof=1) / math.sqrt(len(v))
    assert abs(np.mean(v) - 1) < 4 * se


def test_noise_model_validation():
    with pytest.raises(DomainError):
        NoiseModel(-0.1)
    with pytest.raises(DomainError):
        NoiseModel(float("nan"))


def test_dataset_validation_and_immutability():
    with pytest.raises(DomainError):
        Dataset.from_pairs([0.2, 1.2], [0, 1])
    with pytest.raises(DegenerateInputError):
        Dataset(np.array([0.1, 0.2]), (np.array([1.0]),))
    with pytest.raises(DegenerateInputError):
        Dataset(np.array([0.1]), (np.array([]),))
    d = Dataset.from_pairs([0.2, 0.1], [1.0, 2.0])
    with pytest.raises(ValueError):
        d.xs[0] = 0.5


def test_dataset_sorted_view_is_stable():
    d = Dataset(np.array([0.5, 0.1, 0.5]), (np.array([1.0, 2.0]), np.array([3.0]), np.array([4.0])))
    np.testing.assert_array_equal(d.y_by_x(), [3.0, 1.0, 2.0, 4.0])


def test_dataset_csv_round_trip(tmp_path):
    d = Dataset(np.array([0.25, 0.75]), (np.array([1.0, 1.5]), np.array([0.1 + 0.2])))
    path = tmp_path / "d.csv"
    d.to_csv(path)
    assert path.read_text().splitlines()[0] == "x,y"
    assert Dataset.from_csv(path) == d


@pytest.mark.parametrize("content", ["a,b\n1,2\n", "x,y\n", "x,y\n0.5,abc\n"])
def test_dataset_csv_errors(tmp_path, content):
    path = tmp_path / "bad.csv"
    path.write_text(content)
    with pytest.raises((DomainError, DegenerateInputError)):
        Dataset.from_csv(path)


def test_sigma_estimator_examples():
    assert estimate_sigma_sq(Dataset.from_pairs(np.linspace(0, 1, 10), np.full(10, 3.0))) == 0.0
    x = np.linspace(0, 1, 100)
    y = np.arange(100) % 2
    assert estimate_sigma_sq(Dataset.from_pairs(x, y)) == pytest.approx(0.5, rel=1e-14)
    with pytest.raises(DegenerateInputError):
        estimate_sigma_sq(Dataset.from_pairs([0.5], [1.0]))


def test_sigma_estimator_sorts_by_x():
    d = Dataset.from_pairs([0.9, 0.1, 0.5], [3.0, 1.0, 2.0])
    assert estimate_sigma_sq(d) == pytest.approx((1 + 1) / 4)


@given(st.floats(-100, 100), st.floats(0.1, 10))
def test_sigma_estimator_translation_and_scale(shift, scale):
    r = np.random.default_rng(0)
    d = Dataset.from_pairs(r.uniform(size=30), r.normal(size=30))
    base = estimate_sigma_sq(d)
    assert estimate_sigma_sq(Dataset.from_pairs(d.obs_x, d.obs_y + shift)) == pytest.approx(base, rel=1e-9)
    assert estimate_sigma_sq(Dataset.from_pairs(d.obs_x, scale * d.obs_y)) == pytest.approx(scale**2 * base, rel=1e-9)


def test_sigma_estimator_unbiased_for_constant_function(rng):
    est = [estimate_sigma_sq(Dataset.from_pairs(rng.uniform(size=100), rng.normal(size=100))) for _ in range(10_000)]
    se = np.std(est) / math.sqrt(len(est))
    assert abs(np.mean(est) - 1) < 4 * se


def test_log_likelihood_simple_cases():
    p = BernsteinPoly([0.0, 2.0])
    one = Dataset.from_pairs([0.5], [1.0])
    assert log_likelihood(one, p, 1.0) == pytest.approx(-0.5 * math.log(2 * math.pi))
    two = Dataset(np.array([0.5]), (np.array([1.3, 1.3]),))
    assert log_likelihood(two, p, 0.7) == pytest.approx(2 * log_likelihood(Dataset.from_pairs([0.5], [1.3]), p, 0.7))
    with pytest.raises(DomainError):
        log_likelihood(one, p, 0.0)
    with pytest.raises(DomainError):
        log_likelihood(one, BernsteinPoly([0.0, 1.0], 2.0), 1.0)


def test_log_likelihood_matches_exact_summation(rng):
    coeffs = rng.uniform(-1, 1, 6)
    d = Dataset.from_pairs(rng.uniform(size=25), rng.normal(size=25))
    sigma_sq = 0.37
    fitted = [Fraction(float(v)) for v in poly_eval(BernsteinPoly(coeffs), d.obs_x)]
    rss = sum((Fraction(float(y)) - f) ** 2 for y, f in zip(d.obs_y, fitted))
    expected = -0.5 * 25 * math.log(2 * math.pi * sigma_sq) - float(rss / (2 * Fraction(sigma_sq)))
    assert log_likelihood(d, BernsteinPoly(coeffs), sigma_sq) == pytest.approx(expected, rel=1e-10)


def test_log_likelihood_maximised_at_least_squares_shift(rng):
    coeffs = rng.uniform(-1, 1, 4)
    d = Dataset.from_pairs(rng.uniform(size=40), rng.normal(size=40))
    best = float(np.mean(d.obs_y - poly_eval(BernsteinPoly(coeffs), d.obs_x)))
    ll = lambda s: log_likelihood(d, BernsteinPoly(coeffs + s), 0.5)  # noqa: E731
    assert ll(best) > ll(best + 1e-3) and ll(best) > ll(best - 1e-3)


def test_monotone_hyperparameter_blocks():
    x = np.linspace(0, 1, 100)
    y = np.arange(100.0)
    spec = empirical_hyperparams(Dataset.from_pairs(x[::-1], y[::-1]), ShapeClass.MONOTONE)
    assert spec.q1_range == (0.0, 49.5) and spec.q2_range == (49.5, 99.0)
    assert spec.sampler_bounds() == (0.0, 99.0)
    assert spec.order_dist.alpha == 10 and spec.order_dist.n_max == 20


def test_convex_hyperparameter_blocks():
    x = np.linspace(0, 1, 100)
    y = np.abs(np.arange(100.0) - 60)
    d = Dataset.from_pairs(x, y)
    spec = empirical_hyperparams(d, ShapeClass.UNIMODAL_CONVEX)
    q01 = np.mean(np.sort(y)[:10])
    assert spec.q_range == (q01, abs(q01 + y.mean()) / 2)
    assert spec.beta1 == 60.0 and spec.beta2 == 39.0  # max of y[0:5], y[95:100]
    mid = empirical_hyperparams(d, "convex", q02_rule="midpoint")
    assert mid.q_range[1] == (q01 + y.mean()) / 2


def test_concave_hyperparameters_mirror_convex():
    x = np.linspace(0, 1, 60)
    y = -np.abs(np.arange(60.0) - 30) + 5
    concave = empirical_hyperparams(Dataset.from_pairs(x, y), ShapeClass.UNIMODAL_CONCAVE)
    convex = empirical_hyperparams(Dataset.from_pairs(x, -y), ShapeClass.UNIMODAL_CONVEX)
    assert concave.q_range == (-convex.q_range[1], -convex.q_range[0])
    assert (concave.beta1, concave.beta2) == (-convex.beta1, -convex.beta2)


def test_hyperparameters_from_f1_data():
    d = generate_dataset(TestFunction.F1, 100, NoiseModel(0.1), np.random.default_rng(5))
    spec = empirical_hyperparams(d, ShapeClass.MONOTONE)
    assert abs(spec.q1_range[0]) < 0.3 and abs(spec.q2_range[1] - 1) < 0.3


def test_constant_responses_give_configuration_error():
    d = Dataset.from_pairs(np.linspace(0, 1, 20), np.full(20, 2.0))
    with pytest.raises(ConfigurationError, match="q11"):
        empirical_hyperparams(d, ShapeClass.MONOTONE)
    with pytest.raises(ConfigurationError, match="q01"):
        empirical_hyperparams(d, ShapeClass.UNIMODAL_CONVEX)


def test_hyperparameter_preconditions():
    with pytest.raises(DegenerateInputError):
        empirical_hyperparams(Dataset.from_pairs(np.linspace(0, 1, 9), np.arange(9.0)), ShapeClass.MONOTONE)
    with pytest.raises(DegenerateInputError):
        empirical_hyperparams(Dataset.from_pairs(np.linspace(0, 1, 4), [3, 1, 0, 2]), ShapeClass.UNIMODAL_CONVEX)
    ok = empirical_hyperparams(Dataset.from_pairs(np.linspace(0, 1, 5), [3, 1, 0, 1, 3]), ShapeClass.UNIMODAL_CONVEX)
    assert ok.shape is ShapeClass.UNIMODAL_CONVEX
    repeated = Dataset(np.linspace(0, 1, 12), tuple(np.ones((12, 2)) * np.arange(12)[:, None]))
    with pytest.raises(DomainError):
        empirical_hyperparams(repeated, ShapeClass.MONOTONE)
    with pytest.raises(ConfigurationError):
        empirical_hyperparams(Dataset.from_pairs(np.linspace(0, 1, 20), np.arange(20.0)), ShapeClass.UNIMODAL)
