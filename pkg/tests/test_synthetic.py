import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from pydantic import ValidationError
from scipy.integrate import quad
from scipy.special import expit, logit
from scipy.stats import norm

from core.synthetic import FeatureDistribution, GeneratorSpec, generate_synthetic, pseudo_true_theta


def test_same_seed_is_bit_identical():
    spec = GeneratorSpec(n_total=500, d=3, seed=5)
    a, ta = generate_synthetic(spec)
    b, tb = generate_synthetic(spec)
    assert_array_equal(a.features, b.features)
    assert_array_equal(a.labels, b.labels)
    assert_array_equal(ta.true_probabilities, tb.true_probabilities)


def test_different_seed_differs():
    a, _ = generate_synthetic(GeneratorSpec(n_total=200, d=2, seed=1))
    b, _ = generate_synthetic(GeneratorSpec(n_total=200, d=2, seed=2))
    assert not np.array_equal(a.features, b.features)


def test_zero_theta_gives_half_default_rate():
    n = 40_000
    ds, _ = generate_synthetic(GeneratorSpec(n_total=n, d=2, theta_true=[0.0, 0.0, 0.0], seed=3))
    assert abs(ds.labels.mean() - 0.5) < 3 * np.sqrt(0.25 / n)


def test_uniform_feature_default_rate_matches_quadrature():
    n = 100_000
    spec = GeneratorSpec(
        n_total=n,
        d=1,
        theta_true=[0.0, 5.0],
        features=FeatureDistribution(kind="uniform", low=-1.0, high=1.0),
        seed=11,
    )
    ds, _ = generate_synthetic(spec)
    pos = ds.features[:, 0] > 0
    expected, _ = quad(lambda x: expit(5 * x), 0.0, 1.0)
    sigma = np.sqrt(expected * (1 - expected) / pos.sum())
    assert abs(ds.labels[pos].mean() - expected) < 4 * sigma


def test_well_specified_probabilities():
    spec = GeneratorSpec(n_total=50, d=2, theta_true=[0.5, -1.0, 2.0], seed=0)
    ds, truth = generate_synthetic(spec)
    assert_allclose(truth.true_probabilities, expit(0.5 - ds.features[:, 0] + 2 * ds.features[:, 1]))
    assert truth.oracle == ""
    assert truth.agrees_with(ds)


def test_misspecified_adds_quadratic_term():
    spec = GeneratorSpec(n_total=50, d=2, spec_tag="misspecified", theta_true=[0.0, 1.0, 1.0], quadratic_coef=2.0, seed=0)
    ds, truth = generate_synthetic(spec)
    x = ds.features
    assert_allclose(truth.true_probabilities, expit(x[:, 0] + x[:, 1] + 2.0 * x[:, 0] ** 2))
    assert "x0^2" in truth.oracle


def test_all_financed_and_prefixed_ids():
    ds, _ = generate_synthetic(GeneratorSpec(n_total=20, d=1, seed=0), id_prefix="train-")
    assert ds.all_labeled
    assert ds.ids[0] == "train-0"


def test_lognormal_mixture_is_centred():
    spec = GeneratorSpec(n_total=200_000, d=1, features=FeatureDistribution(kind="lognormal_mixture"), seed=4)
    ds, _ = generate_synthetic(spec)
    assert abs(ds.features.mean()) < 0.05


def test_class_gaussian_theta():
    fd = FeatureDistribution(kind="class_gaussian", prior=0.3, shift=1.0, scale=2.0)
    spec = GeneratorSpec(n_total=100, d=2, features=fd)
    assert_allclose(spec.theta(), [logit(0.3), 0.25, 0.25])


def test_class_gaussian_theta_follows_the_location():
    fd = FeatureDistribution(kind="class_gaussian", prior=0.3, shift=1.0, scale=2.0, loc=2.0)
    spec = GeneratorSpec(n_total=400, d=2, features=fd, seed=8)
    assert_allclose(spec.theta(), [logit(0.3) - 1.0, 0.25, 0.25])
    ds, truth = generate_synthetic(spec)
    x = ds.features
    good = 0.7 * norm.pdf(x, 1.5, 2.0).prod(axis=1)
    bad = 0.3 * norm.pdf(x, 2.5, 2.0).prod(axis=1)
    assert_allclose(truth.true_probabilities, bad / (bad + good), rtol=1e-10)


def test_invalid_specs():
    with pytest.raises(ValidationError):
        GeneratorSpec(n_total=5, d=3)
    with pytest.raises(ValidationError):
        GeneratorSpec(n_total=100, d=2, theta_true=[0.0, 1.0])
    with pytest.raises(ValidationError):
        GeneratorSpec(n_total=100, d=2, theta_true=[0.0, float("inf"), 1.0])
    with pytest.raises(ValidationError):
        GeneratorSpec(n_total=100, d=1, unknown=1)


def test_pseudo_true_theta_matches_truth_when_well_specified():
    spec = GeneratorSpec(n_total=100, d=2, seed=21)
    theta = pseudo_true_theta(spec, n_reference=200_000)
    assert_allclose(theta, spec.theta(), atol=0.05)
    # cached: the same value comes back
    assert_array_equal(pseudo_true_theta(spec, n_reference=200_000), theta)


def test_pseudo_true_theta_moves_under_misspecification():
    spec = GeneratorSpec(n_total=100, d=2, spec_tag="misspecified", seed=21)
    theta = pseudo_true_theta(spec, n_reference=200_000)
    # x0^2 >= 0 with mean 1 pushes the fitted intercept up
    assert theta[0] > spec.theta()[0] + 0.2
