import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from core.errors import ConvergenceError, DataError, DimensionError, SingularInformationError
from core.logistic import (
    LogisticModel,
    LogisticOptions,
    covariance,
    fit_weighted,
    predict_proba,
    weighted_gradient,
    weighted_loglik,
)
from core.synthetic import GeneratorSpec, generate_synthetic


def two_cell():
    x = np.array([-1.0] * 4 + [1.0] * 4)
    y = np.array([0, 0, 0, 1, 0, 1, 1, 1], dtype=float)
    return x, y


def test_symmetric_data_gives_zero_theta():
    m = fit_weighted(np.array([-1.0, -1.0, 1.0, 1.0]), np.array([0.0, 1.0, 0.0, 1.0]))
    assert m.converged
    assert_allclose(m.theta, [0.0, 0.0], atol=1e-10)


def test_saturated_two_cell_model():
    x, y = two_cell()
    m = fit_weighted(x, y)
    assert m.converged
    assert_allclose(m.theta, [0.0, math.log(3.0)], atol=1e-4)


def test_saturated_two_cell_beats_grid():
    x, y = two_cell()
    m = fit_weighted(x, y)
    best = weighted_loglik(m.theta, x, y)
    grid = np.linspace(-3, 3, 61)
    for a in grid:
        for b in grid:
            assert weighted_loglik([a, b], x, y) <= best + 1e-12


def test_weight_scaling_leaves_theta_unchanged():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((200, 2))
    y = (rng.random(200) < 0.4).astype(float)
    w = rng.uniform(0.5, 2.0, 200)
    a = fit_weighted(x, y, w)
    b = fit_weighted(x, y, 7.0 * w)
    assert_allclose(a.theta, b.theta, atol=1e-12)
    assert b.weights_used.sum == pytest.approx(7.0 * a.weights_used.sum)


def test_integer_weights_match_duplicated_rows():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((60, 1))
    y = (rng.random(60) < 0.5).astype(float)
    w = rng.integers(1, 4, 60).astype(float)
    weighted = fit_weighted(x, y, w)
    rows = np.repeat(np.arange(60), w.astype(int))
    duplicated = fit_weighted(x[rows], y[rows])
    assert_allclose(weighted.theta, duplicated.theta, atol=1e-8)


def test_fit_is_stationary_and_trace_increases():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((500, 3))
    y = (rng.random(500) < 1 / (1 + np.exp(-(0.3 + x @ [1.0, -0.5, 0.2])))).astype(float)
    m = fit_weighted(x, y)
    assert m.converged
    assert np.max(np.abs(weighted_gradient(m.theta, x, y))) <= 1e-8
    assert all(b >= a for a, b in zip(m.loglik_trace, m.loglik_trace[1:]))


def test_one_class_without_ridge_does_not_converge():
    m = fit_weighted(np.arange(5.0), np.zeros(5))
    assert not m.converged
    assert "one class" in m.diagnostic


def test_separation_is_reported():
    m = fit_weighted(np.array([-2.0, -1.0, 1.0, 2.0]), np.array([0.0, 0.0, 1.0, 1.0]))
    assert not m.converged
    assert m.diagnostic


def test_ridge_resolves_separation():
    m = fit_weighted(
        np.array([-2.0, -1.0, 1.0, 2.0]), np.array([0.0, 0.0, 1.0, 1.0]), options=LogisticOptions(ridge=0.1)
    )
    assert m.converged
    assert m.theta[1] > 0


def test_bad_inputs():
    with pytest.raises(DataError):
        fit_weighted(np.zeros((3, 1)), np.array([0.0, 1.0]))
    with pytest.raises(DataError):
        fit_weighted(np.zeros((2, 1)), np.array([0.0, np.nan]))
    with pytest.raises(DataError):
        fit_weighted(np.zeros((2, 1)), np.array([0.0, 1.0]), np.array([1.0, -1.0]))


def test_predict_proba():
    assert predict_proba(LogisticModel.from_theta([0.0, 0.0, 0.0]), np.array([3.0, -2.0])) == 0.5
    assert predict_proba(LogisticModel.from_theta([0.0, 1.0]), np.array([0.0])) == 0.5
    assert predict_proba(LogisticModel.from_theta([1.0, 2.0]), np.array([0.5])) == pytest.approx(0.880797, abs=1e-6)
    many = predict_proba(LogisticModel.from_theta([1.0, 2.0]), np.array([[0.5], [0.0]]))
    assert many.shape == (2,)
    with pytest.raises(DimensionError):
        predict_proba(LogisticModel.from_theta([1.0, 2.0]), np.array([0.5, 0.5]))


def test_covariance_needs_converged_model():
    m = fit_weighted(np.arange(5.0), np.zeros(5))
    with pytest.raises(ConvergenceError):
        covariance(m, np.arange(5.0), np.zeros(5))


def test_duplicated_column_is_singular():
    x = np.arange(10.0)
    features = np.column_stack([x, x])
    y = np.arange(10) % 2
    with pytest.raises(SingularInformationError) as err:
        covariance(LogisticModel.from_theta([0.0, 0.0, 0.0]), features, y)
    assert {1, 2} <= set(err.value.columns)


def test_minimal_design_gives_finite_psd_matrices():
    x = np.array([[-1.0], [-0.5], [0.5], [1.0]])
    y = np.array([0.0, 1.0, 0.0, 1.0])
    m = fit_weighted(x, y)
    cov = covariance(m, x, y)
    for mat in (cov.model_based, cov.sandwich):
        assert np.all(np.isfinite(mat))
        assert np.min(np.linalg.eigvalsh(mat)) >= -1e-12


def test_unit_weights_match_unweighted_sandwich():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((300, 2))
    y = (rng.random(300) < 0.3).astype(float)
    m = fit_weighted(x, y)
    a = covariance(m, x, y)
    b = covariance(m, x, y, np.ones(300))
    assert_allclose(a.sandwich, b.sandwich)
    assert_allclose(a.model_based, b.model_based)


def test_standardizing_features_gives_the_same_probabilities():
    rng = np.random.default_rng(4)
    x = np.column_stack([2.0 + 3.0 * rng.standard_normal(400), -1.0 + 0.5 * rng.standard_normal(400)])
    y = (rng.random(400) < 1 / (1 + np.exp(-(0.2 + 0.3 * x[:, 0] - 1.0 * x[:, 1])))).astype(float)
    raw = fit_weighted(x, y)
    mu, sd = x.mean(axis=0), x.std(axis=0)
    z = fit_weighted((x - mu) / sd, y)
    slopes = z.theta[1:] / sd
    mapped = LogisticModel.from_theta(np.concatenate([[z.theta[0] - slopes @ mu], slopes]))
    assert raw.converged and z.converged
    assert_allclose(predict_proba(mapped, x), predict_proba(raw, x), atol=1e-8)


@pytest.mark.slow
def test_sandwich_matches_model_based_when_well_specified():
    ds, _ = generate_synthetic(GeneratorSpec(n_total=100_000, d=2, seed=12))
    m = fit_weighted(ds.features, ds.labels)
    cov = covariance(m, ds.features, ds.labels)
    rel = np.linalg.norm(cov.sandwich - cov.model_based) / np.linalg.norm(cov.model_based)
    assert rel < 0.1
