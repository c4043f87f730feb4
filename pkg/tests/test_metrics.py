import numpy as np
import pytest
from numpy.testing import assert_allclose

from core.errors import DimensionError, MetricError
from core.logistic import LogisticModel
from core.methods import Scorer
from core.metrics import bootstrap_gini_diff, bootstrap_gini_interval, gini, parameter_error


def brute_force_gini(s, y):
    pos, neg = s[y == 1], s[y == 0]
    diff = pos[:, None] - neg[None, :]
    auc = (np.sum(diff > 0) + 0.5 * np.sum(diff == 0)) / (pos.size * neg.size)
    return 2 * auc - 1


def test_gini_examples():
    y = np.array([0, 0, 1, 1])
    assert gini([0.1, 0.2, 0.8, 0.9], y) == pytest.approx(1.0)
    assert gini([0.5, 0.5, 0.5, 0.5], y) == pytest.approx(0.0)
    assert gini([0.1, 0.9, 0.2, 0.8], y) == pytest.approx(0.0)
    assert gini([0.9, 0.8, 0.2, 0.1], y) == pytest.approx(-1.0)
    assert gini([0.1, 0.4, 0.35, 0.8], y) == pytest.approx(0.5)


def test_gini_matches_pairwise_count():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        n = int(rng.integers(2, 40))
        y = rng.integers(0, 2, n)
        y[0], y[1] = 0, 1
        s = rng.integers(0, 6, n) / 5.0
        assert gini(s, y) == pytest.approx(brute_force_gini(s, y), abs=1e-12)


def test_gini_is_rank_invariant_and_antisymmetric():
    rng = np.random.default_rng(1)
    s = rng.random(300)
    y = (rng.random(300) < s).astype(int)
    g = gini(s, y)
    assert gini(np.log(s) * 3 + 7, y) == pytest.approx(g)
    assert gini(-s, y) == pytest.approx(-g)


def test_gini_rejects_bad_inputs():
    with pytest.raises(MetricError, match="both classes"):
        gini([0.1, 0.2], [1, 1])
    with pytest.raises(MetricError):
        gini([0.1, 0.2], [0, 1, 1])
    with pytest.raises(MetricError):
        gini([0.1, np.nan], [0, 1])
    with pytest.raises(MetricError):
        gini([0.1, 0.2], [0, 2])


def test_bootstrap_is_deterministic_in_seed():
    rng = np.random.default_rng(2)
    s = rng.random(200)
    y = (rng.random(200) < s).astype(int)
    a = bootstrap_gini_interval(s, y, b=300, seed=5)
    b = bootstrap_gini_interval(s, y, b=300, seed=5)
    assert a == b
    assert a.lo <= a.gini <= a.hi


def test_identical_scorers_do_not_differ():
    rng = np.random.default_rng(3)
    s = rng.random(200)
    y = (rng.random(200) < s).astype(int)
    out = bootstrap_gini_diff(s, s, y, b=200)
    assert out.diff == 0.0
    assert out.lo == 0.0 and out.hi == 0.0
    assert not out.significant


def test_perfect_beats_random():
    rng = np.random.default_rng(4)
    y = rng.integers(0, 2, 500)
    y[:2] = [0, 1]
    perfect = y + 0.01 * rng.random(500)
    noise = rng.random(500)
    out = bootstrap_gini_diff(perfect, noise, y, b=500, seed=1)
    assert out.significant
    assert out.lo > 0


def test_bootstrap_needs_enough_resamples():
    with pytest.raises(MetricError, match="B >= 200"):
        bootstrap_gini_diff([0.1, 0.9], [0.2, 0.8], [0, 1], b=100)
    with pytest.raises(MetricError):
        bootstrap_gini_interval([0.1, 0.9], [0, 1], b=199)


def test_parameter_error():
    scorer = Scorer("x", LogisticModel.from_theta([1.0, 2.0, -1.0]))
    err = parameter_error(scorer, [1.0, 0.0, 1.0])
    assert err.l2 == pytest.approx(np.sqrt(8.0))
    assert err.linf == pytest.approx(2.0)
    assert_allclose(err.bias, [0.0, 2.0, -2.0])
    with pytest.raises(DimensionError):
        parameter_error(scorer, [1.0, 0.0])
