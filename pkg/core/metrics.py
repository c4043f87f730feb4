# core/metrics.py
# label 1 is a default; AUC counts ties as 1/2

from typing import NamedTuple, Tuple

import numpy as np
from scipy.stats import rankdata

from core.errors import DimensionError, MetricError

MIN_BOOTSTRAP = 200
_CHUNK = 256
_MAX_EMPTY_CHUNKS = 50


class GiniDiff(NamedTuple):
    diff: float
    lo: float
    hi: float
    significant: bool


class GiniInterval(NamedTuple):
    gini: float
    lo: float
    hi: float


class ParameterError(NamedTuple):
    l2: float
    linf: float
    bias: np.ndarray


def _inputs(scores, labels) -> Tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=float).reshape(-1)
    y = np.asarray(labels, dtype=float).reshape(-1)
    if s.shape[0] != y.shape[0]:
        raise MetricError(f"{s.shape[0]} scores for {y.shape[0]} labels")
    if not np.all(np.isfinite(s)):
        raise MetricError("non-finite scores")
    if not np.all(np.isin(y, (0.0, 1.0))):
        raise MetricError("labels must be binary (0/1)")
    return s, y


def _gini_rows(s: np.ndarray, y: np.ndarray) -> np.ndarray:
    ranks = rankdata(s, method="average", axis=-1)
    n1 = y.sum(axis=-1)
    n0 = y.shape[-1] - n1
    u = (ranks * y).sum(axis=-1) - n1 * (n1 + 1) / 2.0
    return 2.0 * u / (n1 * n0) - 1.0


def gini(scores, labels) -> float:
    s, y = _inputs(scores, labels)
    if np.unique(y).size < 2:
        raise MetricError("gini needs both classes among the labels")
    return float(_gini_rows(s, y))


def _bootstrap_rows(n: int, y: np.ndarray, b: int, rng: np.random.Generator):
    """Yield index chunks until b resamples holding both classes were produced."""
    produced = 0
    empty = 0
    while produced < b:
        idx = rng.integers(0, n, size=(min(_CHUNK, b - produced), n))
        yy = y[idx]
        ok = (yy.sum(axis=1) > 0) & (yy.sum(axis=1) < n)
        if not ok.any():
            empty += 1
            if empty >= _MAX_EMPTY_CHUNKS:
                raise MetricError("bootstrap resamples keep losing a class; too few positives or negatives")
            continue
        idx = idx[ok]
        produced += idx.shape[0]
        yield idx, yy[ok]


def _check_b(b: int) -> None:
    if b < MIN_BOOTSTRAP:
        raise MetricError(f"bootstrap needs B >= {MIN_BOOTSTRAP}, got {b}")


def bootstrap_gini_diff(scores_a, scores_b, labels, b: int = 1000, seed: int = 0) -> GiniDiff:
    """Paired bootstrap of gini(a) - gini(b) over test rows; 95% percentile interval."""
    _check_b(b)
    a, y = _inputs(scores_a, labels)
    bb, _ = _inputs(scores_b, labels)
    diff = gini(a, y) - gini(bb, y)
    rng = np.random.default_rng(seed)
    draws = [_gini_rows(a[idx], yy) - _gini_rows(bb[idx], yy) for idx, yy in _bootstrap_rows(y.shape[0], y, b, rng)]
    lo, hi = np.percentile(np.concatenate(draws), [2.5, 97.5])
    significant = bool(lo > 0 or hi < 0)
    return GiniDiff(float(diff), float(lo), float(hi), significant)


def bootstrap_gini_interval(scores, labels, b: int = 1000, seed: int = 0) -> GiniInterval:
    _check_b(b)
    s, y = _inputs(scores, labels)
    g = gini(s, y)
    rng = np.random.default_rng(seed)
    draws = [_gini_rows(s[idx], yy) for idx, yy in _bootstrap_rows(y.shape[0], y, b, rng)]
    lo, hi = np.percentile(np.concatenate(draws), [2.5, 97.5])
    # percentile intervals can miss a skewed point estimate
    return GiniInterval(g, float(min(lo, g)), float(max(hi, g)))


def parameter_error(scorer, reference_theta) -> ParameterError:
    """Distance from the scorer's logistic theta to a reference theta; bias is signed."""
    theta = scorer.theta
    if theta is None:
        raise MetricError(f"{scorer.method_tag}: parameter error needs a logistic theta")
    ref = np.asarray(reference_theta, dtype=float).reshape(-1)
    if ref.shape[0] != theta.shape[0]:
        raise DimensionError(theta.shape[0] - 1, ref.shape[0] - 1)
    bias = np.asarray(theta, dtype=float) - ref
    return ParameterError(float(np.linalg.norm(bias)), float(np.max(np.abs(bias))), bias)
