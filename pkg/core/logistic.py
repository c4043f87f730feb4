# core/logistic.py
"""Weighted maximum-likelihood logistic regression.

The optimized objective is the weighted log-likelihood per unit weight,

    Q(theta) = sum_i w_i ln p_theta(y_i | x_i) / sum_i w_i  -  ridge * ||theta_slopes||^2,

maximized by Newton steps with step-halving from theta = 0. Dividing by the
weight total leaves the argmax unchanged and makes the gradient tolerance
independent of sample size and weight scale.

Non-convergence (separation, one-class labels, singular Hessian, exhausted
step-halving) is reported through `converged=False` and `diagnostic`; the
fit never substitutes a regularized answer on its own.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from scipy.special import expit

from core.errors import ConvergenceError, DataError, DimensionError, SingularInformationError

log = logging.getLogger(__name__)

PROB_CLAMP = 1e-12
SEPARATION_TOL = 1e-6
SINGULAR_RCOND = 1e-10


@dataclass(frozen=True)
class LogisticOptions:
    tol_grad: float = 1e-8
    max_iter: int = 100
    ridge: float = 0.0
    max_halvings: int = 30


@dataclass(frozen=True)
class WeightSummary:
    min: float
    max: float
    sum: float


@dataclass(frozen=True, eq=False)
class LogisticModel:
    theta: np.ndarray
    converged: bool
    iterations: int
    final_gradient_norm: float
    loglik: float
    weights_used: WeightSummary
    ridge: float = 0.0
    diagnostic: str = ""
    loglik_trace: Tuple[float, ...] = ()

    def __post_init__(self) -> None:
        theta = np.array(self.theta, dtype=float).reshape(-1)
        if not np.all(np.isfinite(theta)):
            raise ValueError("theta must be finite")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @property
    def d(self) -> int:
        return int(self.theta.shape[0] - 1)

    @classmethod
    def from_theta(cls, theta: np.ndarray) -> "LogisticModel":
        """Wrap a known parameter (true or induced) as a model for prediction."""
        theta = np.asarray(theta, dtype=float)
        return cls(
            theta=theta,
            converged=True,
            iterations=0,
            final_gradient_norm=0.0,
            loglik=float("nan"),
            weights_used=WeightSummary(float("nan"), float("nan"), float("nan")),
            diagnostic="constructed from a fixed theta",
        )


@dataclass(frozen=True, eq=False)
class CovarianceEstimate:
    model_based: np.ndarray
    sandwich: np.ndarray


def design(features: np.ndarray) -> np.ndarray:
    x = np.asarray(features, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    return np.column_stack([np.ones(x.shape[0]), x])


def _penalty_mask(p: int) -> np.ndarray:
    m = np.ones(p)
    m[0] = 0.0
    return m


def _prepare(features, labels, weights) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    X = design(features)
    y = np.asarray(labels, dtype=float).reshape(-1)
    if X.shape[0] < 1:
        raise DataError("need at least one record")
    if y.shape[0] != X.shape[0]:
        raise DataError("features and labels differ in length")
    if not np.all(np.isfinite(X)):
        raise DataError("non-finite feature values")
    if not np.all(np.isin(y, (0.0, 1.0))):
        raise DataError("labels must be binary (0/1) and present")
    w = np.ones(X.shape[0]) if weights is None else np.asarray(weights, dtype=float).reshape(-1)
    if w.shape[0] != X.shape[0]:
        raise DataError("weights differ in length from features")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise DataError("weights must be finite and non-negative")
    if not w.sum() > 0:
        raise DataError("at least one weight must be positive")
    return X, y, w


def _objective(theta: np.ndarray, X: np.ndarray, y: np.ndarray, wn: np.ndarray, ridge: float) -> float:
    p = np.clip(expit(X @ theta), PROB_CLAMP, 1.0 - PROB_CLAMP)
    ll = float(np.sum(wn * (y * np.log(p) + (1.0 - y) * np.log1p(-p))))
    return ll - ridge * float(np.sum(theta[1:] ** 2))


def _gradient(theta: np.ndarray, X: np.ndarray, y: np.ndarray, wn: np.ndarray, ridge: float) -> np.ndarray:
    p = expit(X @ theta)
    return X.T @ (wn * (y - p)) - 2.0 * ridge * _penalty_mask(theta.shape[0]) * theta


def weighted_loglik(theta, features, labels, weights=None, ridge: float = 0.0) -> float:
    """Objective Q(theta) as optimized by `fit_weighted` (per unit weight)."""
    X, y, w = _prepare(features, labels, weights)
    return _objective(np.asarray(theta, dtype=float), X, y, w / w.sum(), ridge)


def weighted_gradient(theta, features, labels, weights=None, ridge: float = 0.0) -> np.ndarray:
    X, y, w = _prepare(features, labels, weights)
    return _gradient(np.asarray(theta, dtype=float), X, y, w / w.sum(), ridge)


def fit_weighted(
    features: np.ndarray,
    labels: np.ndarray,
    weights: Optional[np.ndarray] = None,
    options: Optional[LogisticOptions] = None,
) -> LogisticModel:
    opts = options or LogisticOptions()
    if opts.ridge < 0:
        raise DataError("ridge must be >= 0")
    X, y, w = _prepare(features, labels, weights)
    wsum = float(w.sum())
    wn = w / wsum
    summary = WeightSummary(float(w.min()), float(w.max()), wsum)
    p_dim = X.shape[1]
    pen = _penalty_mask(p_dim)
    theta = np.zeros(p_dim)

    def finish(converged: bool, iterations: int, gnorm: float, diagnostic: str, trace) -> LogisticModel:
        if not converged:
            log.warning("[logistic] fit did not converge after %d iterations: %s", iterations, diagnostic)
        ll = float(np.sum(w * _loglik_terms(theta, X, y)))
        return LogisticModel(
            theta=theta,
            converged=converged,
            iterations=iterations,
            final_gradient_norm=gnorm,
            loglik=ll,
            weights_used=summary,
            ridge=opts.ridge,
            diagnostic=diagnostic,
            loglik_trace=tuple(trace),
        )

    active = w > 0
    if opts.ridge == 0 and np.unique(y[active]).size < 2:
        g = _gradient(theta, X, y, wn, 0.0)
        return finish(False, 0, float(np.max(np.abs(g))), "all labels in one class; no finite MLE without ridge", [])

    obj = _objective(theta, X, y, wn, opts.ridge)
    trace = [obj]
    iterations = 0
    diagnostic = ""
    converged = False
    gnorm = float("inf")
    while True:
        prob = expit(X @ theta)
        grad = X.T @ (wn * (y - prob)) - 2.0 * opts.ridge * pen * theta
        gnorm = float(np.max(np.abs(grad)))
        if gnorm <= opts.tol_grad:
            converged = True
            break
        if iterations >= opts.max_iter:
            diagnostic = f"max_iter={opts.max_iter} reached with gradient norm {gnorm:.3e}"
            break
        info = X.T @ (X * (wn * prob * (1.0 - prob))[:, None]) + 2.0 * opts.ridge * np.diag(pen)
        try:
            step = np.linalg.solve(info, grad)
        except np.linalg.LinAlgError:
            diagnostic = "singular Hessian (separation or collinear features)"
            break
        if not np.all(np.isfinite(step)):
            diagnostic = "non-finite Newton step (separation or collinear features)"
            break

        t = 1.0
        accepted = False
        for _ in range(opts.max_halvings + 1):
            cand = theta + t * step
            cand_obj = _objective(cand, X, y, wn, opts.ridge)
            if np.isfinite(cand_obj) and cand_obj >= obj:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            diagnostic = f"step-halving exhausted after {opts.max_halvings} halvings"
            break
        theta, obj = cand, cand_obj
        trace.append(obj)
        iterations += 1

    if converged and opts.ridge == 0:
        resid = np.abs(y[active] - expit(X[active] @ theta))
        if resid.max() < SEPARATION_TOL:
            converged = False
            diagnostic = "complete separation: fitted probabilities match every label"
    return finish(converged, iterations, gnorm, diagnostic, trace)


def _loglik_terms(theta: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    p = np.clip(expit(X @ theta), PROB_CLAMP, 1.0 - PROB_CLAMP)
    return y * np.log(p) + (1.0 - y) * np.log1p(-p)


def predict_proba(model: LogisticModel, x: np.ndarray) -> Union[float, np.ndarray]:
    """sigmoid(theta . [1, x]); a 1-D x is one record, a 2-D x is one record per row."""
    arr = np.asarray(x, dtype=float)
    if arr.shape[-1] != model.d:
        raise DimensionError(model.d, int(arr.shape[-1]) if arr.ndim else 1)
    eta = model.theta[0] + arr @ model.theta[1:]
    if arr.ndim == 1:
        return float(expit(eta))
    return expit(eta)


def _collinear_columns(info: np.ndarray) -> Optional[Tuple[int, ...]]:
    _, s, vt = np.linalg.svd(info)
    if s[0] <= 0:
        return tuple(range(info.shape[0]))
    small = s <= SINGULAR_RCOND * s[0]
    if not small.any():
        return None
    null = vt[small]
    cols = np.where(np.max(np.abs(null), axis=0) > 1e-6)[0]
    return tuple(int(c) for c in cols)


def covariance(
    model: LogisticModel,
    features: np.ndarray,
    labels: np.ndarray,
    weights: Optional[np.ndarray] = None,
) -> CovarianceEstimate:
    """Model-based H^-1 and sandwich H^-1 G H^-1 at the fitted theta.

    H is the weighted observed information of the total (not per-unit)
    log-likelihood, G the outer product of per-record weighted scores
    (w_i s_i)(w_i s_i)^T. Column indices in errors refer to the design
    matrix: 0 is the intercept, j is feature j-1.
    """
    if not model.converged:
        raise ConvergenceError("covariance needs a converged model", model.diagnostic)
    X, y, w = _prepare(features, labels, weights)
    if X.shape[1] != model.theta.shape[0]:
        raise DimensionError(model.d, X.shape[1] - 1)
    p = expit(X @ model.theta)
    info = X.T @ (X * (w * p * (1.0 - p))[:, None])
    info += 2.0 * model.ridge * float(w.sum()) * np.diag(_penalty_mask(X.shape[1]))
    cols = _collinear_columns(info)
    if cols is not None:
        raise SingularInformationError(cols)
    h_inv = np.linalg.inv(info)
    h_inv = 0.5 * (h_inv + h_inv.T)
    scores = X * (w * (y - p))[:, None]
    meat = scores.T @ scores
    sandwich = h_inv @ meat @ h_inv
    return CovarianceEstimate(model_based=h_inv, sandwich=0.5 * (sandwich + sandwich.T))
