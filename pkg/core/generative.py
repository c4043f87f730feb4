# core/generative.py
"""Semi-supervised Gaussian generative classifier p_alpha(x, y), fit by EM.

No density family is imposed by the method; class-conditional
Gaussians are this implementation's choice. Labeled (financed) records
enter through p(x, y), unlabeled (rejected) ones through the marginal p(x).

EM maximizes the penalized objective

    sum_f ln p(x_i, y_i) + sum_nf ln p(x_i) - (kappa / 2) * sum_c tr(Sigma_c^-1),

kappa = ridge_factor * trace(Cov(x)) / d * N. Its M-step gives
Sigma_c = (S_c + kappa I) / N_c, so every covariance has minimum eigenvalue
>= ridge_factor * trace / d and the objective is non-decreasing along EM.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
import scipy.linalg
from scipy.special import expit, logsumexp

from core.errors import DataError, DimensionError
from core.seeds import rng_for

log = logging.getLogger(__name__)

_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class EMConfig:
    max_iter: int = 500
    tol: float = 1e-8
    ridge_factor: float = 1e-6
    equal_covariance: bool = False
    restarts: int = 0
    seed: int = 0


@dataclass(frozen=True, eq=False)
class GenerativeModel:
    prior: float
    mean0: np.ndarray
    mean1: np.ndarray
    cov0: np.ndarray
    cov1: np.ndarray
    loglik_trace: Tuple[float, ...]
    converged: bool
    iterations: int = 0
    equal_covariance: bool = False
    ridge_floor: float = 0.0

    @property
    def d(self) -> int:
        return int(self.mean0.shape[0])


@dataclass
class _Params:
    prior: float
    means: Tuple[np.ndarray, np.ndarray]
    covs: Tuple[np.ndarray, np.ndarray]


def _log_gauss(x: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    try:
        chol = scipy.linalg.cholesky(cov, lower=True)
    except np.linalg.LinAlgError as e:
        raise DataError("class covariance is not positive definite; increase ridge_factor") from e
    sol = scipy.linalg.solve_triangular(chol, (x - mean).T, lower=True)
    d = x.shape[1]
    return -0.5 * d * _LOG_2PI - np.sum(np.log(np.diag(chol))) - 0.5 * np.sum(sol**2, axis=0)


def _joint_logdens(params: _Params, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    l0 = np.log1p(-params.prior) + _log_gauss(x, params.means[0], params.covs[0])
    l1 = np.log(params.prior) + _log_gauss(x, params.means[1], params.covs[1])
    return l0, l1


def _objective(params: _Params, x_f, y_f, x_nf, kappa: float, equal: bool) -> float:
    l0, l1 = _joint_logdens(params, x_f)
    total = float(np.sum(np.where(y_f == 1, l1, l0)))
    if x_nf.shape[0]:
        u0, u1 = _joint_logdens(params, x_nf)
        total += float(np.sum(np.logaddexp(u0, u1)))
    if kappa > 0:
        covs = params.covs[:1] if equal else params.covs
        total -= 0.5 * kappa * sum(float(np.trace(np.linalg.inv(c))) for c in covs)
    return total


def _m_step(x: np.ndarray, r: np.ndarray, kappa: float, equal: bool) -> _Params:
    n1 = float(r.sum())
    n0 = float((1.0 - r).sum())
    mu1 = (r @ x) / n1
    mu0 = ((1.0 - r) @ x) / n0
    d1 = x - mu1
    d0 = x - mu0
    s1 = d1.T @ (d1 * r[:, None])
    s0 = d0.T @ (d0 * (1.0 - r)[:, None])
    ridge = kappa * np.eye(x.shape[1])
    if equal:
        pooled = (s0 + s1 + ridge) / (n0 + n1)
        covs = (pooled, pooled)
    else:
        covs = ((s0 + ridge) / n0, (s1 + ridge) / n1)
    covs = tuple(0.5 * (c + c.T) for c in covs)
    return _Params(prior=n1 / (n0 + n1), means=(mu0, mu1), covs=covs)


def _responsibilities(params: _Params, x: np.ndarray) -> np.ndarray:
    l0, l1 = _joint_logdens(params, x)
    return expit(l1 - l0)


def _run_em(start: _Params, x_f, y_f, x_nf, kappa: float, cfg: EMConfig):
    x_all = np.vstack([x_f, x_nf])
    params = start
    prev = _objective(params, x_f, y_f, x_nf, kappa, cfg.equal_covariance)
    trace = [prev]
    converged = False
    iterations = 0
    for _ in range(cfg.max_iter):
        r = np.concatenate([y_f.astype(float), _responsibilities(params, x_nf)])
        params = _m_step(x_all, r, kappa, cfg.equal_covariance)
        cur = _objective(params, x_f, y_f, x_nf, kappa, cfg.equal_covariance)
        trace.append(cur)
        iterations += 1
        if abs(cur - prev) / max(1.0, abs(prev)) < cfg.tol:
            converged = True
            break
        prev = cur
    return params, trace, converged, iterations


def _validate(x_f, y_f, x_nf) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    x_f = np.asarray(x_f, dtype=float)
    if x_f.ndim == 1:
        x_f = x_f.reshape(-1, 1)
    d = x_f.shape[1]
    if d < 1:
        raise DataError("need at least one feature")
    y_f = np.asarray(y_f, dtype=float).reshape(-1)
    x_nf = np.empty((0, d)) if x_nf is None else np.asarray(x_nf, dtype=float).reshape(-1, d)
    if y_f.shape[0] != x_f.shape[0]:
        raise DataError("x_f and y_f differ in length")
    if not (np.all(np.isfinite(x_f)) and np.all(np.isfinite(x_nf)) and np.all(np.isfinite(y_f))):
        raise DataError("non-finite inputs")
    if not np.all(np.isin(y_f, (0.0, 1.0))):
        raise DataError("labels must be binary")
    for c in (0, 1):
        if int(np.sum(y_f == c)) < 2:
            raise DataError(f"class {c} has fewer than 2 labeled records")
    return x_f, y_f.astype(int), x_nf


def fit_em(x_f, y_f, x_nf=None, config: Optional[EMConfig] = None) -> GenerativeModel:
    cfg = config or EMConfig()
    if cfg.ridge_factor < 0:
        raise DataError("ridge_factor must be >= 0")
    x_f, y_f, x_nf = _validate(x_f, y_f, x_nf)
    x_all = np.vstack([x_f, x_nf])
    n, d = x_all.shape
    spread = float(np.trace(np.atleast_2d(np.cov(x_all, rowvar=False)))) / d if n > 1 else 0.0
    kappa = cfg.ridge_factor * spread * n

    start = _m_step(x_f, y_f.astype(float), kappa, cfg.equal_covariance)
    if x_nf.shape[0] == 0:
        trace = [_objective(start, x_f, y_f, x_nf, kappa, cfg.equal_covariance)]
        best = (start, trace, True, 0)
    else:
        best = _run_em(start, x_f, y_f, x_nf, kappa, cfg)
        for s in range(cfg.restarts):
            rng = rng_for(cfg.seed, "em-restart", s)
            r = np.concatenate([y_f.astype(float), rng.random(x_nf.shape[0])])
            run = _run_em(_m_step(x_all, r, kappa, cfg.equal_covariance), x_f, y_f, x_nf, kappa, cfg)
            if run[1][-1] > best[1][-1]:
                best = run

    params, trace, converged, iterations = best
    if not converged:
        log.warning("[em] stopped at max_iter=%d without meeting tol=%g", cfg.max_iter, cfg.tol)
    log.debug("[em] %d iterations, objective %.6f", iterations, trace[-1])
    return GenerativeModel(
        prior=float(params.prior),
        mean0=params.means[0],
        mean1=params.means[1],
        cov0=params.covs[0],
        cov1=params.covs[1],
        loglik_trace=tuple(float(v) for v in trace),
        converged=converged,
        iterations=iterations,
        equal_covariance=cfg.equal_covariance,
        ridge_floor=kappa / n if n else 0.0,
    )


def posterior(model: GenerativeModel, x: np.ndarray) -> Union[float, np.ndarray]:
    """P(y=1 | x) by Bayes rule, in log space."""
    arr = np.asarray(x, dtype=float)
    if arr.shape[-1] != model.d:
        raise DimensionError(model.d, int(arr.shape[-1]) if arr.ndim else 1)
    rows = arr.reshape(-1, model.d)
    params = _Params(model.prior, (model.mean0, model.mean1), (model.cov0, model.cov1))
    l0, l1 = _joint_logdens(params, rows)
    out = np.exp(l1 - logsumexp(np.column_stack([l0, l1]), axis=1))
    if arr.ndim == 1:
        return float(out[0])
    return out


def induced_logistic_theta(model: GenerativeModel) -> np.ndarray:
    """The logistic theta equivalent to an equal-covariance model (exact)."""
    if not np.allclose(model.cov0, model.cov1, rtol=0, atol=1e-12):
        raise DataError("class covariances differ; the posterior is not logistic in x")
    cov = model.cov0
    a1 = np.linalg.solve(cov, model.mean1)
    a0 = np.linalg.solve(cov, model.mean0)
    slopes = a1 - a0
    intercept = np.log(model.prior / (1.0 - model.prior)) - 0.5 * (model.mean1 @ a1 - model.mean0 @ a0)
    return np.concatenate([[intercept], slopes])
