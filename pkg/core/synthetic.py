# core/synthetic.py
"""Synthetic applicant populations with a known ground truth.

Well-specified arm: y ~ Bernoulli(sigmoid(theta_true . [1, x])).
Misspecified arm:   y ~ Bernoulli(sigmoid(theta_true . [1, x] + c * x_k^2)),
                    c = quadratic_coef (default 1), k = quadratic_feature (default 0).
"""

import logging
import math
import threading
from dataclasses import dataclass
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.special import expit, logit

from core.dataset import Dataset
from core.errors import DataError
from core.logistic import fit_weighted
from core.seeds import U64_MAX, derive_seed

log = logging.getLogger(__name__)

SpecTag = Literal["well_specified", "misspecified"]


class FeatureDistribution(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["gaussian", "uniform", "lognormal_mixture", "class_gaussian"] = "gaussian"
    # gaussian / class_gaussian
    loc: float = 0.0
    scale: float = Field(1.0, gt=0)
    # uniform
    low: float = -1.0
    high: float = 1.0
    # lognormal_mixture: each coordinate is exp(N(log_means[c], log_sigma^2)), c ~ Bernoulli(mixture_weight)
    mixture_weight: float = Field(0.5, ge=0, le=1)
    log_means: Tuple[float, float] = (0.0, 1.5)
    log_sigma: float = Field(0.6, gt=0)
    # class_gaussian: y ~ Bernoulli(prior), x | y ~ N(+-shift/2, scale^2 I)
    prior: float = Field(0.3, gt=0, lt=1)
    shift: float = 1.0

    @model_validator(mode="after")
    def _check_range(self) -> "FeatureDistribution":
        if self.kind == "uniform" and not self.high > self.low:
            raise ValueError("uniform features need high > low")
        return self


def default_theta(d: int) -> List[float]:
    return [-1.0] + [1.0 if j % 2 == 0 else -0.5 for j in range(d)]


class GeneratorSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    n_total: int = Field(ge=2)
    d: int = Field(ge=1)
    spec_tag: SpecTag = "well_specified"
    theta_true: Optional[List[float]] = None
    quadratic_coef: float = 1.0
    quadratic_feature: int = Field(0, ge=0)
    features: FeatureDistribution = FeatureDistribution()
    seed: int = Field(0, ge=0, le=U64_MAX)

    @model_validator(mode="after")
    def _check(self) -> "GeneratorSpec":
        if self.n_total < 2 * (self.d + 1):
            raise ValueError(f"n_total must be at least 2(d+1) = {2 * (self.d + 1)}")
        if self.theta_true is not None:
            if len(self.theta_true) != self.d + 1:
                raise ValueError(f"theta_true must have d+1 = {self.d + 1} entries")
            if not all(math.isfinite(t) for t in self.theta_true):
                raise ValueError("theta_true must be finite")
            if self.features.kind == "class_gaussian":
                raise ValueError("class_gaussian derives theta_true from the class densities; leave it unset")
        if self.quadratic_feature >= self.d:
            raise ValueError("quadratic_feature must index an existing feature")
        if self.features.kind == "class_gaussian" and self.spec_tag != "well_specified":
            raise ValueError("class_gaussian populations are well-specified by construction")
        if not math.isfinite(self.quadratic_coef):
            raise ValueError("quadratic_coef must be finite")
        return self

    def theta(self) -> np.ndarray:
        if self.features.kind == "class_gaussian":
            fd = self.features
            slopes = np.full(self.d, fd.shift / fd.scale**2)
            # class means loc +- shift/2 on every coordinate
            intercept = logit(fd.prior) - self.d * fd.loc * fd.shift / fd.scale**2
            return np.concatenate([[intercept], slopes])
        return np.asarray(self.theta_true if self.theta_true is not None else default_theta(self.d), dtype=float)


@dataclass(frozen=True, eq=False)
class GroundTruth:
    theta_true: np.ndarray
    full_labels: np.ndarray
    true_probabilities: np.ndarray
    spec_tag: str
    oracle: str = ""
    mechanism_tag: Optional[str] = None

    def agrees_with(self, dataset: Dataset) -> bool:
        f = dataset.financed
        return bool(np.array_equal(self.full_labels[f], dataset.labels[f]))


def _draw_features(spec: GeneratorSpec, rng: np.random.Generator) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    fd = spec.features
    n, d = spec.n_total, spec.d
    if fd.kind == "gaussian":
        return fd.loc + fd.scale * rng.standard_normal((n, d)), None
    if fd.kind == "uniform":
        return rng.uniform(fd.low, fd.high, size=(n, d)), None
    if fd.kind == "lognormal_mixture":
        m0, m1 = fd.log_means
        comp = rng.random((n, d)) < fd.mixture_weight
        x = np.exp(np.where(comp, m1, m0) + fd.log_sigma * rng.standard_normal((n, d)))
        half = 0.5 * fd.log_sigma**2
        mean = (1 - fd.mixture_weight) * math.exp(m0 + half) + fd.mixture_weight * math.exp(m1 + half)
        return x - mean, None
    # class_gaussian: labels first, then x | y
    y = (rng.random(n) < fd.prior).astype(float)
    centre = np.where(y[:, None] == 1.0, fd.shift / 2, -fd.shift / 2)
    return fd.loc + centre + fd.scale * rng.standard_normal((n, d)), y


def _predictor(spec: GeneratorSpec, theta: np.ndarray, x: np.ndarray) -> np.ndarray:
    eta = theta[0] + x @ theta[1:]
    if spec.spec_tag == "misspecified":
        eta = eta + spec.quadratic_coef * x[:, spec.quadratic_feature] ** 2
    return eta


def generate_synthetic(spec: GeneratorSpec, id_prefix: str = "") -> Tuple[Dataset, GroundTruth]:
    """Draw a fully labeled, fully financed population; deterministic in spec.seed."""
    theta = spec.theta()
    if not np.all(np.isfinite(theta)):
        raise DataError("theta_true must be finite")
    rng = np.random.default_rng(spec.seed)
    x, y = _draw_features(spec, rng)
    p = expit(_predictor(spec, theta, x))
    if y is None:
        y = (rng.random(spec.n_total) < p).astype(float)

    oracle = ""
    if spec.spec_tag == "misspecified":
        oracle = f"logit p = theta.[1,x] + {spec.quadratic_coef:g}*x{spec.quadratic_feature}^2"
    ids = np.char.add(id_prefix, np.arange(spec.n_total).astype(str))
    ds = Dataset.fully_labeled(x, y, ids=ids)
    truth = GroundTruth(
        theta_true=theta,
        full_labels=ds.labels,
        true_probabilities=p,
        spec_tag=spec.spec_tag,
        oracle=oracle,
    )
    return ds, truth


_reference_cache: Dict[str, np.ndarray] = {}
_reference_lock = threading.Lock()


def pseudo_true_theta(spec: GeneratorSpec, n_reference: int = 10**6) -> np.ndarray:
    """Large-sample unselected logistic fit: the pseudo-true theta_opt of a scenario.

    Cached per (scenario, n_reference). The reference sample has its own
    seed stream derived from spec.seed.
    """
    key = f"{spec.model_dump_json()}|{n_reference}"
    with _reference_lock:
        hit = _reference_cache.get(key)
    if hit is not None:
        return hit.copy()

    ref_spec = spec.model_copy(update={"n_total": n_reference, "seed": derive_seed(spec.seed, "reference")})
    ds, _ = generate_synthetic(ref_spec)
    model = fit_weighted(ds.features, ds.labels, np.ones(ds.n))
    if not model.converged:
        raise DataError(f"reference fit did not converge: {model.diagnostic}")
    log.info("[reference] pseudo-true theta from n=%d: %s", n_reference, np.round(model.theta, 4).tolist())
    with _reference_lock:
        _reference_cache[key] = model.theta.copy()
    return model.theta.copy()
