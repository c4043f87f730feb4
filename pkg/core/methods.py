# core/methods.py
"""Reject-inference strategies. Every strategy returns a `Scorer`.

Decisions the literature leaves open:
  - bands are deciles (k_bands = 10) of the pooled financed + rejected scores;
  - Augmentation weights are 1 / (band acceptance proportion), capped at
    w_max = 100; bands without financed records cannot be reweighted and
    only trigger a warning;
  - Parceling inflates each band's financed default rate by 1.25; a band
    without financed records falls back to the global financed rate;
  - Parceling draws the rejected labels once (no multiple imputation).
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from core.bands import ScoreBands, make_score_bands
from core.dataset import Dataset
from core.errors import BandError, ConvergenceError, DataError, PositivityError
from core.generative import EMConfig, GenerativeModel, fit_em, induced_logistic_theta, posterior
from core.logistic import LogisticModel, LogisticOptions, fit_weighted, predict_proba
from core.synthetic import GroundTruth

log = logging.getLogger(__name__)

SCORE_EPS = 1e-12

MethodName = Literal["financed_only", "oracle", "ideal_reweighting", "augmentation", "parceling", "generative"]


@dataclass(frozen=True, eq=False)
class Scorer:
    method_tag: str
    model: Union[LogisticModel, GenerativeModel]
    audit: Dict[str, Any] = field(default_factory=dict)

    @property
    def d(self) -> int:
        return self.model.d

    def score(self, features: np.ndarray) -> np.ndarray:
        x = np.asarray(features, dtype=float).reshape(-1, self.d)
        if isinstance(self.model, LogisticModel):
            p = predict_proba(self.model, x)
        else:
            p = posterior(self.model, x)
        return np.clip(p, SCORE_EPS, 1.0 - SCORE_EPS)

    @property
    def theta(self) -> Optional[np.ndarray]:
        """Logistic parameter, or the induced one for an equal-covariance generative model."""
        if isinstance(self.model, LogisticModel):
            return self.model.theta
        if self.model.equal_covariance:
            return induced_logistic_theta(self.model)
        return None


def _fit(method: str, x, y, w=None, options: Optional[LogisticOptions] = None) -> LogisticModel:
    model = fit_weighted(x, y, w, options)
    if not model.converged:
        raise ConvergenceError(f"{method} fit did not converge", model.diagnostic)
    return model


def _require_financed(train: Dataset) -> None:
    if train.n_financed == 0:
        raise DataError("no financed records to learn from")


def financed_only(train: Dataset, options: Optional[LogisticOptions] = None) -> Scorer:
    _require_financed(train)
    return Scorer("financed_only", _fit("financed_only", train.x_f, train.y_f, None, options))


def oracle_full(train: Dataset, truth: GroundTruth, options: Optional[LogisticOptions] = None) -> Scorer:
    """The ideal fit on every applicant with the true labels (simulation only)."""
    y = np.asarray(truth.full_labels, dtype=float)
    if y.shape[0] != train.n or np.any(np.isnan(y)):
        raise DataError("oracle needs a true label for every applicant")
    return Scorer("oracle", _fit("oracle", train.features, y, None, options))


def ideal_reweighting(
    train: Dataset,
    true_propensities: np.ndarray,
    options: Optional[LogisticOptions] = None,
) -> Scorer:
    """Financed records weighted by 1 / p(f|x); needs p(f|x) > 0 on the whole population."""
    _require_financed(train)
    p = np.asarray(true_propensities, dtype=float).reshape(-1)
    if p.shape[0] != train.n:
        raise DataError("one propensity per applicant is required")
    zero = int(np.sum(~(p > 0)))
    if zero:
        raise PositivityError(zero)
    w = 1.0 / p[train.financed]
    model = _fit("ideal_reweighting", train.x_f, train.y_f, w, options)
    return Scorer("ideal_reweighting", model, {"weights": w})


def augmentation_weights(bands: ScoreBands, band_f: np.ndarray, w_max: float = 100.0) -> Tuple[np.ndarray, np.ndarray]:
    """Per financed record: 1 / acceptance of its band, capped at w_max."""
    raw = 1.0 / bands.acceptance[band_f]
    capped = raw > w_max
    return np.minimum(raw, w_max), capped


def augmentation(
    train: Dataset,
    k_bands: int = 10,
    w_max: float = 100.0,
    options: Optional[LogisticOptions] = None,
) -> Scorer:
    if k_bands < 2:
        raise BandError("k_bands must be >= 2")
    base = financed_only(train, options)
    scores = base.score(train.features)
    bands = make_score_bands(scores, train.financed, train.y_f, k_bands)
    if int(np.sum(bands.financed_count > 0)) < 2:
        raise BandError("augmentation needs at least 2 bands with financed records")

    dropped = np.where(bands.zero_acceptance & (bands.rejected_count > 0))[0]
    if dropped.size:
        log.warning(
            "[augmentation] %d band(s) have no financed record and cannot be reweighted: %s",
            dropped.size, dropped.tolist(),
        )
    band_f = bands.assign(scores[train.financed])
    w, capped = augmentation_weights(bands, band_f, w_max)
    if capped.any():
        log.warning("[augmentation] weight cap %.4g binding for %d records", w_max, int(capped.sum()))

    total = float(w.sum())
    audit = {
        "bands": bands,
        "w_max": w_max,
        "weights": w,
        "capped": capped,
        "weight_total": total,
        "applicants": train.n,
        "weight_discrepancy": train.n - total,
        "dropped_bands": dropped.tolist(),
    }
    log.debug("[augmentation] weight total %.1f for %d applicants", total, train.n)
    return Scorer("augmentation", _fit("augmentation", train.x_f, train.y_f, w, options), audit)


def _band_inflation(inflation: Union[float, Sequence[float]], k: int) -> np.ndarray:
    if np.isscalar(inflation):
        if float(inflation) < 1.0:
            raise DataError("parceling inflation must be >= 1")
        return np.full(k, float(inflation))
    arr = np.asarray(inflation, dtype=float).reshape(-1)
    if arr.shape[0] != k:
        raise DataError(f"per-band inflation needs {k} values, got {arr.shape[0]}")
    if np.any(~np.isfinite(arr)) or np.any(arr < 0):
        raise DataError("per-band inflation factors must be finite and non-negative")
    return arr


def parceling(
    train: Dataset,
    k_bands: int = 10,
    inflation: Union[float, Sequence[float]] = 1.25,
    seed: int = 0,
    options: Optional[LogisticOptions] = None,
) -> Scorer:
    if k_bands < 2:
        raise BandError("k_bands must be >= 2")
    factors = _band_inflation(inflation, k_bands)
    base = financed_only(train, options)
    scores = base.score(train.features)
    bands = make_score_bands(scores, train.financed, train.y_f, k_bands)

    global_rate = float(train.y_f.mean())
    fallback = bands.zero_acceptance & (bands.rejected_count > 0)
    if fallback.any():
        log.warning(
            "[parceling] band(s) %s have no financed record; using global default rate %.4f",
            np.where(fallback)[0].tolist(), global_rate,
        )
    base_rate = np.where(bands.financed_count > 0, bands.financed_default_rate, global_rate)
    band_rate = np.minimum(1.0, factors * base_rate)

    band_nf = bands.assign(scores[~train.financed])
    drawn_rate = band_rate[band_nf]
    y_nf = (np.random.default_rng(seed).random(band_nf.shape[0]) < drawn_rate).astype(float)

    x = np.vstack([train.x_f, train.x_nf])
    y = np.concatenate([train.y_f.astype(float), y_nf])
    audit = {
        "bands": bands,
        "band_rate": band_rate,
        "ids": train.ids[~train.financed],
        "band": band_nf,
        "rate": drawn_rate,
        "drawn": y_nf,
    }
    return Scorer("parceling", _fit("parceling", x, y, None, options), audit)


def oracle_band_inflation(train: Dataset, truth: GroundTruth, k_bands: int = 10,
                          options: Optional[LogisticOptions] = None) -> np.ndarray:
    """Per-band factors that make Parceling draw at the true reject default rate."""
    base = financed_only(train, options)
    scores = base.score(train.features)
    bands = make_score_bands(scores, train.financed, train.y_f, k_bands)
    band = bands.assign(scores)
    rejected = ~train.financed
    out = np.ones(k_bands)
    for b in range(k_bands):
        m = rejected & (band == b)
        fin_rate = bands.financed_default_rate[b]
        if m.any() and np.isfinite(fin_rate) and fin_rate > 0:
            out[b] = float(truth.full_labels[m].mean()) / fin_rate
    return out


def generative_method(train: Dataset, config: Optional[EMConfig] = None) -> Scorer:
    _require_financed(train)
    model = fit_em(train.x_f, train.y_f, train.x_nf, config)
    return Scorer("generative", model, {"loglik_trace": model.loglik_trace})


class EMSettings(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    max_iter: int = Field(500, ge=1)
    tol: float = Field(1e-8, gt=0)
    ridge_factor: float = Field(1e-6, ge=0)
    equal_covariance: bool = False
    restarts: int = Field(0, ge=0)

    def to_config(self, seed: int) -> EMConfig:
        return EMConfig(
            max_iter=self.max_iter,
            tol=self.tol,
            ridge_factor=self.ridge_factor,
            equal_covariance=self.equal_covariance,
            restarts=self.restarts,
            seed=seed,
        )


class MethodSpec(BaseModel):
    """One method of a run, with its knobs; `label` names it in outputs."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    name: MethodName
    label: Optional[str] = None
    k_bands: int = Field(10, ge=2)
    inflation: float = Field(1.25, ge=1)
    w_max: float = Field(100.0, gt=0)
    ridge: float = Field(0.0, ge=0)
    em: EMSettings = EMSettings()

    @property
    def key(self) -> str:
        return self.label or self.name

    @property
    def needs_truth(self) -> bool:
        return self.name in ("oracle", "ideal_reweighting")


def run_method(
    spec: MethodSpec,
    train: Dataset,
    seed: int = 0,
    truth: Optional[GroundTruth] = None,
    propensities: Optional[np.ndarray] = None,
) -> Scorer:
    opts = LogisticOptions(ridge=spec.ridge)
    if spec.name == "financed_only":
        scorer = financed_only(train, opts)
    elif spec.name == "oracle":
        if truth is None:
            raise DataError("oracle needs the ground truth (simulation only)")
        scorer = oracle_full(train, truth, opts)
    elif spec.name == "ideal_reweighting":
        if propensities is None:
            raise DataError("ideal_reweighting needs the true propensities (simulation only)")
        scorer = ideal_reweighting(train, propensities, opts)
    elif spec.name == "augmentation":
        scorer = augmentation(train, spec.k_bands, spec.w_max, opts)
    elif spec.name == "parceling":
        scorer = parceling(train, spec.k_bands, spec.inflation, seed, opts)
    else:
        scorer = generative_method(train, spec.em.to_config(seed))
    return Scorer(spec.key, scorer.model, scorer.audit)


def augmentation_audit_rows(scorer: Scorer) -> List[dict]:
    bands: ScoreBands = scorer.audit["bands"]
    w_max = scorer.audit["w_max"]
    rows = []
    for b in range(bands.k):
        acc = float(bands.acceptance[b])
        financed = int(bands.financed_count[b]) > 0
        raw = 1.0 / acc if financed else float("nan")
        rows.append(
            {
                "band": b,
                "acceptance": acc,
                "weight": min(raw, w_max) if financed else float("nan"),
                "capped": bool(financed and raw > w_max),
            }
        )
    return rows


def parceling_audit_rows(scorer: Scorer) -> List[dict]:
    a = scorer.audit
    return [
        {"id": str(i), "band": int(b), "rate": float(r), "drawn": int(y)}
        for i, b, r, y in zip(a["ids"], a["band"], a["rate"], a["drawn"])
    ]
