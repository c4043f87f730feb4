# core/mechanisms.py
"""Financing selection applied to fully labeled populations.

Scores follow the scorecard convention: a score is a predicted default
probability, so a lower score is a safer applicant and is financed first.

  MCAR            p(f|x,y) = rate
  MAR_cutoff      finance the round(rate * n) lowest scores; p(f|x) in {0, 1}
  MAR_stochastic  p(f|x) = eps + (1 - eps) * sigmoid(steepness * (c - q(x))),
                  q = score quantile, c solved so that mean p = rate
  MNAR            p(f|x,y) = min(1, k * p_MAR_stochastic(f|x) * (1 if y = 0 else delta)),
                  k solved so that mean p = rate

A single uniform draw per record is shared by every rate of a given seed,
so financed sets are nested across a sweep for every kind.
"""

import logging
from typing import Callable, List, Literal, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.optimize import brentq
from scipy.special import expit
from scipy.stats import chi2, rankdata

from core.dataset import Dataset
from core.errors import MechanismError
from core.logistic import LogisticOptions, fit_weighted, predict_proba
from core.seeds import U64_MAX

log = logging.getLogger(__name__)

Scorer = Callable[[np.ndarray], np.ndarray]

MechanismKind = Literal["MCAR", "MAR_cutoff", "MAR_stochastic", "MNAR"]

RATE_TOL = 1e-3


class MechanismSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: MechanismKind = "MAR_stochastic"
    target_rate: float = Field(0.5, gt=0, le=1)
    mnar_default_penalty: float = Field(0.3, gt=0, le=1)
    floor: float = Field(0.05, ge=0, lt=1)
    steepness: float = Field(8.0, gt=0)
    pilot_fraction: float = Field(0.1, gt=0, le=1)
    seed: int = Field(0, ge=0, le=U64_MAX)

    @model_validator(mode="after")
    def _check(self) -> "MechanismSpec":
        if self.kind in ("MAR_stochastic", "MNAR") and self.target_rate < 1 and self.target_rate <= self.floor:
            raise ValueError(f"target_rate {self.target_rate} must exceed the floor {self.floor}")
        return self

    @property
    def family(self) -> str:
        return mechanism_family(self.kind)


def mechanism_family(kind: str) -> str:
    if kind.startswith("MAR"):
        return "MAR"
    return kind


class SweepPoint(NamedTuple):
    rate: float
    dataset: Dataset
    propensities: np.ndarray


def fit_pilot_scorer(pilot: Dataset, ridge: float = 0.0) -> Scorer:
    """Incumbent scorecard: a logistic fit on an independent, fully labeled pilot sample."""
    if not pilot.all_labeled:
        raise MechanismError("the pilot sample must be fully labeled")
    model = fit_weighted(pilot.features, pilot.labels, None, LogisticOptions(ridge=ridge))
    if not model.converged:
        raise MechanismError(f"pilot scorecard did not converge: {model.diagnostic}")
    log.debug("[mechanism] pilot scorecard theta=%s", np.round(model.theta, 4).tolist())
    return lambda x: predict_proba(model, np.asarray(x, dtype=float).reshape(-1, model.d))


def _score_quantiles(scores: np.ndarray) -> np.ndarray:
    return (rankdata(scores, method="average") - 0.5) / scores.shape[0]


def _mar_stochastic(q: np.ndarray, rate: float, floor: float, steepness: float) -> np.ndarray:
    def propensity(c: float) -> np.ndarray:
        return floor + (1.0 - floor) * expit(steepness * (c - q))

    if rate <= floor:
        raise MechanismError(f"target rate {rate} is not above the floor {floor}")
    lo, hi = -1.0, 2.0
    while propensity(lo).mean() > rate:
        lo -= 1.0
        if lo < -1e3:
            raise MechanismError(f"target rate {rate} unachievable")
    while propensity(hi).mean() < rate:
        hi += 1.0
        if hi > 1e3:
            raise MechanismError(f"target rate {rate} unachievable")
    c = brentq(lambda c: propensity(c).mean() - rate, lo, hi, xtol=1e-12)
    return propensity(c)


def _mnar(base: np.ndarray, y: np.ndarray, rate: float, delta: float) -> np.ndarray:
    raw = base * np.where(y == 1, delta, 1.0)

    def gap(k: float) -> float:
        return float(np.minimum(1.0, k * raw).mean()) - rate

    hi = 1.0
    while gap(hi) < 0:
        hi *= 2.0
        if hi > 1e12:
            raise MechanismError(f"target rate {rate} unachievable under MNAR renormalization")
    k = brentq(gap, 0.0, hi, xtol=1e-14)
    p = np.minimum(1.0, k * raw)
    if abs(p.mean() - rate) > RATE_TOL:
        raise MechanismError(f"MNAR renormalization missed the target rate {rate}")
    return p


def selection_propensities(
    dataset: Dataset,
    spec: MechanismSpec,
    scorer: Optional[Scorer] = None,
) -> np.ndarray:
    n = dataset.n
    rate = spec.target_rate
    if not dataset.all_labeled:
        raise MechanismError("selection needs every label present")
    if rate >= 1.0:
        return np.ones(n)
    if spec.kind == "MCAR":
        return np.full(n, rate)
    if scorer is None:
        raise MechanismError(f"{spec.kind} selection needs a scorer")
    scores = np.asarray(scorer(dataset.features), dtype=float).reshape(-1)
    if spec.kind == "MAR_cutoff":
        k = int(round(rate * n))
        order = np.argsort(scores, kind="stable")
        p = np.zeros(n)
        p[order[:k]] = 1.0
        return p
    base = _mar_stochastic(_score_quantiles(scores), rate, spec.floor, spec.steepness)
    if spec.kind == "MAR_stochastic":
        return base
    return _mnar(base, dataset.labels, rate, spec.mnar_default_penalty)


def apply_mechanism(
    dataset: Dataset,
    spec: MechanismSpec,
    scorer: Optional[Scorer] = None,
) -> Tuple[Dataset, np.ndarray]:
    """Hide labels of rejected applicants; returns (masked dataset, true propensities)."""
    p = selection_propensities(dataset, spec, scorer)
    u = np.random.default_rng(spec.seed).random(dataset.n)
    financed = u < p
    masked = dataset.masked(financed)
    log.debug(
        "[mechanism] %s rate=%.3f financed=%d/%d mean propensity=%.4f",
        spec.kind, spec.target_rate, masked.n_financed, dataset.n, p.mean(),
    )
    return masked, p


def sweep_mechanism(
    dataset: Dataset,
    base_spec: MechanismSpec,
    rates: Sequence[float],
    scorer: Optional[Scorer] = None,
) -> List[SweepPoint]:
    rates = [float(r) for r in rates]
    if not rates:
        raise MechanismError("no acceptance rates given")
    if any(not 0 < r <= 1 for r in rates):
        raise MechanismError("acceptance rates must lie in (0, 1]")
    if any(b >= a for a, b in zip(rates, rates[1:])):
        raise MechanismError(f"acceptance rates must be strictly decreasing: {rates}")
    out: List[SweepPoint] = []
    for r in rates:
        masked, p = apply_mechanism(dataset, base_spec.model_copy(update={"target_rate": r}), scorer)
        out.append(SweepPoint(r, masked, p))
    return out


class IndependenceTest(NamedTuple):
    statistic: float
    dof: int
    p_value: float


def selection_independence_test(
    scores: np.ndarray,
    labels: np.ndarray,
    financed: np.ndarray,
    n_bins: int = 20,
) -> IndependenceTest:
    """Stratified chi-square test of f independent of y given the score bin.

    Sums the Pearson statistics of the per-bin 2x2 (f, y) tables; bins where
    either margin is degenerate carry no information and are skipped.
    """
    scores = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=float)
    f = np.asarray(financed, dtype=bool)
    edges = np.quantile(scores, np.arange(1, n_bins) / n_bins)
    bins = np.digitize(scores, edges, right=True)
    stat = 0.0
    dof = 0
    for b in np.unique(bins):
        m = bins == b
        table = np.array(
            [
                [np.sum(f[m] & (y[m] == 1)), np.sum(f[m] & (y[m] == 0))],
                [np.sum(~f[m] & (y[m] == 1)), np.sum(~f[m] & (y[m] == 0))],
            ],
            dtype=float,
        )
        rows = table.sum(axis=1)
        cols = table.sum(axis=0)
        if np.any(rows == 0) or np.any(cols == 0):
            continue
        expected = np.outer(rows, cols) / table.sum()
        stat += float(np.sum((table - expected) ** 2 / expected))
        dof += 1
    p_value = float(chi2.sf(stat, dof)) if dof else 1.0
    return IndependenceTest(stat, dof, p_value)
