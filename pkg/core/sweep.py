# core/sweep.py
"""Acceptance-rate sweep: test Gini of every method as selection gets stricter."""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from core.dataset import Dataset, SchemaConfig, apply_bins, discretize, load_csv
from core.errors import (
    BandError,
    ConvergenceError,
    DataError,
    LeakageError,
    MetricError,
    NumericalFailure,
    PositivityError,
    SingularInformationError,
)
from core.mechanisms import MechanismSpec, SweepPoint, fit_pilot_scorer, sweep_mechanism
from core.methods import MethodSpec, run_method
from core.metrics import MIN_BOOTSTRAP, bootstrap_gini_interval, parameter_error
from core.seeds import derive_seed, rng_for
from core.synthetic import GeneratorSpec, GroundTruth, generate_synthetic
from core.tasks import run_keyed

log = logging.getLogger(__name__)

REAL_DATA_CAVEAT = (
    "real-data mode: the test set holds financed applicants only, "
    "so the Gini is not representative of the whole applicant population"
)

_NUMERIC_ERRORS = (
    BandError,
    ConvergenceError,
    DataError,
    MetricError,
    PositivityError,
    SingularInformationError,
    FloatingPointError,
    np.linalg.LinAlgError,
)


class CsvSource(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    path: Path
    schema_path: Path
    holdout_fraction: float = Field(0.3, gt=0, lt=1)
    bins: Optional[int] = Field(None, ge=2)


class SweepConfig(BaseModel):
    """One sweep. `generator.n_total` is the training size; its seed is replaced by derived seeds."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    generator: Optional[GeneratorSpec] = None
    csv: Optional[CsvSource] = None
    n_test: int = Field(10000, ge=10)
    mechanism: MechanismSpec = MechanismSpec()
    methods: List[MethodSpec] = Field(min_length=1)
    rates: List[float] = Field(min_length=1)
    replications: int = Field(1, ge=1)
    bootstrap: int = Field(1000, ge=MIN_BOOTSTRAP)

    @model_validator(mode="after")
    def _check(self) -> "SweepConfig":
        if (self.generator is None) == (self.csv is None):
            raise ValueError("give exactly one of generator (simulation) or csv (real data)")
        if any(not 0 < r <= 1 for r in self.rates):
            raise ValueError("rates must lie in (0, 1]")
        if any(b >= a for a, b in zip(self.rates, self.rates[1:])):
            raise ValueError("rates must be strictly decreasing")
        keys = [m.key for m in self.methods]
        dup = sorted({k for k in keys if keys.count(k) > 1})
        if dup:
            raise ValueError(f"duplicate method labels: {', '.join(dup)}; set `label` to tell them apart")
        names = {m.name for m in self.methods}
        if "ideal_reweighting" in names and self.mechanism.kind == "MAR_cutoff" and min(self.rates) < 1:
            raise ValueError("ideal_reweighting needs p(f|x) > 0 everywhere, which MAR_cutoff violates")
        floor_kinds = ("MAR_stochastic", "MNAR")
        if self.mechanism.kind in floor_kinds and any(r < 1 and r <= self.mechanism.floor for r in self.rates):
            raise ValueError(f"every rate below 1 must exceed the mechanism floor {self.mechanism.floor}")
        return self

    @property
    def real_data(self) -> bool:
        return self.csv is not None


@dataclass(frozen=True)
class SweepRow:
    method: str
    rate: float
    gini: float
    lo: float
    hi: float
    param_l2: float
    replications: int

    def as_dict(self) -> dict:
        return {
            "method": self.method,
            "rate": self.rate,
            "gini": self.gini,
            "lo": self.lo,
            "hi": self.hi,
            "param_l2": self.param_l2,
        }


@dataclass(frozen=True)
class SweepResult:
    rows: List[SweepRow]
    seeds: List[int]
    real_data: bool = False

    def row(self, method: str, rate: float) -> SweepRow:
        for r in self.rows:
            if r.method == method and abs(r.rate - rate) < 1e-12:
                return r
        raise KeyError((method, rate))

    def methods(self) -> List[str]:
        return sorted({r.method for r in self.rows})

    def records(self) -> List[dict]:
        return [r.as_dict() for r in self.rows]


@dataclass(frozen=True, eq=False)
class _Replicate:
    train: Dataset
    test: Dataset
    pilot: Optional[Dataset]
    truth: GroundTruth


@dataclass(frozen=True)
class _Outcome:
    gini: float
    lo: float
    hi: float
    param_l2: float


def check_leakage(train: Dataset, test: Dataset) -> None:
    shared = np.intersect1d(train.ids, test.ids)
    if shared.size:
        raise LeakageError([str(s) for s in shared])


def _simulated(config: SweepConfig, base: int) -> _Replicate:
    gen = config.generator
    train, truth = generate_synthetic(gen.model_copy(update={"seed": derive_seed(base, "train")}), "train-")
    test, _ = generate_synthetic(
        gen.model_copy(update={"seed": derive_seed(base, "test"), "n_total": config.n_test}), "test-"
    )
    pilot = None
    if config.mechanism.kind != "MCAR":
        n_pilot = max(int(round(config.mechanism.pilot_fraction * gen.n_total)), 4 * (gen.d + 1))
        pilot, _ = generate_synthetic(
            gen.model_copy(update={"seed": derive_seed(base, "pilot"), "n_total": n_pilot}), "pilot-"
        )
    return _Replicate(train, test, pilot, truth)


def _financed_population(config: SweepConfig, source: Dataset) -> Dataset:
    if source.n_financed < 10:
        raise DataError("real-data mode needs at least 10 financed records")
    f = source.financed
    return Dataset.fully_labeled(source.x_f, source.labels[f], ids=source.ids[f], feature_names=source.feature_names)


def _real(config: SweepConfig, population: Dataset, base: int) -> _Replicate:
    csv = config.csv
    perm = rng_for(base, "split").permutation(population.n)
    n_test = int(round(csv.holdout_fraction * population.n))
    n_pilot = 0
    if config.mechanism.kind != "MCAR":
        n_pilot = max(int(round(config.mechanism.pilot_fraction * (population.n - n_test))), 4 * (population.d + 1))
    if n_test < 2 or population.n - n_test - n_pilot < 4 * (population.d + 1):
        raise DataError("too few financed records to split into train, test and pilot")
    test = population.subset(np.sort(perm[:n_test]))
    pilot = population.subset(np.sort(perm[n_test:n_test + n_pilot])) if n_pilot else None
    train = population.subset(np.sort(perm[n_test + n_pilot:]))
    if csv.bins:
        train = discretize(train, csv.bins)
        test = apply_bins(test, train.bin_edges)
        if pilot is not None:
            pilot = apply_bins(pilot, train.bin_edges)
    truth = GroundTruth(
        theta_true=np.full(train.d + 1, np.nan),
        full_labels=train.labels,
        true_probabilities=np.full(train.n, np.nan),
        spec_tag="real_data",
    )
    return _Replicate(train, test, pilot, truth)


def _evaluate(
    config: SweepConfig,
    spec: MethodSpec,
    rate: float,
    point: SweepPoint,
    rep: _Replicate,
    oracle_theta: Optional[np.ndarray],
    base: int,
) -> _Outcome:
    try:
        scorer = run_method(
            spec,
            point.dataset,
            seed=derive_seed(base, "method", spec.key, rate),
            truth=rep.truth,
            propensities=point.propensities,
        )
        scores = scorer.score(rep.test.features)
        ci = bootstrap_gini_interval(
            scores, rep.test.labels, config.bootstrap, derive_seed(base, "bootstrap", spec.key, rate)
        )
        param_l2 = float("nan")
        if oracle_theta is not None and scorer.theta is not None:
            param_l2 = parameter_error(scorer, oracle_theta).l2
    except _NUMERIC_ERRORS as e:
        raise NumericalFailure(str(e), method=spec.key, rate=rate) from e
    log.info("[sweep] rate=%.2f method=%s gini=%.4f", rate, spec.key, ci.gini)
    return _Outcome(ci.gini, ci.lo, ci.hi, param_l2)


def acceptance_sweep(config: SweepConfig, seed: int = 0, jobs: int = 1) -> SweepResult:
    source = None
    if config.real_data:
        log.warning("[sweep] %s", REAL_DATA_CAVEAT)
        raw = load_csv(config.csv.path, SchemaConfig.from_file(config.csv.schema_path))
        source = _financed_population(config, raw)

    bases = [derive_seed(seed, "sweep", r) for r in range(config.replications)]
    tasks = {}
    for r, base in enumerate(bases):
        rep = _real(config, source, base) if source is not None else _simulated(config, base)
        check_leakage(rep.train, rep.test)
        scorecard = fit_pilot_scorer(rep.pilot) if rep.pilot is not None else None
        mech = config.mechanism.model_copy(update={"seed": derive_seed(base, "select")})
        points = sweep_mechanism(rep.train, mech, config.rates, scorecard)

        try:
            oracle = run_method(MethodSpec(name="oracle"), rep.train, truth=rep.truth)
        except _NUMERIC_ERRORS as e:
            raise NumericalFailure(str(e), method="oracle", rate=1.0) from e
        for point in points:
            for spec in config.methods:
                key = (spec.key, point.rate, r)
                tasks[key] = (
                    lambda spec=spec, point=point, rep=rep, base=base, oracle_theta=oracle.theta: _evaluate(
                        config, spec, point.rate, point, rep, oracle_theta, base
                    )
                )

    outcomes = run_keyed(tasks, jobs)
    rows = []
    for method, rate in sorted({(k[0], k[1]) for k in outcomes}):
        got = [outcomes[(method, rate, r)] for r in range(config.replications)]
        rows.append(
            SweepRow(
                method=method,
                rate=rate,
                gini=float(np.mean([o.gini for o in got])),
                lo=float(np.mean([o.lo for o in got])),
                hi=float(np.mean([o.hi for o in got])),
                param_l2=float(np.mean([o.param_l2 for o in got])),
                replications=len(got),
            )
        )
    return SweepResult(rows=rows, seeds=bases, real_data=config.real_data)


def interval_hits(result: SweepResult, method: str, baseline: str = "financed_only") -> Tuple[int, int]:
    """How many rates put `method`'s Gini inside the baseline's interval, out of all rates."""
    hits = 0
    rates = sorted({r.rate for r in result.rows if r.method == method})
    for rate in rates:
        ref = result.row(baseline, rate)
        if ref.lo <= result.row(method, rate).gini <= ref.hi:
            hits += 1
    return hits, len(rates)

