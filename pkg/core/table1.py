# core/table1.py
"""Monte Carlo check of when the financed-only fit matches the full-population fit.

Four cells: {well_specified, misspecified} x {MAR, MNAR}. In every
replication a fresh population of size n is drawn, the unselected MLE
theta_hat is fitted on all of it and the financed-only MLE theta_hat_f on
the records a mechanism finances.

  bias     E[theta_hat_f] - theta_ref, theta_ref = theta_true (well-specified)
           or the large-sample pseudo-true fit (misspecified); equal when
           every coefficient lies within bias_z standard errors of zero.
  variance trace Cov(sqrt(n_f)(theta_hat_f - mean)) / trace Cov(sqrt(N)(theta_hat - mean));
           equal when the ratio lies inside variance_band.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from core.errors import InsufficientReplicationsError, MechanismError, NumericalFailure
from core.logistic import fit_weighted
from core.mechanisms import MechanismSpec, apply_mechanism, fit_pilot_scorer
from core.seeds import derive_seed
from core.synthetic import FeatureDistribution, GeneratorSpec, SpecTag, generate_synthetic, pseudo_true_theta
from core.tasks import run_keyed

log = logging.getLogger(__name__)

MIN_REPLICATIONS = 10

SPEC_TAGS: Tuple[SpecTag, ...] = ("well_specified", "misspecified")
FAMILIES = ("MAR", "MNAR")


class Table1Config(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    n: int = Field(5000, ge=10)
    replications: int = Field(200, ge=1)
    d: int = Field(3, ge=1)
    features: FeatureDistribution = FeatureDistribution()
    theta_true: Optional[List[float]] = None
    quadratic_coef: float = 1.0
    mar: MechanismSpec = MechanismSpec(kind="MAR_stochastic", target_rate=0.5)
    mnar: MechanismSpec = MechanismSpec(kind="MNAR", target_rate=0.5, mnar_default_penalty=0.3)
    n_reference: int = Field(10**6, ge=1000)
    bias_z: float = Field(3.0, gt=0)
    variance_band: Tuple[float, float] = (0.9, 1.1)

    @model_validator(mode="after")
    def _check(self) -> "Table1Config":
        if self.mar.family != "MAR":
            raise ValueError("mar must be a MAR mechanism")
        if self.mnar.kind != "MNAR":
            raise ValueError("mnar must be an MNAR mechanism")
        lo, hi = self.variance_band
        if not 0 < lo < 1 < hi:
            raise ValueError("variance_band must bracket 1")
        # scenario validity (n_total vs d, theta length) is checked up front
        try:
            for tag in SPEC_TAGS:
                self.generator(tag, 0)
        except ValidationError as e:
            raise ValueError(f"invalid scenario: {e}") from e
        return self

    def generator(self, spec_tag: SpecTag, seed: int, n: Optional[int] = None) -> GeneratorSpec:
        return GeneratorSpec(
            n_total=n or self.n,
            d=self.d,
            spec_tag=spec_tag,
            theta_true=self.theta_true,
            quadratic_coef=self.quadratic_coef,
            features=self.features,
            seed=seed,
        )

    def mechanism(self, family: str) -> MechanismSpec:
        return self.mar if family == "MAR" else self.mnar


@dataclass(frozen=True, eq=False)
class Table1Cell:
    spec_tag: str
    family: str
    mechanism: str
    replications: int
    theta_ref: np.ndarray
    bias: np.ndarray
    bias_se: np.ndarray
    z_max: float
    bias_equal: bool
    variance_ratio: float
    variance_equal: bool
    mean_financed: float

    @property
    def name(self) -> str:
        return f"{self.spec_tag}/{self.family}"

    @property
    def effect_size(self) -> float:
        return float(np.linalg.norm(self.bias))

    def details(self) -> str:
        return (
            f"mechanism={self.mechanism};R={self.replications};z_max={self.z_max:.4f};"
            f"bias_l2={self.effect_size:.6f};n_f={self.mean_financed:.1f}"
        )


@dataclass(frozen=True)
class Table1Verdict:
    cells: Dict[Tuple[str, str], Table1Cell]
    seed: int

    def cell(self, spec_tag: str, family: str) -> Table1Cell:
        return self.cells[(spec_tag, family)]

    def rows(self) -> List[dict]:
        return [
            {
                "cell": c.name,
                "bias_equal": str(c.bias_equal).lower(),
                "variance_ratio": c.variance_ratio,
                "details": c.details(),
            }
            for _, c in sorted(self.cells.items())
        ]


@dataclass(frozen=True, eq=False)
class Replication:
    theta_f: np.ndarray
    theta_full: np.ndarray
    n_f: int
    n: int


def _replicate(config: Table1Config, seed: int, spec_tag: SpecTag, family: str, r: int) -> Replication:
    mech = config.mechanism(family)
    pop_seed = derive_seed(seed, "table1", spec_tag, r)
    population, _ = generate_synthetic(config.generator(spec_tag, pop_seed))
    n_pilot = max(int(round(mech.pilot_fraction * config.n)), 4 * (config.d + 1))
    pilot, _ = generate_synthetic(config.generator(spec_tag, derive_seed(pop_seed, "pilot"), n_pilot))
    try:
        scorer = fit_pilot_scorer(pilot)
        masked, _ = apply_mechanism(
            population,
            mech.model_copy(update={"seed": derive_seed(pop_seed, "select", family)}),
            scorer,
        )
    except MechanismError as e:
        raise NumericalFailure(str(e), method="mechanism", rate=mech.target_rate) from e

    full = fit_weighted(population.features, population.labels)
    fin = fit_weighted(masked.x_f, masked.y_f)
    for tag, m in (("oracle", full), ("financed_only", fin)):
        if not m.converged:
            raise NumericalFailure(
                f"{spec_tag}/{family} replication {r}: {m.diagnostic}", method=tag, rate=mech.target_rate
            )
    return Replication(fin.theta, full.theta, masked.n_financed, population.n)


def _scaled_trace(thetas: np.ndarray, sizes: np.ndarray) -> float:
    centred = (thetas - thetas.mean(axis=0)) * np.sqrt(sizes)[:, None]
    return float(np.trace(np.atleast_2d(np.cov(centred, rowvar=False))))


def reference_theta(config: Table1Config, spec_tag: SpecTag, seed: int = 0) -> np.ndarray:
    if spec_tag == "well_specified":
        return config.generator(spec_tag, 0).theta()
    canonical = config.generator(spec_tag, derive_seed(seed, "table1", "reference"))
    return pseudo_true_theta(canonical, config.n_reference)


def summarize_cell(
    config: Table1Config,
    spec_tag: SpecTag,
    family: str,
    reps: List[Replication],
    theta_ref: np.ndarray,
) -> Table1Cell:
    r = len(reps)
    theta_f = np.vstack([x.theta_f for x in reps])
    theta_full = np.vstack([x.theta_full for x in reps])
    n_f = np.array([x.n_f for x in reps], dtype=float)
    n = np.array([x.n for x in reps], dtype=float)

    bias = theta_f.mean(axis=0) - theta_ref
    se = theta_f.std(axis=0, ddof=1) / np.sqrt(r)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, np.abs(bias) / se, np.where(bias == 0, 0.0, np.inf))
    z_max = float(z.max())

    ratio = _scaled_trace(theta_f, n_f) / _scaled_trace(theta_full, n)
    lo, hi = config.variance_band
    cell = Table1Cell(
        spec_tag=spec_tag,
        family=family,
        mechanism=config.mechanism(family).kind,
        replications=r,
        theta_ref=theta_ref,
        bias=bias,
        bias_se=se,
        z_max=z_max,
        bias_equal=bool(z_max <= config.bias_z),
        variance_ratio=float(ratio),
        variance_equal=bool(lo <= ratio <= hi),
        mean_financed=float(n_f.mean()),
    )
    log.info(
        "[table1] %s bias_equal=%s (z_max=%.2f) variance_ratio=%.3f",
        cell.name, cell.bias_equal, z_max, ratio,
    )
    return cell


def monte_carlo_table1(config: Table1Config, seed: int = 0, jobs: int = 1) -> Table1Verdict:
    if config.replications < MIN_REPLICATIONS:
        raise InsufficientReplicationsError(config.replications, MIN_REPLICATIONS)

    cells = [(s, f) for s in SPEC_TAGS for f in FAMILIES]
    tasks = {
        (s, f, r): (lambda s=s, f=f, r=r: _replicate(config, seed, s, f, r))
        for s, f in cells
        for r in range(config.replications)
    }
    log.info("[table1] %d cells x %d replications, n=%d", len(cells), config.replications, config.n)
    results = run_keyed(tasks, jobs)

    refs = {s: reference_theta(config, s, seed) for s in SPEC_TAGS}
    out: Dict[Tuple[str, str], Table1Cell] = {}
    for s, f in cells:
        reps = [results[(s, f, r)] for r in range(config.replications)]
        out[(s, f)] = summarize_cell(config, s, f, reps, refs[s])
    return Table1Verdict(cells=out, seed=seed)
