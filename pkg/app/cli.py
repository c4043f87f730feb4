# app/cli.py
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from app.config import RunConfig, load_run_config, require, with_overrides
from core.dataset import Dataset, SchemaConfig, apply_bins, discretize, load_csv
from core.errors import (
    BandError,
    ConfigError,
    ConvergenceError,
    DataError,
    InsufficientReplicationsError,
    LeakageError,
    MetricError,
    NumericalFailure,
    PositivityError,
    RejectInferenceError,
    SingularInformationError,
)
from core.log import setup_logging
from core.methods import Scorer, augmentation_audit_rows, parceling_audit_rows, run_method
from core.metrics import gini
from core.result_store import ResultStoreCsv, RunLogJsonl
from core.seeds import derive_seed, rng_for
from core.sweep import REAL_DATA_CAVEAT, SweepResult, acceptance_sweep
from core.table1 import Table1Verdict, monte_carlo_table1

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

SWEEP_COLUMNS = ("method", "rate", "gini", "lo", "hi", "param_l2")
TABLE1_COLUMNS = ("cell", "bias_equal", "variance_ratio", "details")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reject-inference",
        description="Reject inference for credit scoring: sweeps, selection-bias checks, CSV fits",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", required=True, help="run config (JSON)")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--seed", type=int, default=None, help="master seed, u64 (overrides config)")
        p.add_argument("--jobs", type=int, default=None, help="parallel workers (overrides config)")

    common(sub.add_parser("sweep", help="test Gini per method across acceptance rates"))
    common(sub.add_parser("table1", help="Monte Carlo check of financed-only bias and variance"))
    fit = sub.add_parser("fit", help="fit every configured method on an applicant CSV")
    common(fit)
    fit.add_argument("--data", default=None, help="applicant CSV (overrides config)")
    return parser


def _load(args: argparse.Namespace, section: str) -> RunConfig:
    cfg = with_overrides(load_run_config(args.config), seed=args.seed, out=args.out, jobs=args.jobs)
    require(cfg, section)
    return cfg


def _finish(cfg: RunConfig, command: str, store: ResultStoreCsv, summary: str) -> int:
    store.write_text("summary.txt", summary)
    print(summary)
    RunLogJsonl(cfg.output_dir / "runs.jsonl").append(
        {
            "command": command,
            "seed": str(cfg.seed),
            "config_digest": cfg.digest(),
            "outputs": sorted(Path(p).name for p in store.written),
        }
    )
    return EXIT_OK


def format_sweep(result: SweepResult) -> str:
    lines = ["[sweep] test Gini by method and acceptance rate"]
    if result.real_data:
        lines.append(f"caveat: {REAL_DATA_CAVEAT}")
    lines.append(f"{'method':<24}{'rate':>7}{'gini':>9}{'lo':>9}{'hi':>9}{'param_l2':>10}")
    for r in result.rows:
        lines.append(f"{r.method:<24}{r.rate:>7.3f}{r.gini:>9.4f}{r.lo:>9.4f}{r.hi:>9.4f}{r.param_l2:>10.4f}")
    lines.append(f"replications: {result.rows[0].replications if result.rows else 0}")
    return "\n".join(lines)


def format_table1(verdict: Table1Verdict) -> str:
    lines = [
        "[table1] financed-only fit vs full-population fit",
        f"{'cell':<28}{'bias_equal':>12}{'z_max':>9}{'var_ratio':>11}{'var_equal':>11}",
    ]
    for _, c in sorted(verdict.cells.items()):
        lines.append(
            f"{c.name:<28}{str(c.bias_equal):>12}{c.z_max:>9.2f}{c.variance_ratio:>11.3f}{str(c.variance_equal):>11}"
        )
    return "\n".join(lines)


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _load(args, "sweep")
    result = acceptance_sweep(cfg.sweep, seed=cfg.seed, jobs=cfg.jobs)
    store = ResultStoreCsv(cfg.output_dir)
    store.write("sweep.csv", result.records(), SWEEP_COLUMNS)
    return _finish(cfg, "sweep", store, format_sweep(result))


def cmd_table1(args: argparse.Namespace) -> int:
    cfg = _load(args, "table1")
    verdict = monte_carlo_table1(cfg.table1, seed=cfg.seed, jobs=cfg.jobs)
    store = ResultStoreCsv(cfg.output_dir)
    store.write("table1.csv", verdict.rows(), TABLE1_COLUMNS)
    return _finish(cfg, "table1", store, format_table1(verdict))


def split_holdout(ds: Dataset, fraction: float, seed: int):
    """Hold out a share of the financed records as a labeled test set."""
    if fraction <= 0:
        return ds, None
    fin = np.where(ds.financed)[0]
    n_test = int(round(fraction * fin.size))
    if n_test < 2:
        raise DataError("holdout_fraction leaves fewer than 2 test records")
    picked = np.sort(rng_for(seed, "fit", "holdout").choice(fin, size=n_test, replace=False))
    keep = np.setdiff1d(np.arange(ds.n), picked)
    return ds.subset(keep), ds.subset(picked)


def _model_record(scorer: Scorer, test: Optional[Dataset]) -> Dict[str, object]:
    theta = scorer.theta
    rec: Dict[str, object] = {
        "theta": None if theta is None else [round(float(t), 10) for t in theta],
        "converged": bool(scorer.model.converged),
    }
    if test is not None:
        rec["test_gini"] = round(gini(scorer.score(test.features), test.labels), 10)
    return rec


def cmd_fit(args: argparse.Namespace) -> int:
    cfg = _load(args, "fit")
    fc = cfg.fit
    data = Path(args.data) if args.data else fc.data
    if data is None:
        raise ConfigError("fit needs a CSV: set fit.data or pass --data", ["fit.data"])
    ds = load_csv(data, SchemaConfig.from_file(fc.schema_path))
    train, test = split_holdout(ds, fc.holdout_fraction, cfg.seed)
    if fc.bins:
        train = discretize(train, fc.bins, fc.bin_columns)
        if test is not None:
            test = apply_bins(test, train.bin_edges)

    store = ResultStoreCsv(cfg.output_dir)
    models: Dict[str, Dict[str, object]] = {}
    lines: List[str] = [f"[fit] {data.name}: n={train.n} financed={train.n_financed} d={train.d}"]
    if test is not None:
        log.warning("[fit] %s", REAL_DATA_CAVEAT)
        lines.append(f"caveat: {REAL_DATA_CAVEAT}")
    for spec in fc.methods:
        try:
            scorer = run_method(spec, train, seed=derive_seed(cfg.seed, "fit", spec.key))
            models[spec.key] = _model_record(scorer, test)
        except (BandError, ConvergenceError, MetricError, PositivityError, SingularInformationError) as e:
            raise NumericalFailure(str(e), method=spec.key) from e
        if spec.name == "augmentation":
            store.write(f"augmentation_weights_{spec.key}.csv" if spec.label else "augmentation_weights.csv",
                        augmentation_audit_rows(scorer))
        elif spec.name == "parceling":
            store.write(f"parceling_draws_{spec.key}.csv" if spec.label else "parceling_draws.csv",
                        parceling_audit_rows(scorer))
        rec = models[spec.key]
        theta = rec["theta"]
        coef = "n/a (unequal class covariances)" if theta is None else ", ".join(f"{t:.4f}" for t in theta)
        line = f"{spec.key:<20} theta=[{coef}]"
        if "test_gini" in rec:
            line += f" test_gini={rec['test_gini']:.4f}"
        lines.append(line)

    payload = {
        "data": data.name,
        "seed": str(cfg.seed),
        "feature_names": ["intercept", *train.feature_names],
        "n": train.n,
        "n_financed": train.n_financed,
        "n_test": 0 if test is None else test.n,
        "models": models,
    }
    path = cfg.output_dir / "fit.json"
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    store.written.append(str(path))
    return _finish(cfg, "fit", store, "\n".join(lines))


COMMANDS = {"sweep": cmd_sweep, "table1": cmd_table1, "fit": cmd_fit}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(logging.DEBUG if args.verbose else logging.INFO)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, DataError, InsufficientReplicationsError, LeakageError) as e:
        print(f"[{args.command}] error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except RejectInferenceError as e:
        print(f"[{args.command}] numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
