import json
from pathlib import Path

import pandas as pd
import pytest

from app.cli import EXIT_CONFIG, EXIT_OK, build_parser, main

DATA = Path(__file__).resolve().parent.parent / "data"

MINIMAL_SWEEP = {
    "seed": 1,
    "sweep": {
        "generator": {"n_total": 500, "d": 2},
        "n_test": 500,
        "mechanism": {"kind": "MCAR"},
        "methods": [{"name": "financed_only"}],
        "rates": [0.5],
        "bootstrap": 200,
    },
}


def write_config(tmp_path, raw, name="run.json"):
    p = tmp_path / name
    p.write_text(json.dumps(raw), encoding="utf-8")
    return str(p)


def test_parser_requires_a_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_unknown_key_exits_with_config_error(tmp_path, capsys):
    cfg = write_config(tmp_path, {**MINIMAL_SWEEP, "sede": 3})
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "unknown key 'sede'" in capsys.readouterr().err


def test_single_replication_table1_is_rejected(tmp_path):
    cfg = write_config(tmp_path, {"table1": {"n": 500, "replications": 1, "d": 2, "n_reference": 1000}})
    assert main(["table1", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_missing_section_and_bad_seed(tmp_path):
    cfg = write_config(tmp_path, MINIMAL_SWEEP)
    assert main(["table1", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert main(["sweep", "--config", cfg, "--seed", "-5", "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_minimal_sweep_writes_one_row(tmp_path):
    cfg = write_config(tmp_path, MINIMAL_SWEEP)
    out = tmp_path / "o"
    assert main(["sweep", "--config", cfg, "--out", str(out)]) == EXIT_OK
    df = pd.read_csv(out / "sweep.csv")
    assert list(df.columns) == ["method", "rate", "gini", "lo", "hi", "param_l2"]
    assert len(df) == 1
    assert df.loc[0, "method"] == "financed_only"
    assert df.loc[0, "rate"] == 0.5
    assert (out / "summary.txt").exists()
    event = json.loads((out / "runs.jsonl").read_text().splitlines()[-1])
    assert event["command"] == "sweep"
    assert event["outputs"] == ["summary.txt", "sweep.csv"]


def test_reruns_are_byte_identical(tmp_path):
    cfg = write_config(tmp_path, MINIMAL_SWEEP)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["sweep", "--config", cfg, "--out", str(a)]) == EXIT_OK
    assert main(["sweep", "--config", cfg, "--out", str(b), "--jobs", "2"]) == EXIT_OK
    assert (a / "sweep.csv").read_bytes() == (b / "sweep.csv").read_bytes()
    assert (a / "summary.txt").read_bytes() == (b / "summary.txt").read_bytes()


def test_seed_override_changes_the_draws(tmp_path):
    cfg = write_config(tmp_path, MINIMAL_SWEEP)
    a, b = tmp_path / "a", tmp_path / "b"
    main(["sweep", "--config", cfg, "--out", str(a)])
    main(["sweep", "--config", cfg, "--out", str(b), "--seed", "2"])
    assert (a / "sweep.csv").read_bytes() != (b / "sweep.csv").read_bytes()


def test_fit_on_toy_csv(tmp_path):
    raw = json.loads((DATA / "configs" / "fit_toy.json").read_text(encoding="utf-8"))
    cfg = tmp_path / "configs" / "fit.json"
    cfg.parent.mkdir()
    raw["fit"]["data"] = str(DATA / "toy_applicants.csv")
    raw["fit"]["schema_path"] = str(DATA / "toy_schema.json")
    cfg.write_text(json.dumps(raw), encoding="utf-8")
    out = tmp_path / "fit"

    assert main(["fit", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    payload = json.loads((out / "fit.json").read_text(encoding="utf-8"))
    assert set(payload["models"]) == {"financed_only", "augmentation", "parceling", "generative"}
    assert payload["feature_names"] == ["intercept", "income_k", "debt_ratio", "age"]
    for rec in payload["models"].values():
        assert len(rec["theta"]) == 4
        assert -1.0 <= rec["test_gini"] <= 1.0

    weights = pd.read_csv(out / "augmentation_weights.csv")
    assert list(weights.columns) == ["band", "acceptance", "weight", "capped"]
    assert len(weights) == 5
    draws = pd.read_csv(out / "parceling_draws.csv")
    assert list(draws.columns) == ["id", "band", "rate", "drawn"]
    assert len(draws) == payload["n"] - payload["n_financed"]
    assert set(draws["drawn"]) <= {0, 1}


def test_fit_needs_the_financing_column(tmp_path):
    csv = tmp_path / "apps.csv"
    csv.write_text("applicant_id,income_k,debt_ratio,age,default\nA1,20,0.1,30,0\nA2,30,0.2,40,1\n")
    cfg = write_config(tmp_path, {"fit": {"data": "apps.csv", "schema_path": str(DATA / "toy_schema.json")}})
    assert main(["fit", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_fit_data_flag_overrides_config(tmp_path):
    cfg = write_config(
        tmp_path,
        {"fit": {"schema_path": str(DATA / "toy_schema.json"), "methods": [{"name": "financed_only"}]}},
    )
    out = tmp_path / "o"
    code = main(["fit", "--config", cfg, "--data", str(DATA / "toy_applicants.csv"), "--out", str(out)])
    assert code == EXIT_OK
    payload = json.loads((out / "fit.json").read_text(encoding="utf-8"))
    assert payload["data"] == "toy_applicants.csv"
    assert payload["n_test"] == 0


def test_table1_reruns_are_byte_identical(tmp_path):
    cfg = write_config(tmp_path, {"seed": 3, "table1": {"n": 1000, "replications": 10, "d": 2, "n_reference": 20_000}})
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["table1", "--config", cfg, "--out", str(a)]) == EXIT_OK
    assert main(["table1", "--config", cfg, "--out", str(b), "--jobs", "3"]) == EXIT_OK
    assert (a / "table1.csv").read_bytes() == (b / "table1.csv").read_bytes()
    assert len(pd.read_csv(a / "table1.csv")) == 4
