import json
from pathlib import Path

import pytest

from app.config import load_run_config, parse_run_config, require, with_overrides
from core.errors import ConfigError

SWEEP = {
    "generator": {"n_total": 500, "d": 2},
    "methods": [{"name": "financed_only"}],
    "rates": [1.0, 0.5],
    "bootstrap": 200,
}


def test_unknown_key_is_named():
    with pytest.raises(ConfigError) as err:
        parse_run_config({"seed": 1, "sweep": {**SWEEP, "ratez": [0.5]}})
    assert "unknown key 'sweep.ratez'" in str(err.value)
    assert "sweep.ratez" in err.value.keys


def test_seed_must_fit_u64():
    with pytest.raises(ConfigError):
        parse_run_config({"seed": -1})
    with pytest.raises(ConfigError):
        parse_run_config({"seed": 2**64})
    assert parse_run_config({"seed": 2**64 - 1}).seed == 2**64 - 1


def test_relative_paths_follow_the_config_file(tmp_path):
    p = tmp_path / "configs" / "fit.json"
    p.parent.mkdir()
    p.write_text(json.dumps({"fit": {"data": "../apps.csv", "schema_path": "../schema.json"}}))
    cfg = load_run_config(p)
    assert cfg.fit.data == p.parent / "../apps.csv"
    assert cfg.fit.schema_path == p.parent / "../schema.json"


def test_fit_defaults_and_simulation_only_methods():
    cfg = parse_run_config({"fit": {"schema_path": "/s.json"}})
    assert [m.name for m in cfg.fit.methods] == ["financed_only", "augmentation", "parceling", "generative"]
    with pytest.raises(ConfigError, match="simulated ground truth"):
        parse_run_config({"fit": {"schema_path": "/s.json", "methods": [{"name": "oracle"}]}})


def test_overrides_are_validated():
    cfg = parse_run_config({"seed": 3, "sweep": SWEEP})
    out = with_overrides(cfg, seed=9, out="elsewhere", jobs=4)
    assert (out.seed, out.output_dir, out.jobs) == (9, Path("elsewhere"), 4)
    assert out.digest() != cfg.digest()
    with pytest.raises(ConfigError):
        with_overrides(cfg, jobs=0)


def test_missing_section():
    cfg = parse_run_config({"sweep": SWEEP})
    require(cfg, "sweep")
    with pytest.raises(ConfigError, match="no 'table1' section"):
        require(cfg, "table1")


def test_unreadable_files(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_run_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{seed: 1")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_run_config(bad)
    arr = tmp_path / "arr.json"
    arr.write_text("[1, 2]")
    with pytest.raises(ConfigError, match="JSON object"):
        load_run_config(arr)


def test_shipped_configs_parse():
    configs = Path(__file__).resolve().parent.parent / "data" / "configs"
    for p in sorted(configs.glob("*.json")):
        cfg = load_run_config(p)
        assert cfg.sweep or cfg.table1 or cfg.fit, p.name
