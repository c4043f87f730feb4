from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError

from core.dataset import Dataset
from core.errors import LeakageError
from core.sweep import CsvSource, SweepConfig, acceptance_sweep, check_leakage, interval_hits

DATA = Path(__file__).resolve().parent.parent / "data"


def small_config(**update):
    raw = {
        "generator": {"n_total": 800, "d": 2, "theta_true": [-1.0, 1.0, -0.5]},
        "n_test": 1000,
        "mechanism": {"kind": "MAR_stochastic"},
        "methods": [{"name": "financed_only"}, {"name": "augmentation"}, {"name": "parceling"}, {"name": "oracle"}],
        "rates": [1.0, 0.5],
        "bootstrap": 200,
    }
    raw.update(update)
    return SweepConfig.model_validate(raw)


@pytest.fixture(scope="module")
def result():
    return acceptance_sweep(small_config(), seed=42)


def test_rows_sorted_by_method_then_rate(result):
    keys = [(r.method, r.rate) for r in result.rows]
    assert keys == sorted(keys)
    assert len(keys) == 8
    assert result.methods() == ["augmentation", "financed_only", "oracle", "parceling"]


def test_full_acceptance_collapses_every_method(result):
    base = result.row("financed_only", 1.0).gini
    for method in ("augmentation", "parceling", "oracle"):
        assert result.row(method, 1.0).gini == pytest.approx(base, abs=1e-6)


def test_oracle_has_no_parameter_error(result):
    for rate in (1.0, 0.5):
        assert result.row("oracle", rate).param_l2 == pytest.approx(0.0, abs=1e-12)
    assert result.row("financed_only", 0.5).param_l2 > 0


def test_intervals_contain_the_point_estimate(result):
    for row in result.rows:
        assert row.lo <= row.gini <= row.hi
        assert -1.0 <= row.gini <= 1.0


def test_sweep_is_reproducible(result):
    again = acceptance_sweep(small_config(), seed=42)
    assert again.records() == result.records()
    assert again.seeds == result.seeds


def test_interval_hits(result):
    hits, total = interval_hits(result, "augmentation")
    assert total == 2
    assert hits >= 1


def test_replications_are_averaged():
    cfg = small_config(methods=[{"name": "financed_only"}], rates=[0.6], replications=2)
    out = acceptance_sweep(cfg, seed=1)
    assert len(out.rows) == 1
    assert out.rows[0].replications == 2
    assert len(out.seeds) == 2


def test_each_replication_uses_its_own_oracle():
    cfg = small_config(methods=[{"name": "oracle"}, {"name": "financed_only"}], replications=2)
    out = acceptance_sweep(cfg, seed=42)
    for rate in (1.0, 0.5):
        assert out.row("oracle", rate).param_l2 == pytest.approx(0.0, abs=1e-12)
    assert out.row("financed_only", 1.0).param_l2 == pytest.approx(0.0, abs=1e-8)


def test_leakage_is_detected():
    a = Dataset.fully_labeled(np.arange(4.0), [0, 1, 0, 1], ids=["a", "b", "c", "d"])
    b = Dataset.fully_labeled(np.arange(2.0), [0, 1], ids=["x", "c"])
    with pytest.raises(LeakageError) as err:
        check_leakage(a, b)
    assert err.value.ids == ["c"]


@pytest.mark.parametrize(
    "update",
    [
        {"rates": [0.5, 0.8]},
        {"rates": [1.0, 1.0]},
        {"rates": [1.2]},
        {"rates": []},
        {"methods": []},
        {"methods": [{"name": "parceling"}, {"name": "parceling"}]},
        {"mechanism": {"kind": "MAR_cutoff"}, "methods": [{"name": "ideal_reweighting"}]},
        {"mechanism": {"kind": "MNAR", "floor": 0.2}, "rates": [1.0, 0.2]},
        {"bootstrap": 100},
        {"csv": {"path": "x.csv", "schema_path": "s.json"}},
    ],
)
def test_invalid_sweep_configs(update):
    with pytest.raises(ValidationError):
        small_config(**update)


def test_labels_tell_methods_apart():
    cfg = small_config(methods=[{"name": "parceling"}, {"name": "parceling", "label": "parceling_2x", "inflation": 2.0}])
    assert [m.key for m in cfg.methods] == ["parceling", "parceling_2x"]


def test_real_data_sweep_uses_financed_records():
    csv = CsvSource(path=DATA / "toy_applicants.csv", schema_path=DATA / "toy_schema.json", holdout_fraction=0.3)
    cfg = SweepConfig(
        csv=csv,
        mechanism={"kind": "MAR_stochastic", "pilot_fraction": 0.2},
        methods=[{"name": "financed_only"}, {"name": "augmentation", "k_bands": 5}],
        rates=[1.0, 0.6],
        bootstrap=200,
    )
    out = acceptance_sweep(cfg, seed=99)
    assert out.real_data
    assert len(out.rows) == 4
    assert out.row("augmentation", 1.0).gini == pytest.approx(out.row("financed_only", 1.0).gini, abs=1e-6)
