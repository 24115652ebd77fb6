import json

import numpy as np
import pytest

from moss.data import Dataset
from moss.errors import ConfigError, ConstantTarget, DimensionMismatch, MossError
from moss.evaluation import (ExperimentConfig, fold_assignment, r_squared, run_cv, run_sensitivity,
                             stability_from_rule_sets)
from moss.instances import step_sine
from moss.rules import ForestConfig

SMALL = ForestConfig(n_trees=60, max_rules=60)


def test_r_squared_examples():
    y = np.array([0.0, 1.0, 2.0])
    assert r_squared(y, y) == 1.0
    assert r_squared(y, np.full(3, y.mean())) == 0.0
    assert r_squared(y, [0.0, 1.0, 1.0]) == pytest.approx(0.5)
    with pytest.raises(ConstantTarget):
        r_squared([1.0, 1.0], [1.0, 2.0])
    with pytest.raises(DimensionMismatch):
        r_squared([1.0, 2.0], [1.0])


@pytest.mark.parametrize("n,folds", [(10, 10), (23, 10), (100, 3), (7, 2)])
def test_fold_partition(n, folds):
    blocks = fold_assignment(n, folds, seed=3)
    assert len(blocks) == folds
    allrows = np.concatenate(blocks)
    assert sorted(allrows.tolist()) == list(range(n))
    sizes = [len(b) for b in blocks]
    assert max(sizes) - min(sizes) <= 1
    assert [b.tolist() for b in fold_assignment(n, folds, 3)] == [b.tolist() for b in blocks]


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig(folds=1)
    with pytest.raises(ConfigError):
        ExperimentConfig(methods=("moss_h", "lasso"))
    with pytest.raises(ConfigError):
        ExperimentConfig(gamma_grid=())
    with pytest.raises(ConfigError):
        fold_assignment(3, 5, 0)


@pytest.fixture(scope="module")
def data():
    return step_sine(120, 4, seed=5)


def test_topk_only_path(data):
    cfg = ExperimentConfig(folds=4, k=5, methods=("topk",), forest=SMALL)
    rep = run_cv(data, cfg)
    res = rep.methods["topk"]
    assert len(res.r2) == 4 and all(np.isfinite(res.r2))
    assert res.stability == pytest.approx(stability_from_rule_sets(res.rule_sets))
    assert 0.0 <= res.stability <= 1.0
    assert all(len(rs) == 5 for rs in res.rule_sets)
    assert "cuts" not in rep.fold_info[0]  # no optimizer invoked


def test_all_methods_deterministic_and_recomputable(data):
    cfg = ExperimentConfig(folds=3, k=4, forest=SMALL, eps_mid=6)
    a = run_cv(data, cfg)
    b = run_cv(data, cfg)
    assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())
    assert "seconds" not in json.dumps(a.to_dict()) and "seconds" in json.dumps(a.to_dict(timing=True))
    for name, res in a.methods.items():
        assert all(len(rs) <= 4 for rs in res.rule_sets)
        assert res.stability == stability_from_rule_sets(res.rule_sets)
        assert res.r2_se == pytest.approx(np.std(res.r2, ddof=1) / np.sqrt(3))
    # moss_h sits at a higher stability floor than moss_m on every fold
    for mh, mm in zip(a.methods["moss_h"].models, a.methods["moss_m"].models):
        assert mh["epsilon"] >= mm["epsilon"]
    row = a.csv_row("demo").split(",")
    assert row[0] == "demo" and len(row) == 9


def test_no_leakage_from_test_targets(data):
    cfg = ExperimentConfig(folds=3, k=4, forest=SMALL, methods=("topk", "moss_l"))
    blocks = fold_assignment(data.n, 3, cfg.seed)
    y = data.target.copy()
    test = blocks[0]
    y[test] = y[test][::-1] + 100.0
    a = run_cv(data, cfg)
    b = run_cv(Dataset(data.features, y, data.feature_names), cfg)
    for name in cfg.methods:
        assert a.methods[name].models[0] == b.methods[name].models[0]
        assert a.methods[name].r2[0] != b.methods[name].r2[0]


def test_sensitivity_product(data):
    cfg = ExperimentConfig(folds=2, k=3, methods=("topk",), forest=ForestConfig(n_trees=20, max_rules=30),
                           gamma_grid=(1e-4, 5e-4, 1e-3, 5e-3))
    reps = run_sensitivity(data, cfg)
    assert [r.config.gamma for r in reps] == [1e-4, 5e-4, 1e-3, 5e-3]
    assert all(r.config.k == 3 for r in reps)
    with pytest.raises(ConfigError):
        run_sensitivity(data, ExperimentConfig(folds=2, methods=("topk",)))


def test_errors_carry_fold_index():
    X = np.random.default_rng(0).normal(size=(40, 2))
    y = np.zeros(40)
    y[:2] = 1.0  # every training fold without rows 0-1 is constant
    with pytest.raises(MossError) as e:
        run_cv(Dataset(X, y, ()), ExperimentConfig(folds=20, k=2, methods=("topk",), forest=SMALL))
    assert "fold" in e.value.info
