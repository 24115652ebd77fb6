import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from moss.data import (CandidatePool, Dataset, DecisionRule, Direction, PredictionMatrix, RuleModel, Solution,
                       Split, build_prediction_matrix, canonicalize, load_dataset, read_csv, rule_predict)
from moss.errors import (ContradictorySplits, DataError, DimensionMismatch, EmptySplitList,
                         GammaNotPositive)

LE, GT = Direction.LE, Direction.GT


def test_canonicalize_orders_by_feature():
    out = canonicalize([Split(2, 0.5, LE), Split(0, 1.0, GT)])
    assert out == (Split(0, 1.0, GT), Split(2, 0.5, LE))


def test_canonicalize_single_split_is_identity():
    assert canonicalize([Split(0, 0.5, LE)]) == (Split(0, 0.5, LE),)


def test_canonicalize_drops_duplicates():
    assert canonicalize([Split(1, 2.0, GT), Split(1, 2.0, GT)]) == (Split(1, 2.0, GT),)


def test_canonicalize_errors():
    with pytest.raises(ContradictorySplits):
        canonicalize([Split(1, 2.0, GT), Split(1, 2.0, LE)])
    with pytest.raises(EmptySplitList):
        canonicalize([])


def test_le_sorts_before_gt():
    assert canonicalize([Split(0, 1.0, GT), Split(0, 0.5, LE)])[0].direction is LE
    assert canonicalize([Split(0, 1.0, GT), Split(0, 1.0, GT), Split(0, 2.0, LE)]) == (
        Split(0, 1.0, GT), Split(0, 2.0, LE))


splits = st.builds(Split, st.integers(0, 3), st.sampled_from([0.5, 1.0, 2.0]), st.sampled_from([LE, GT]))


@settings(max_examples=200, deadline=None)
@given(st.lists(splits, min_size=1, max_size=4), st.randoms())
def test_canonicalize_idempotent_and_order_free(ss, rnd):
    try:
        c = canonicalize(ss)
    except ContradictorySplits:
        return
    assert canonicalize(c) == c
    shuffled = list(ss)
    rnd.shuffle(shuffled)
    assert DecisionRule(shuffled, 1.0, 2.0) == DecisionRule(ss, 5.0, 6.0)
    assert hash(DecisionRule(shuffled)) == hash(DecisionRule(ss))


def test_rule_predict_examples():
    r = DecisionRule([Split(0, 2.0, LE)], 3.0, 1.0)
    assert rule_predict(r, [1.5]) == 3.0
    assert rule_predict(r, [2.5]) == 1.0
    assert rule_predict(r, [2.0]) == 3.0  # equality belongs to the LE side
    r2 = DecisionRule([Split(0, 2.0, LE), Split(1, 5.0, GT)], 4.0, 0.5)
    assert rule_predict(r2, [1.0, 5.0]) == 0.5


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=2, max_size=2))
def test_rule_predict_two_valued(x):
    r = DecisionRule([Split(0, 0.0, LE), Split(1, 1.0, GT)], 7.0, -3.0)
    assert rule_predict(r, x) in (7.0, -3.0)
    assert r.predict(np.array([x]))[0] == rule_predict(r, x)


def _two_row():
    data = Dataset(np.array([[0.0], [1.0]]), np.array([3.0, 1.0]), ("a",))
    rule = DecisionRule([Split(0, 0.5, LE)]).with_means(data.features, data.target)
    return data, CandidatePool((rule,), np.array([1.0]))


def test_prediction_matrix_two_row_example():
    data, pool = _two_row()
    pm = build_prediction_matrix(pool, data, 1.0)
    np.testing.assert_array_equal(pm.matrix[:, 0], [1.0, -1.0])
    assert pm.column_means[0] == 2.0 and pm.target_mean == 2.0


def test_prediction_matrix_constant_column_and_errors():
    data, _ = _two_row()
    always = DecisionRule([Split(0, 5.0, LE)], 2.0, 0.0)
    pool = CandidatePool((always,), np.array([0.5]))
    pm = build_prediction_matrix(pool, data, 1.0)
    np.testing.assert_array_equal(pm.matrix[:, 0], [0.0, 0.0])
    with pytest.raises(GammaNotPositive):
        build_prediction_matrix(pool, data, 0.0)
    far = CandidatePool((DecisionRule([Split(3, 0.0, LE)], 1, 0),), np.array([0.5]))
    with pytest.raises(DimensionMismatch):
        build_prediction_matrix(far, data, 1.0)


def test_prediction_matrix_columns_centred():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(300, 3)) * 1e4 + 1e6
    y = rng.normal(size=300)
    rules = [DecisionRule([Split(j, float(np.quantile(X[:, j], q)), LE)]).with_means(X, y)
             for j in range(3) for q in (0.1, 0.5, 0.9)]
    pm = build_prediction_matrix(CandidatePool(tuple(rules), np.full(9, 0.5)), Dataset(X, y, ()), 1e-3)
    assert np.abs(pm.matrix.mean(axis=0)).max() <= 1e-9


def test_dataset_validation():
    with pytest.raises(DimensionMismatch):
        Dataset(np.zeros((3, 2)), np.zeros(2), ())
    with pytest.raises(DataError):
        Dataset(np.zeros((1, 2)), np.zeros(1), ())
    with pytest.raises(DataError):
        Dataset(np.array([[np.nan], [1.0]]), np.zeros(2), ())
    assert Dataset(np.zeros((2, 2)), np.zeros(2), ()).feature_names == ("x0", "x1")


def test_read_csv_reports_row_and_column(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a,b,y\n1,2,3\n4,oops,6\n")
    with pytest.raises(DataError) as e:
        read_csv(p, "y")
    assert e.value.info == {"row": 3, "column": "b"}
    p.write_text("a,y\n1,2\n3,4\n")
    d = load_dataset(p, "y")
    assert d.feature_names == ("a",) and list(d.target) == [2.0, 4.0]
    with pytest.raises(DataError):
        load_dataset(p, "missing")


def test_pool_invariants():
    r = DecisionRule([Split(0, 1.0, LE)])
    with pytest.raises(ValueError):
        CandidatePool((r, DecisionRule([Split(0, 1.0, LE)], 9, 9)), np.array([0.5, 0.4]))
    with pytest.raises(ValueError):
        CandidatePool((r,), np.array([0.0]))
    pool = CandidatePool((r,), np.array([0.3]), {"seed": 1})
    assert CandidatePool.from_dict(pool.to_dict()) == pool


def test_rule_and_model_json_round_trip():
    r = DecisionRule([Split(1, 0.1 + 0.2, GT), Split(0, -1.5, LE)], 1 / 3, 2 / 7)
    back = DecisionRule.from_dict(r.to_dict())
    assert back == r and back.mu_in == r.mu_in and back.mu_out == r.mu_out
    assert r.to_dict()["splits"][0] == {"feature": 0, "op": "le", "threshold": -1.5}
    model = RuleModel((r,), np.array([0.7]), np.array([0.2]), 1.25, ("a", "b"))
    X = np.random.default_rng(1).normal(size=(20, 2))
    again = RuleModel.from_dict(model.to_dict())
    np.testing.assert_array_equal(again.predict(X), model.predict(X))


def test_solution_invariants():
    with pytest.raises(ValueError):
        Solution((2, 1), np.zeros(2), 0.0, 0.0, 0.0)
    with pytest.raises(DimensionMismatch):
        Solution((1,), np.zeros(2), 0.0, 0.0, 0.0)
    s = Solution((1, 3), np.ones(2), 0.0, 1.0, 2.0)
    np.testing.assert_array_equal(s.indicator(4), [0, 1, 0, 1])


def test_prediction_matrix_direct_construction():
    pm = PredictionMatrix(np.zeros((4, 2)), np.zeros(2), 1.5, 0.1)
    assert (pm.n, pm.m) == (4, 2)
    np.testing.assert_array_equal(pm.center([1.5, 2.5]), [0.0, 1.0])
