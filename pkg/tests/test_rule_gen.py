import numpy as np
import pytest

from moss.data import Dataset, Direction, Split
from moss.errors import ConfigError, DegenerateData, EmptyPool
from moss.instances import step_sine
from moss.rules import (ForestConfig, Tree, TreeNode, compute_quantile_grid, extract_pool, fit_forest,
                        generate_pool, simplify_path)

LE, GT = Direction.LE, Direction.GT


def test_quantile_grid_examples():
    X = np.column_stack([np.arange(1.0, 11.0), np.full(10, 3.0)])
    g = compute_quantile_grid(X, 10)
    np.testing.assert_array_equal(g[0], np.arange(1.0, 10.0))
    assert g[1].size == 0
    np.testing.assert_array_equal(compute_quantile_grid(np.array([[1.0], [2], [3], [4]]), 2)[0], [2.0])
    with pytest.raises(ConfigError):
        compute_quantile_grid(X, 1)


def test_forest_config_validation():
    for bad in (dict(n_trees=0), dict(max_depth=4), dict(mtry=0), dict(min_leaf=0), dict(n_quantiles=1),
                dict(max_rules=0), dict(response_noise_sigma=-1.0)):
        with pytest.raises(ConfigError):
            ForestConfig(**bad)
    with pytest.raises(ConfigError):
        ForestConfig(mtry=5).resolved_mtry(3)
    assert ForestConfig().resolved_mtry(4) == 2


@pytest.fixture(scope="module")
def data():
    return step_sine(150, 4, seed=2)


def test_forest_deterministic_and_thread_independent(data):
    cfg = ForestConfig(n_trees=40, seed=9)
    a = generate_pool(data, cfg)
    b = generate_pool(data, cfg)
    c = generate_pool(data, ForestConfig(n_trees=40, seed=9, n_jobs=4))
    assert a.to_dict() == b.to_dict() == c.to_dict()
    assert generate_pool(data, ForestConfig(n_trees=40, seed=10)).to_dict() != a.to_dict()


def test_bootstrap_draws(data):
    small = data.subset(np.arange(100))
    for t in fit_forest(small, ForestConfig(n_trees=10, seed=3)):
        assert t.bootstrap.shape == (100,)
        assert t.bootstrap.min() >= 0 and t.bootstrap.max() < 100


def test_depth_bound(data):
    pool = generate_pool(data, ForestConfig(n_trees=30, max_depth=1, seed=1))
    assert all(r.depth == 1 for r in pool.rules)
    pool3 = generate_pool(data, ForestConfig(n_trees=30, max_depth=3, seed=1))
    assert all(1 <= r.depth <= 3 for r in pool3.rules)


def test_pool_invariants(data):
    cfg = ForestConfig(n_trees=60, seed=4)
    pool = generate_pool(data, cfg)
    grid = compute_quantile_grid(data.features, cfg.n_quantiles)
    assert np.all(pool.pi > 0) and np.all(pool.pi <= 1)
    assert len({r.key for r in pool.rules}) == pool.m
    # sorted by pi descending, ties by canonical split order
    keys = [(-p, r.key) for p, r in zip(pool.pi, pool.rules)]
    assert keys == sorted(keys)
    for r in pool.rules:
        n_in = int(r.contains(data.features).sum())
        assert 1 <= n_in <= data.n - 1
        # means come from the original rows, not a bootstrap
        assert r.mu_in == pytest.approx(data.target[r.contains(data.features)].mean(), rel=1e-12)
        for s in r.splits:
            assert s.threshold in grid[s.feature]
    assert np.allclose(pool.pi * 60, np.round(pool.pi * 60))


def test_max_rules_truncates(data):
    full = generate_pool(data, ForestConfig(n_trees=30, seed=5))
    cut = generate_pool(data, ForestConfig(n_trees=30, seed=5, max_rules=7))
    assert cut.m == 7 and cut.rules == full.rules[:7]


def test_interior_rules_enlarge_pool(data):
    leaves = generate_pool(data, ForestConfig(n_trees=30, seed=6, interior_rules=False))
    every = generate_pool(data, ForestConfig(n_trees=30, seed=6))
    assert set(leaves.rules) <= set(every.rules) and every.m > leaves.m


def test_noise_option_changes_pool(data):
    a = generate_pool(data, ForestConfig(n_trees=30, seed=6))
    b = generate_pool(data, ForestConfig(n_trees=30, seed=6, response_noise_sigma=0.5))
    assert a.to_dict() != b.to_dict()


def _tree(*paths):
    nodes = [TreeNode((), 0.0, 10)] + [TreeNode(tuple(p), 0.0, 5) for p in paths]
    return Tree(tuple(nodes), np.arange(10))


def test_selection_proportion_counts_trees_not_occurrences():
    X = np.arange(10.0).reshape(-1, 1)
    data = Dataset(X, np.arange(10.0), ())
    left, right = [Split(0, 4.0, LE)], [Split(0, 4.0, GT)]
    deep = [Split(0, 4.0, LE), Split(0, 2.0, LE)]
    # rule {x <= 4} in trees 1, 3, 4 (twice in tree 3: the right child is its complement)
    forest = [_tree([Split(0, 6.0, LE)]), _tree(left), _tree([Split(0, 6.0, LE)]), _tree(left, right),
              _tree(right, deep)]
    pool = extract_pool(forest, data, ForestConfig(n_trees=5))
    pis = {r.key: p for r, p in zip(pool.rules, pool.pi)}
    assert pis[((0, 4.0, int(LE)),)] == pytest.approx(0.6)
    assert pis[((0, 6.0, int(LE)),)] == pytest.approx(0.4)
    assert pis[((0, 2.0, int(LE)),)] == pytest.approx(0.2)


def test_simplify_path():
    assert simplify_path([Split(0, 1.0, GT)]) == (Split(0, 1.0, LE),)
    assert simplify_path([Split(0, 4.0, LE), Split(0, 2.0, LE)]) == (Split(0, 2.0, LE),)
    assert simplify_path([Split(0, 4.0, LE), Split(1, 2.0, GT)]) == (Split(0, 4.0, LE), Split(1, 2.0, GT))


def test_errors():
    X = np.random.default_rng(0).normal(size=(20, 2))
    with pytest.raises(DegenerateData):
        fit_forest(Dataset(X, np.ones(20), ()), ForestConfig(n_trees=3))
    with pytest.raises(EmptyPool):
        generate_pool(Dataset(np.ones((20, 2)), np.arange(20.0), ()), ForestConfig(n_trees=3))
    with pytest.raises(EmptyPool):
        extract_pool([], Dataset(X, np.arange(20.0), ()), ForestConfig())
