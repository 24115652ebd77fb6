import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from moss.data import PredictionMatrix
from moss.errors import ConfigError
from moss.heuristic import (CDConfig, _update, cd_update, fit_target_k, lambda1_max, penalized_objective,
                            solve_cd)

from oracles import random_instance, ridge_min


def test_cd_update_examples():
    r, col = np.array([2.0, 0.0]), np.array([1.0, 0.0])
    assert cd_update(r, col, 0.0, CDConfig(lambda1=0.5, gamma=1.0)) == 1.0
    assert cd_update(r, col, 0.0, CDConfig(lambda1=1.0, gamma=1.0)) == 0.0  # tie goes to zero
    assert cd_update(np.array([0.0, 1.0]), col, 0.0, CDConfig(lambda1=0.0, gamma=1.0)) == 0.0
    # a negative effective penalty still needs a non-zero update to claim it
    assert cd_update(np.array([0.0, 1.0]), col, 0.9, CDConfig(lambda1=0.0, lambda2=1.0, gamma=1.0)) == 0.0


def test_config_validation():
    with pytest.raises(ConfigError):
        CDConfig(lambda1=-1.0)
    with pytest.raises(ConfigError):
        CDConfig(gamma=0.0)


def test_huge_lambda1_gives_empty_model():
    rng = np.random.default_rng(0)
    pi, pm, y = random_instance(rng, 30, 10, 0.1)
    s = solve_cd(pm, y, pi, CDConfig(lambda1=1e12, gamma=0.1))
    assert s.support == () and s.h2 == pytest.approx(0.5 * y @ y)
    assert lambda1_max(pm, y, pi, 0.1, 0.0) > 0
    at_max = solve_cd(pm, y, pi, CDConfig(lambda1=lambda1_max(pm, y, pi, 0.1, 0.0), gamma=0.1))
    assert at_max.support == ()


def test_penalty_free_matches_full_ridge():
    rng = np.random.default_rng(1)
    pi, pm, y = random_instance(rng, 30, 10, 0.1)
    s = solve_cd(pm, y, pi, CDConfig(gamma=0.1, tol=1e-12, max_sweeps=20000))
    _, w = ridge_min(pm.matrix, y, 0.1)
    np.testing.assert_allclose(s.meta["cd_weights"], w, atol=1e-6)
    assert s.meta["converged"]


def _fixed_point(pm, y, pi, cfg, w):
    M = pm.matrix
    for j in range(M.shape[1]):
        r_j = y - M @ w + M[:, j] * w[j]
        if abs(cd_update(r_j, M[:, j], pi[j], cfg) - w[j]) > cfg.tol:
            return False
    return True


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.0, 3.0), st.floats(0.0, 3.0))
def test_fixed_point_and_monotone_trace(seed, l1, l2):
    rng = np.random.default_rng(seed)
    pi, pm, y = random_instance(rng, 30, 10, 0.1)
    cfg = CDConfig(lambda1=l1, lambda2=l2, gamma=0.1)
    s = solve_cd(pm, y, pi, cfg, trace=True)
    assert s.meta["converged"]
    w = s.meta["cd_weights"]
    assert _fixed_point(pm, y, pi, cfg, w)
    trace = np.array(s.meta["objective_trace"])
    assert np.all(np.diff(trace) <= 1e-12 * (1 + np.abs(trace[:-1])))
    assert trace[-1] == pytest.approx(penalized_objective(w, pm, y, pi, cfg))
    # returned weights are the ridge refit on the chosen support
    assert s.h2 == pytest.approx(ridge_min(pm.matrix[:, list(s.support)], y, 0.1)[0], rel=1e-8)


def test_sweep_limit_is_flagged():
    rng = np.random.default_rng(2)
    pi, pm, y = random_instance(rng, 30, 10, 10.0)
    s = solve_cd(pm, y, pi, CDConfig(gamma=10.0, max_sweeps=1, tol=1e-15))
    assert s.meta["converged"] is False and s.meta["sweeps"] == 1


def test_fit_target_k():
    rng = np.random.default_rng(3)
    pi, pm, y = random_instance(rng, 40, 12, 0.1)
    full = fit_target_k(pm, y, pi, 0.1, 0.0, 12)
    assert full.size == 12 and full.method == "cd"
    for k in (1, 3, 5):
        s = fit_target_k(pm, y, pi, 0.1, 0.5, k)
        assert s.size <= k and s.meta["achieved_size"] == s.size and s.meta["k_target"] == k
    with pytest.raises(ConfigError):
        fit_target_k(pm, y, pi, 0.1, 0.0, 0)


def test_support_size_in_lambda1_is_mostly_monotone():
    # not guaranteed for an l0 penalty; only record that a sweep runs and stays within bounds
    rng = np.random.default_rng(4)
    pi, pm, y = random_instance(rng, 40, 12, 0.1)
    hi = lambda1_max(pm, y, pi, 0.1, 0.0)
    sizes = [solve_cd(pm, y, pi, CDConfig(lam, 0.0, 0.1)).size for lam in np.linspace(0, hi, 15)]
    assert sizes[0] >= sizes[-1] == 0


def test_update_gain_rule():
    assert _update(2.0, 1.0, 0.0, 1.0) == 1.0
    assert _update(0.0, 1.0, -5.0, 1.0) == 0.0
    M = PredictionMatrix(np.eye(3), np.zeros(3), 0.0, 1.0)
    s = solve_cd(M, np.array([2.0, 0.0, 0.0]), np.zeros(3), CDConfig(lambda1=0.5, gamma=1.0))
    assert s.support == (0,)
