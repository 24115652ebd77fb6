import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from moss.data import PredictionMatrix
from moss.errors import IndexOutOfRange
from moss.objective import fit_weights, grad_h2, h1, h2, h2_relaxed, relaxed_value_grad, ridge_loss

from oracles import random_instance, ridge_min


def _tiny(gamma=1.0):
    return PredictionMatrix(np.array([[1.0], [0.0]]), np.zeros(1), 0.0, gamma), np.array([1.0, 1.0])


def test_h1_examples():
    pi = np.array([0.2, 0.9, 0.5])
    assert h1((), pi) == 0.0
    assert h1((1,), pi) == 0.9
    assert h1((1, 2), pi) == pytest.approx(1.4)
    with pytest.raises(IndexOutOfRange):
        h1((3,), pi)


def test_h2_hand_examples():
    pm, y = _tiny()
    assert h2((), pm, y)[0] == 1.0
    val, kern = h2((0,), pm, y)
    assert val == pytest.approx(0.75, abs=1e-15)
    np.testing.assert_allclose(fit_weights(kern, pm)[0], [0.5])
    g = grad_h2(h2((), pm, y)[1], pm)
    assert g[0] == pytest.approx(-0.5)
    assert val >= 1.0 + g[0]


def test_h2_matches_dense_oracle_random():
    rng = np.random.default_rng(11)
    pi, pm, y = random_instance(rng, 30, 12, 0.1)
    S = (0, 3, 5, 8, 11)
    val, kern = h2(S, pm, y)
    ref, w = ridge_min(pm.matrix[:, list(S)], y, pm.gamma)
    assert val == pytest.approx(ref, rel=1e-8)
    np.testing.assert_allclose(fit_weights(kern, pm)[0], w, rtol=1e-8, atol=1e-10)
    assert ridge_loss(kern.coef, pm.matrix[:, list(S)], y, pm.gamma) == pytest.approx(val, rel=1e-8)
    # the two algebraic forms of the kernel value agree
    assert val == pytest.approx(0.5 * (y @ y - kern.c @ kern.coef), rel=1e-8)
    assert val == pytest.approx(0.5 * y @ kern.residual, rel=1e-8)


def test_empty_support_weights_and_intercept():
    pm, y = _tiny()
    pm = PredictionMatrix(pm.matrix, pm.column_means, 4.0, 1.0)
    w, b0 = fit_weights(h2((), pm, y)[1], pm)
    assert w.size == 0 and b0 == 4.0


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([1e-4, 1e-3, 1e-2, 1e-1, 1.0]))
def test_gradient_sign_monotonicity_and_cut_validity(seed, gamma):
    rng = np.random.default_rng(seed)
    pi, pm, y = random_instance(rng, 20, 8, gamma)
    za = tuple(np.flatnonzero(rng.random(8) < 0.4).tolist())
    zb = tuple(np.flatnonzero(rng.random(8) < 0.4).tolist())
    va, ka = h2(za, pm, y)
    vb, _ = h2(zb, pm, y)
    g = grad_h2(ka, pm)
    assert np.all(g <= 0)
    assert np.all(g[list(za)] <= 0)
    diff = np.zeros(8)
    diff[list(zb)] += 1
    diff[list(za)] -= 1
    assert vb >= va + g @ diff - 1e-9 * (1 + abs(va))
    # adding an index never increases H2
    extra = sorted(set(za) | {int(rng.integers(8))})
    assert h2(extra, pm, y)[0] <= va + 1e-12 * (1 + va)
    assert va > 0


def test_gradient_zero_exactly_when_orthogonal():
    M = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    y = np.array([1.0, -1.0, 0.0, 0.0])
    pm = PredictionMatrix(M, np.zeros(2), 0.0, 1.0)
    g = grad_h2(h2((), pm, y)[1], pm)
    assert g[1] == 0.0 and g[0] < 0


def test_relaxed_value_matches_dense_form():
    rng = np.random.default_rng(3)
    pi, pm, y = random_instance(rng, 25, 9, 0.05)
    for _ in range(10):
        z = rng.random(9) * (rng.random(9) < 0.7)
        v, g = relaxed_value_grad(z, pm, y)
        assert v == pytest.approx(h2_relaxed(z, pm, y), rel=1e-9)
    # integer points agree with the support form
    S = (1, 4, 6)
    z = np.zeros(9)
    z[list(S)] = 1
    assert relaxed_value_grad(z, pm, y)[0] == pytest.approx(h2(S, pm, y)[0], rel=1e-12)
    np.testing.assert_allclose(relaxed_value_grad(z, pm, y)[1], grad_h2(h2(S, pm, y)[1], pm), rtol=1e-9)
