"""Stability and ridge-loss objectives over a rule support.

For a support ``S`` with centred prediction columns ``M_S`` the ridge loss
is

    H2(S) = min_w 1/2 ||y - M_S w||^2 + 1/(2 gamma) ||w||^2
          = 1/2 y' (I + gamma M_S M_S')^{-1} y,

evaluated through the k x k system ``B = I/gamma + M_S' M_S`` rather than
the n x n one. The residual ``r = (I + gamma M_S M_S')^{-1} y = y - M_S w*``
gives the gradient in the relaxed indicator ``z``:

    dH2/dz_i = -(gamma / 2) (M_i' r)^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .data import PredictionMatrix
from .errors import CholeskyFailure, IndexOutOfRange


@dataclass(frozen=True)
class RidgeKernel:
    support: tuple[int, ...]
    chol: np.ndarray  # lower-triangular factor of B
    c: np.ndarray  # M_S' y
    coef: np.ndarray  # B^{-1} c, the ridge weights on the support
    residual: np.ndarray
    h2_value: float


def _check_support(support, m):
    support = tuple(sorted(int(i) for i in support))
    if support and (support[0] < 0 or support[-1] >= m):
        raise IndexOutOfRange(f"support {support} out of range for m={m}")
    return support


def h1(support, pi) -> float:
    pi = np.asarray(getattr(pi, "pi", pi), dtype=float)
    support = _check_support(support, len(pi))
    return float(pi[list(support)].sum()) if support else 0.0


def _cholesky(B):
    try:
        return np.linalg.cholesky(B)
    except np.linalg.LinAlgError:
        pass
    k = B.shape[0]
    jitter = 1e-10 * np.trace(B) / k
    try:
        return np.linalg.cholesky(B + jitter * np.eye(k))
    except np.linalg.LinAlgError:
        raise CholeskyFailure(f"ridge system of size {k} is not positive definite "
                              "even after jitter; check gamma") from None


def ridge_kernel(support, pm: PredictionMatrix, y) -> RidgeKernel:
    y = np.asarray(y, dtype=float)
    M = pm.matrix
    support = _check_support(support, M.shape[1])
    if not support:
        empty = np.zeros(0)
        return RidgeKernel((), np.zeros((0, 0)), empty, empty, y.copy(), 0.5 * float(y @ y))
    Ms = M[:, list(support)]
    B = Ms.T @ Ms
    B[np.diag_indices_from(B)] += 1.0 / pm.gamma
    L = _cholesky(B)
    c = Ms.T @ y
    coef = linalg.cho_solve((L, True), c)
    r = y - Ms @ coef
    # sum of non-negative terms; equals 1/2 (y'y - c'coef) without the cancellation
    value = 0.5 * (float(r @ r) + float(coef @ coef) / pm.gamma)
    return RidgeKernel(support, L, c, coef, r, value)


def h2(support, pm: PredictionMatrix, y) -> tuple[float, RidgeKernel]:
    kern = ridge_kernel(support, pm, y)
    return kern.h2_value, kern


def grad_h2(kernel: RidgeKernel, pm: PredictionMatrix) -> np.ndarray:
    g = pm.matrix.T @ kernel.residual
    return -0.5 * pm.gamma * g * g


def fit_weights(kernel: RidgeKernel, pm: PredictionMatrix, y=None) -> tuple[np.ndarray, float]:
    return kernel.coef.copy(), pm.target_mean


def relaxed_value_grad(z, pm: PredictionMatrix, y) -> tuple[float, np.ndarray]:
    """Relaxed H2 and its gradient at a fractional ``z`` in [0,1]^m.

    On the positive part ``S`` of ``z`` this is the perspective ridge problem
    ``min_w 1/2 ||y - M_S w||^2 + sum_i w_i^2 / (2 gamma z_i)``, so it costs
    one |S| x |S| Cholesky like the integer case.
    """
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    M = pm.matrix
    S = np.flatnonzero(z > 0)
    if S.size == 0:
        r = y
        value = 0.5 * float(y @ y)
    else:
        Ms = M[:, S]
        B = Ms.T @ Ms
        B[np.diag_indices_from(B)] += 1.0 / (pm.gamma * z[S])
        coef = linalg.cho_solve((_cholesky(B), True), Ms.T @ y)
        r = y - Ms @ coef
        value = 0.5 * (float(r @ r) + float(np.sum(coef * coef / z[S])) / pm.gamma)
    g = M.T @ r
    return value, -0.5 * pm.gamma * g * g


def h2_relaxed(z, pm: PredictionMatrix, y) -> float:
    """H2 at a fractional ``z`` in [0,1]^m via the dense n x n form.

    O(n^3); meant for checks, not for the solver.
    """
    z = np.asarray(z, dtype=float)
    M = pm.matrix
    A = np.eye(M.shape[0]) + pm.gamma * (M * z) @ M.T
    return 0.5 * float(y @ np.linalg.solve(A, y))


def ridge_loss(w, cols: np.ndarray, y, gamma: float) -> float:
    r = y - cols @ w
    return 0.5 * float(r @ r) + 0.5 * float(w @ w) / gamma
