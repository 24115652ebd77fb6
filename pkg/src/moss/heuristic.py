"""Coordinate descent on the penalized problem

    min_w 1/2 (||y - M w||^2 + ||w||^2 / gamma)
          + sum_i 1(w_i != 0) (lambda1 - pi_i lambda2)

Each coordinate has a closed-form minimizer: the ridge value
``M_k'r / (M_k'M_k + 1/gamma)`` if its gain beats the penalty, else 0.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .data import PredictionMatrix, Solution
from .errors import ConfigError
from .objective import fit_weights, h1, ridge_kernel

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CDConfig:
    lambda1: float = 0.0
    lambda2: float = 0.0
    gamma: float = 1e-3
    max_sweeps: int = 1000
    tol: float = 1e-8

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ConfigError("lambda1 and lambda2 must be non-negative")
        if not self.gamma > 0:
            raise ConfigError("gamma must be positive")


def _update(corr: float, norm2: float, penalty: float, gamma: float) -> float:
    if corr == 0.0:
        return 0.0
    denom = norm2 + 1.0 / gamma
    gain = 0.5 * corr * corr / denom
    # ties go to zero
    return corr / denom if gain > penalty else 0.0


def cd_update(r_k, m_k, pi_k: float, cfg: CDConfig) -> float:
    """Best ``w_k`` given the residual that excludes coordinate ``k``."""
    r_k = np.asarray(r_k, dtype=float)
    m_k = np.asarray(m_k, dtype=float)
    return _update(float(m_k @ r_k), float(m_k @ m_k), cfg.lambda1 - pi_k * cfg.lambda2, cfg.gamma)


def penalized_objective(w, pm: PredictionMatrix, y, pi, cfg: CDConfig) -> float:
    r = y - pm.matrix @ w
    nz = w != 0
    return (0.5 * (float(r @ r) + float(w @ w) / cfg.gamma)
            + float(np.sum((cfg.lambda1 - pi[nz] * cfg.lambda2))))


def solve_cd(pm: PredictionMatrix, y, pi, cfg: CDConfig, *, w0=None, trace: bool = False) -> Solution:
    """Cyclic coordinate descent in ascending index order.

    Stops after a sweep that changes no support membership and moves no
    coordinate by more than ``tol``; the final support is refit with plain
    ridge weights. ``meta`` carries the raw CD weights, the sweep count and
    a ``converged`` flag (False when ``max_sweeps`` ran out).
    """
    y = np.asarray(y, dtype=float)
    pi = np.asarray(getattr(pi, "pi", pi), dtype=float)
    M = pm.matrix
    m = M.shape[1]
    norms = np.einsum("ij,ij->j", M, M)
    penalty = cfg.lambda1 - pi * cfg.lambda2
    w = np.zeros(m) if w0 is None else np.array(w0, dtype=float)
    r = y - M @ w
    objs = [penalized_objective(w, pm, y, pi, cfg)] if trace else None
    converged = False
    sweeps = 0
    for sweeps in range(1, cfg.max_sweeps + 1):
        max_delta, flipped = 0.0, False
        for j in range(m):
            col = M[:, j]
            old = w[j]
            corr = float(col @ r) + norms[j] * old
            new = _update(corr, norms[j], penalty[j], cfg.gamma)
            if new != old:
                r -= (new - old) * col
                w[j] = new
                max_delta = max(max_delta, abs(new - old))
                flipped |= (old == 0.0) != (new == 0.0)
                if trace:
                    objs.append(penalized_objective(w, pm, y, pi, cfg))
        # drift control for the incrementally maintained residual
        r = y - M @ w
        if not flipped and max_delta < cfg.tol:
            converged = True
            break
    if not converged:
        log.warning("coordinate descent hit max_sweeps=%d", cfg.max_sweeps)
    support = tuple(np.flatnonzero(w).tolist())
    kern = ridge_kernel(support, pm, y)
    wts, b0 = fit_weights(kern, pm)
    meta = {"cd_weights": w, "sweeps": sweeps, "converged": converged,
            "lambda1": cfg.lambda1, "lambda2": cfg.lambda2}
    if trace:
        meta["objective_trace"] = objs
    return Solution(support, wts, b0, h1(support, pi), kern.h2_value, 0.0, "cd", meta)


def lambda1_max(pm: PredictionMatrix, y, pi, gamma: float, lambda2: float) -> float:
    """Smallest lambda1 at which the all-zero start stays empty."""
    M = pm.matrix
    corr = M.T @ np.asarray(y, dtype=float)
    gain = 0.5 * corr ** 2 / (np.einsum("ij,ij->j", M, M) + 1.0 / gamma)
    return float(np.max(gain + np.asarray(pi) * lambda2))


def fit_target_k(pm: PredictionMatrix, y, pi, gamma: float, lambda2: float, k_target: int,
                 *, bisect_steps: int = 40, grid_size: int = 40, max_sweeps: int = 1000) -> Solution:
    """Tune lambda1 so coordinate descent returns at most ``k_target`` rules.

    Bisects for the smallest lambda1 whose support fits; support size need
    not be monotone in lambda1, so if bisection ends short of ``k_target``
    a log-spaced grid scan is tried as well. The largest admissible support
    wins (ties: lower H2). ``meta['achieved_size']`` records the outcome.
    """
    if k_target < 1:
        raise ConfigError("k_target must be at least 1")
    pi = np.asarray(getattr(pi, "pi", pi), dtype=float)
    hi = lambda1_max(pm, y, pi, gamma, lambda2)
    cache = {}

    def run(lam):
        if lam not in cache:
            cache[lam] = solve_cd(pm, y, pi, CDConfig(lam, lambda2, gamma, max_sweeps))
        return cache[lam]

    def better(a, b):
        if b is None:
            return True
        return (a.size, -a.h2) > (b.size, -b.h2)

    best = None
    for lam in (0.0, hi):
        s = run(lam)
        if s.size <= k_target and better(s, best):
            best = s
    lo, up = 0.0, hi
    if run(0.0).size > k_target:
        for _ in range(bisect_steps):
            mid = 0.5 * (lo + up)
            s = run(mid)
            if s.size <= k_target:
                up = mid
                if better(s, best):
                    best = s
                if s.size == k_target:
                    break
            else:
                lo = mid
    if best.size < k_target:
        log.info("bisection reached size %d < %d; scanning a lambda1 grid", best.size, k_target)
        for lam in np.geomspace(max(hi, 1e-300) * 1e-6, hi, grid_size):
            s = run(float(lam))
            if s.size <= k_target and better(s, best):
                best = s
    meta = dict(best.meta, achieved_size=best.size, k_target=k_target)
    return Solution(best.support, best.weights, best.intercept, best.h1, best.h2, 0.0, "cd", meta)
