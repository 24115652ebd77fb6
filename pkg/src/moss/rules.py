"""Candidate rule generation from a randomized forest of shallow CART trees.

Thresholds are restricted to a per-feature quantile grid so that the same
rule recurs across bootstrap resamples; the selection proportion of a rule
is the fraction of trees in which it appears.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .data import CandidatePool, Dataset, DecisionRule, Direction, Split, canonicalize
from .errors import ConfigError, DegenerateData, EmptyPool

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 500
    max_depth: int = 2
    mtry: int | None = None  # None -> ceil(p / 3)
    min_leaf: int = 5
    n_quantiles: int = 10
    max_rules: int = 1000
    response_noise_sigma: float = 0.0
    seed: int = 0
    interior_rules: bool = True
    n_jobs: int = 1

    def __post_init__(self):
        if self.n_trees < 1:
            raise ConfigError("n_trees must be positive")
        if not 1 <= self.max_depth <= 3:
            raise ConfigError("max_depth must be in [1, 3]")
        if self.mtry is not None and self.mtry < 1:
            raise ConfigError("mtry must be positive")
        if self.min_leaf < 1:
            raise ConfigError("min_leaf must be positive")
        if self.n_quantiles < 2:
            raise ConfigError("n_quantiles must be at least 2")
        if self.max_rules < 1:
            raise ConfigError("max_rules must be positive")
        if self.response_noise_sigma < 0:
            raise ConfigError("response_noise_sigma must be non-negative")

    def resolved_mtry(self, p: int) -> int:
        mtry = self.mtry if self.mtry is not None else math.ceil(p / 3)
        if mtry > p:
            raise ConfigError(f"mtry={mtry} exceeds p={p}")
        return mtry


def compute_quantile_grid(X: np.ndarray, q: int) -> list[np.ndarray]:
    """Per-feature thresholds at the ceil(i*n/q)-th order statistics, i=1..q-1.

    Thresholds equal to the column maximum cannot split anything and are
    dropped, so a constant feature gets an empty grid.
    """
    if q < 2:
        raise ConfigError("q must be at least 2")
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    ranks = np.array([math.ceil(i * n / q) for i in range(1, q)]) - 1
    ranks = np.clip(ranks, 0, n - 1)
    grid = []
    for j in range(X.shape[1]):
        col = np.sort(X[:, j])
        t = np.unique(col[ranks])
        grid.append(t[t < col[-1]])
    return grid


@dataclass(frozen=True)
class TreeNode:
    path: tuple[Split, ...]  # splits from the root, in tree order
    value: float
    n_samples: int


@dataclass(frozen=True)
class Tree:
    nodes: tuple[TreeNode, ...]  # pre-order, root first
    bootstrap: np.ndarray

    def paths(self, leaves_only: bool = False) -> list[tuple[Split, ...]]:
        if not leaves_only:
            return [nd.path for nd in self.nodes[1:]]
        inner = {nd.path[:-1] for nd in self.nodes[1:]}
        return [nd.path for nd in self.nodes[1:] if nd.path not in inner]


def _best_split(X, y, features, grid, min_leaf):
    n = len(y)
    total = y.sum()
    base = total * total / n
    best = (0.0, None, None)
    for j in features:
        thresholds = grid[j]
        if len(thresholds) == 0:
            continue
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        csum = np.cumsum(y[order])
        n_left = np.searchsorted(xs, thresholds, side="right")
        ok = (n_left >= min_leaf) & (n - n_left >= min_leaf)
        if not ok.any():
            continue
        nl = n_left[ok]
        sl = csum[nl - 1]
        sr = total - sl
        gain = sl * sl / nl + sr * sr / (n - nl) - base
        i = int(np.argmax(gain))
        # relative slack keeps float noise from registering as a split
        if gain[i] > best[0] + 1e-12 * (abs(base) + 1.0):
            best = (float(gain[i]), int(j), float(thresholds[ok][i]))
    return best


def _grow_tree(X, y, grid, cfg: ForestConfig, mtry: int, rng: np.random.Generator, boot: np.ndarray) -> Tree:
    p = X.shape[1]
    nodes = []

    def grow(rows, path):
        ys = y[rows]
        nodes.append(TreeNode(tuple(path), float(ys.mean()), len(rows)))
        if len(path) >= cfg.max_depth or len(rows) < 2 * cfg.min_leaf:
            return
        features = np.sort(rng.choice(p, size=mtry, replace=False))
        gain, j, t = _best_split(X[rows], ys, features, grid, cfg.min_leaf)
        if j is None:
            return
        left = X[rows, j] <= t
        grow(rows[left], path + [Split(j, t, Direction.LE)])
        grow(rows[~left], path + [Split(j, t, Direction.GT)])

    grow(np.arange(len(y)), [])
    return Tree(tuple(nodes), boot)


def _fit_one(data: Dataset, grid, cfg: ForestConfig, mtry: int, y_sd: float, tree_index: int) -> Tree:
    rng = np.random.default_rng([cfg.seed & 0xFFFFFFFFFFFFFFFF, tree_index])
    n = data.n
    boot = rng.integers(0, n, size=n)
    Xb = data.features[boot]
    yb = data.target[boot]
    if cfg.response_noise_sigma > 0:
        yb = yb + rng.normal(0.0, cfg.response_noise_sigma * y_sd, size=n)
    return _grow_tree(Xb, yb, grid, cfg, mtry, rng, boot)


def fit_forest(data: Dataset, cfg: ForestConfig, grid=None) -> list[Tree]:
    """Fit ``cfg.n_trees`` depth-limited CART trees on bootstrap resamples.

    Tree ``t`` draws from its own stream seeded by ``(seed, t)``, so the
    forest is identical whatever ``n_jobs`` is.
    """
    if np.ptp(data.target) == 0:
        raise DegenerateData("target is constant; no split can reduce variance")
    mtry = cfg.resolved_mtry(data.p)
    if grid is None:
        grid = compute_quantile_grid(data.features, cfg.n_quantiles)
    y_sd = float(data.target.std())
    fit = lambda t: _fit_one(data, grid, cfg, mtry, y_sd, t)  # noqa: E731
    if cfg.n_jobs > 1:
        with ThreadPoolExecutor(cfg.n_jobs) as ex:
            return list(ex.map(fit, range(cfg.n_trees)))
    return [fit(t) for t in range(cfg.n_trees)]


def simplify_path(path) -> tuple[Split, ...]:
    """Keep only the tightest split per (feature, direction) along a path.

    A single ``x > t`` split is rewritten as ``x <= t``: with an inside and
    an outside value both describe the same two-valued predictor.
    """
    tight = {}
    for s in path:
        key = (s.feature, s.direction)
        if key not in tight:
            tight[key] = s
        elif s.direction is Direction.LE:
            tight[key] = min(tight[key], s, key=lambda u: u.threshold)
        else:
            tight[key] = max(tight[key], s, key=lambda u: u.threshold)
    if len(tight) == 1:
        (s,) = tight.values()
        return (Split(s.feature, s.threshold, Direction.LE),)
    return canonicalize(tight.values())


def extract_pool(forest: list[Tree], data: Dataset, cfg: ForestConfig) -> CandidatePool:
    if not forest:
        raise EmptyPool("forest is empty")
    counts: dict[tuple[Split, ...], int] = {}
    for tree in forest:
        seen = {simplify_path(p) for p in tree.paths(leaves_only=not cfg.interior_rules)}
        for key in seen:
            counts[key] = counts.get(key, 0) + 1

    B = len(forest)
    X, y = data.features, data.target
    rules, pis = [], []
    for splits, c in counts.items():
        rule = DecisionRule(splits)
        inside = rule.contains(X)
        n_in = int(inside.sum())
        if n_in == 0 or n_in == data.n:
            continue
        rules.append(DecisionRule(splits, y[inside].mean(), y[~inside].mean()))
        pis.append(c / B)
    if not rules:
        raise EmptyPool("no rule splits the training data")

    order = sorted(range(len(rules)), key=lambda i: (-pis[i], rules[i].key))
    order = order[: cfg.max_rules]
    meta = {k: v for k, v in asdict(cfg).items() if k != "n_jobs"}
    meta.update(n_trees=B, n_unique=len(rules))
    log.info("extracted %d unique rules from %d trees, kept %d", len(rules), B, len(order))
    return CandidatePool(tuple(rules[i] for i in order), np.array([pis[i] for i in order]), meta)


def generate_pool(data: Dataset, cfg: ForestConfig) -> CandidatePool:
    grid = compute_quantile_grid(data.features, cfg.n_quantiles)
    return extract_pool(fit_forest(data, cfg, grid), data, cfg)
