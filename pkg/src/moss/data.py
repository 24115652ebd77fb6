"""Core value types: datasets, splits, rules, candidate pools, prediction
matrices, solutions and frontiers, plus their CSV/JSON plumbing."""

from __future__ import annotations

import csv
import enum
import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    ContradictorySplits,
    DataError,
    DimensionMismatch,
    EmptySplitList,
    GammaNotPositive,
)


class Direction(enum.IntEnum):
    # LE sorts before GT in canonical order
    LE = 0
    GT = 1

    @property
    def op(self) -> str:
        return "le" if self is Direction.LE else "gt"

    @classmethod
    def from_op(cls, op: str) -> "Direction":
        try:
            return {"le": cls.LE, "gt": cls.GT}[op.lower()]
        except KeyError:
            raise ValueError(f"unknown split op {op!r}") from None


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    target: np.ndarray
    feature_names: tuple[str, ...]

    def __post_init__(self):
        X = np.ascontiguousarray(self.features, dtype=float)
        y = np.ascontiguousarray(self.target, dtype=float).ravel()
        if X.ndim != 2:
            raise DimensionMismatch("features must be a 2-d matrix")
        n, p = X.shape
        if y.shape[0] != n:
            raise DimensionMismatch(f"target has {y.shape[0]} rows, features have {n}")
        if n < 2 or p < 1:
            raise DataError(f"need n >= 2 and p >= 1, got n={n}, p={p}")
        if not (np.isfinite(X).all() and np.isfinite(y).all()):
            raise DataError("features and target must be finite")
        names = tuple(self.feature_names) if self.feature_names else tuple(f"x{j}" for j in range(p))
        if len(names) != p:
            raise DimensionMismatch(f"{len(names)} feature names for {p} columns")
        X.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "target", y)
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(self.features[rows], self.target[rows], self.feature_names)


def read_csv(path, target: str | None = None) -> tuple[np.ndarray, list[str], np.ndarray | None]:
    """Parse a header-first numeric CSV.

    Returns ``(features, feature_names, target_or_None)``. Every non-target
    column must parse as a finite real; the first bad cell aborts with its
    row and column.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if target is not None and target not in header:
            raise DataError(f"{path}: target column {target!r} not in header {header}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: row {lineno} has {len(row)} fields, expected {len(header)}",
                                row=lineno)
            vals = []
            for col, cell in zip(header, row):
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(f"{path}: row {lineno}, column {col!r}: cannot parse {cell!r}",
                                    row=lineno, column=col) from None
                if not math.isfinite(v):
                    raise DataError(f"{path}: row {lineno}, column {col!r}: non-finite value {cell!r}",
                                    row=lineno, column=col)
                vals.append(v)
            rows.append(vals)
    table = np.array(rows, dtype=float).reshape(len(rows), len(header))
    if target is None:
        return table, header, None
    j = header.index(target)
    names = [h for i, h in enumerate(header) if i != j]
    return np.delete(table, j, axis=1), names, table[:, j]


def load_dataset(path, target: str) -> Dataset:
    X, names, y = read_csv(path, target)
    return Dataset(X, y, tuple(names))


@dataclass(frozen=True, order=True)
class Split:
    feature: int
    threshold: float
    direction: Direction

    def __post_init__(self):
        object.__setattr__(self, "feature", int(self.feature))
        object.__setattr__(self, "threshold", float(self.threshold))
        object.__setattr__(self, "direction", Direction(self.direction))

    def holds(self, X: np.ndarray) -> np.ndarray:
        col = X[..., self.feature]
        return col <= self.threshold if self.direction is Direction.LE else col > self.threshold

    def to_dict(self) -> dict:
        return {"feature": self.feature, "op": self.direction.op, "threshold": self.threshold}

    @classmethod
    def from_dict(cls, d) -> "Split":
        return cls(int(d["feature"]), float(d["threshold"]), Direction.from_op(d["op"]))

    def describe(self, names: Sequence[str] | None = None) -> str:
        name = names[self.feature] if names else f"x{self.feature}"
        sym = "<=" if self.direction is Direction.LE else ">"
        return f"{name} {sym} {self.threshold:g}"


def canonicalize(splits: Iterable[Split]) -> tuple[Split, ...]:
    """Sort splits by (feature, threshold, direction) and drop exact repeats."""
    uniq = sorted(set(splits))
    if not uniq:
        raise EmptySplitList("a rule needs at least one split")
    for a, b in zip(uniq, uniq[1:]):
        if a.feature == b.feature and a.threshold == b.threshold:
            # sorted + deduplicated, so equal (feature, threshold) means LE next to GT
            raise ContradictorySplits(f"split on feature {a.feature} at {a.threshold} in both directions")
    return tuple(uniq)


@dataclass(frozen=True)
class DecisionRule:
    """Conjunction of axis splits with an inside and an outside prediction.

    Identity (``==``, ``hash``) is the canonical split list; the two
    prediction values are ignored.
    """

    splits: tuple[Split, ...]
    mu_in: float = field(default=0.0, compare=False)
    mu_out: float = field(default=0.0, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "splits", canonicalize(self.splits))
        object.__setattr__(self, "mu_in", float(self.mu_in))
        object.__setattr__(self, "mu_out", float(self.mu_out))

    @property
    def depth(self) -> int:
        return len(self.splits)

    @property
    def key(self) -> tuple:
        return tuple((s.feature, s.threshold, int(s.direction)) for s in self.splits)

    def contains(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        inside = np.ones(X.shape[:-1], dtype=bool)
        for s in self.splits:
            inside &= s.holds(X)
        return inside

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.where(self.contains(X), self.mu_in, self.mu_out)

    def with_means(self, X: np.ndarray, y: np.ndarray) -> "DecisionRule":
        inside = self.contains(X)
        n_in = int(inside.sum())
        if n_in == 0 or n_in == len(y):
            raise ValueError(f"rule {self.describe()} does not split the data")
        return DecisionRule(self.splits, float(y[inside].mean()), float(y[~inside].mean()))

    def to_dict(self) -> dict:
        return {"splits": [s.to_dict() for s in self.splits], "mu_in": self.mu_in, "mu_out": self.mu_out}

    @classmethod
    def from_dict(cls, d) -> "DecisionRule":
        return cls(tuple(Split.from_dict(s) for s in d["splits"]), d.get("mu_in", 0.0), d.get("mu_out", 0.0))

    def describe(self, names: Sequence[str] | None = None) -> str:
        return " AND ".join(s.describe(names) for s in self.splits)


def rule_predict(rule: DecisionRule, x) -> float:
    x = np.asarray(x, dtype=float)
    return rule.mu_in if all(s.holds(x) for s in rule.splits) else rule.mu_out


@dataclass(frozen=True)
class CandidatePool:
    rules: tuple[DecisionRule, ...]
    pi: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        rules = tuple(self.rules)
        pi = np.asarray(self.pi, dtype=float).ravel()
        if len(rules) != len(pi):
            raise DimensionMismatch(f"{len(rules)} rules but {len(pi)} selection proportions")
        if len(set(rules)) != len(rules):
            raise ValueError("candidate pool contains duplicate rules")
        if np.any(pi <= 0) or np.any(pi > 1):
            raise ValueError("selection proportions must lie in (0, 1]")
        pi.flags.writeable = False
        object.__setattr__(self, "rules", rules)
        object.__setattr__(self, "pi", pi)

    @property
    def m(self) -> int:
        return len(self.rules)

    def prediction_columns(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = np.empty((X.shape[0], self.m))
        for i, r in enumerate(self.rules):
            out[:, i] = r.predict(X)
        return out

    def to_dict(self) -> dict:
        return {"rules": [r.to_dict() for r in self.rules], "pi": self.pi.tolist(), "meta": dict(self.meta)}

    @classmethod
    def from_dict(cls, d) -> "CandidatePool":
        return cls(tuple(DecisionRule.from_dict(r) for r in d["rules"]), np.asarray(d["pi"], dtype=float),
                   dict(d.get("meta", {})))

    def fingerprint(self) -> str:
        payload = json.dumps({"rules": [r.to_dict() for r in self.rules], "pi": self.pi.tolist()},
                             sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class PredictionMatrix:
    """Column-centred rule predictions on the training rows."""

    matrix: np.ndarray
    column_means: np.ndarray
    target_mean: float
    gamma: float

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def m(self) -> int:
        return self.matrix.shape[1]

    def center(self, y) -> np.ndarray:
        return np.asarray(y, dtype=float) - self.target_mean


def build_prediction_matrix(pool: CandidatePool, data: Dataset, gamma: float) -> PredictionMatrix:
    if not gamma > 0:
        raise GammaNotPositive(f"gamma must be positive, got {gamma}")
    for r in pool.rules:
        if any(s.feature >= data.p for s in r.splits):
            raise DimensionMismatch(f"rule {r.describe()} references a feature beyond p={data.p}")
    raw = pool.prediction_columns(data.features)
    means = raw.mean(axis=0)
    M = raw - means
    # second pass removes the O(eps * |mean|) residue of the first
    M -= M.mean(axis=0)
    M.flags.writeable = False
    means.flags.writeable = False
    return PredictionMatrix(M, means, float(data.target.mean()), float(gamma))


@dataclass(frozen=True)
class Solution:
    support: tuple[int, ...]
    weights: np.ndarray
    intercept: float
    h1: float
    h2: float
    epsilon: float = 0.0
    method: str = "moss"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "support", tuple(int(i) for i in self.support))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float).ravel())
        if list(self.support) != sorted(set(self.support)):
            raise ValueError("support must be sorted and unique")
        if len(self.weights) != len(self.support):
            raise DimensionMismatch("weights must align with support")

    @property
    def size(self) -> int:
        return len(self.support)

    def indicator(self, m: int) -> np.ndarray:
        z = np.zeros(m)
        z[list(self.support)] = 1.0
        return z

    def to_dict(self) -> dict:
        return {"epsilon": self.epsilon, "h1": self.h1, "h2": self.h2, "support": list(self.support),
                "weights": self.weights.tolist(), "intercept": self.intercept, "method": self.method}


@dataclass
class ParetoFrontier:
    points: list[Solution]
    pool_fingerprint: str = ""
    cuts_generated: int = 0
    iterations_per_eps: list[int] = field(default_factory=list)

    def check(self, tol: float = 1e-6) -> None:
        eps = [p.epsilon for p in self.points]
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise AssertionError("frontier epsilons must be strictly decreasing")
        for a, b in zip(self.points, self.points[1:]):
            if b.h2 > a.h2 + tol * (1 + abs(a.h2)):
                raise AssertionError(f"h2 increased from {a.h2} to {b.h2} as epsilon decreased")
        for p in self.points:
            if p.h1 < p.epsilon - 1e-9:
                raise AssertionError(f"h1={p.h1} below epsilon={p.epsilon}")

    def to_dict(self) -> dict:
        return {"points": [p.to_dict() for p in self.points], "pool_fingerprint": self.pool_fingerprint,
                "cuts_generated": self.cuts_generated, "iterations_per_eps": list(self.iterations_per_eps)}


@dataclass(frozen=True)
class RuleModel:
    """A fitted rule set: ``intercept + sum_i w_i (f_i(x) - column_mean_i)``."""

    rules: tuple[DecisionRule, ...]
    weights: np.ndarray
    column_means: np.ndarray
    intercept: float
    feature_names: tuple[str, ...] = ()
    info: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_solution(cls, sol: Solution, pool: CandidatePool, pm: PredictionMatrix,
                      feature_names: Sequence[str] = (), **info) -> "RuleModel":
        idx = list(sol.support)
        meta = {"method": sol.method, "epsilon": sol.epsilon, "h1": sol.h1, "h2": sol.h2,
                "support": idx, "gamma": pm.gamma}
        meta.update(info)
        return cls(tuple(pool.rules[i] for i in idx), sol.weights.copy(), pm.column_means[idx].copy(),
                   sol.intercept, tuple(feature_names), meta)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = np.full(X.shape[0], self.intercept)
        for r, w, c in zip(self.rules, self.weights, self.column_means):
            out += w * (r.predict(X) - c)
        return out

    def rule_set(self) -> frozenset:
        return frozenset(self.rules)

    def to_dict(self) -> dict:
        return {"rules": [r.to_dict() for r in self.rules], "weights": self.weights.tolist(),
                "column_means": self.column_means.tolist(), "intercept": self.intercept,
                "feature_names": list(self.feature_names), **self.info}

    @classmethod
    def from_dict(cls, d) -> "RuleModel":
        core = {"rules", "weights", "column_means", "intercept", "feature_names"}
        return cls(tuple(DecisionRule.from_dict(r) for r in d["rules"]),
                   np.asarray(d["weights"], dtype=float), np.asarray(d["column_means"], dtype=float),
                   float(d["intercept"]), tuple(d.get("feature_names", ())),
                   {k: v for k, v in d.items() if k not in core})


def dump_json(obj, path) -> None:
    # json emits repr() floats: shortest strings that round-trip exactly
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1, allow_nan=False)
        fh.write("\n")


def load_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
