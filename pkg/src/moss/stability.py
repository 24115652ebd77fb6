"""Rule-set similarity and empirical stability."""

from __future__ import annotations

import math
from itertools import permutations

import numpy as np

from .errors import EmptyRuleSet, TooFewSets

METRICS = ("dsc", "jaccard", "ochiai", "pog")


def pairwise_similarity(a, b, metric: str = "dsc") -> float:
    """Similarity of two rule sets. ``pog`` divides by ``|a|``."""
    a, b = set(a), set(b)
    if not a or not b:
        raise EmptyRuleSet("similarity is undefined for an empty rule set")
    inter = len(a & b)
    if metric == "dsc":
        return 2.0 * inter / (len(a) + len(b))
    if metric == "jaccard":
        return inter / len(a | b)
    if metric == "ochiai":
        return inter / math.sqrt(len(a) * len(b))
    if metric == "pog":
        return inter / len(a)
    raise ValueError(f"unknown metric {metric!r}; choose from {METRICS}")


def similarity_matrix(rule_sets, metric: str = "dsc") -> np.ndarray:
    T = len(rule_sets)
    out = np.eye(T)
    for i, j in permutations(range(T), 2):
        out[i, j] = pairwise_similarity(rule_sets[i], rule_sets[j], metric)
    return out


def empirical_stability(rule_sets, metric: str = "dsc") -> float:
    """Mean similarity over all ordered pairs ``i != j``."""
    rule_sets = [set(s) for s in rule_sets]
    T = len(rule_sets)
    if T < 2:
        raise TooFewSets(f"need at least two rule sets, got {T}")
    total = sum(pairwise_similarity(rule_sets[i], rule_sets[j], metric) for i, j in permutations(range(T), 2))
    return total / (T * (T - 1))
