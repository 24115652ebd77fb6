"""Cutting-plane solver for the epsilon-constrained problem and the
cut-reusing Pareto sweep.

    min H2(z)  s.t.  sum pi_i z_i >= epsilon,  sum z_i <= k,  z binary

H2 is convex on the relaxed box, so gradients at visited supports give
valid cuts. They depend only on H2 and not on epsilon, which is why a sweep
over decreasing epsilon can keep every cut it has generated.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .data import ParetoFrontier, PredictionMatrix, Solution
from .errors import Infeasible, IterationLimit, KTooLarge, SolverError, TimeLimit
from .master import BACKENDS, Cut, MasterProblem, MasterTree, check_feasible, solve_master, top_k_sum
from .objective import fit_weights, grad_h2, h1, relaxed_value_grad, ridge_kernel

log = logging.getLogger(__name__)


def _as_pi(pool) -> np.ndarray:
    return np.asarray(getattr(pool, "pi", pool), dtype=float)


def _top_k_support(pi, k) -> tuple[int, ...]:
    return tuple(sorted(np.argsort(-pi, kind="stable")[:k].tolist()))


@dataclass(frozen=True)
class EpsilonSequence:
    values: tuple[float, ...]
    k: int

    @property
    def eps_max(self) -> float:
        return self.values[0]

    def __len__(self):
        return len(self.values)

    def __getitem__(self, i):
        return self.values[i]

    def element(self, position: int) -> float:
        """1-based position, clamped to the sequence length."""
        return self.values[min(max(position, 1), len(self.values)) - 1]


@dataclass
class CutStore:
    cuts: list[Cut] = field(default_factory=list)
    h2_at: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.cuts)

    def add(self, support, value, grad) -> bool:
        support = tuple(sorted(support))
        if support in self.h2_at:
            return False
        self.cuts.append(Cut.at(support, value, grad))
        self.h2_at[support] = value
        return True

    def best_feasible(self, pi, k, epsilon):
        """Lowest-H2 origin support that is feasible for (k, epsilon)."""
        best = None
        for sup, val in self.h2_at.items():
            if len(sup) <= k and pi[list(sup)].sum() >= epsilon - 1e-12:
                if best is None or val < best[1]:
                    best = (sup, val)
        return best


def _solution(kern, pm, pi, epsilon, method, **meta) -> Solution:
    w, b0 = fit_weights(kern, pm)
    return Solution(kern.support, w, b0, h1(kern.support, pi), kern.h2_value, epsilon, method, meta)


def stability_select_topk(pool, k: int, pm: PredictionMatrix, y) -> Solution:
    pi = _as_pi(pool)
    if not 1 <= k <= len(pi):
        raise KTooLarge(f"k={k} must lie in [1, m={len(pi)}]")
    kern = ridge_kernel(_top_k_support(pi, k), pm, y)
    return _solution(kern, pm, pi, 0.0, "topk")


def epsilon_sequence(pool, k: int) -> EpsilonSequence:
    pi = _as_pi(pool)
    m = len(pi)
    if not 1 <= k <= m:
        raise KTooLarge(f"k={k} must lie in [1, m={m}]")
    s = np.sort(pi)[::-1]
    values = []
    for i in range(m - k + 1):
        v = float(s[i:i + k].sum())
        if not values or v < values[-1] - 1e-12:
            values.append(v)
    return EpsilonSequence(tuple(values), k)


def solve_fixed_epsilon(pool, pm: PredictionMatrix, y, k: int, epsilon: float,
                        cuts: CutStore | None = None, warm=None, *, max_iter: int = 500,
                        rel_tol: float = 1e-6, backend: str = "bnb",
                        root_rounds: int = 50, node_rounds: int = 1,
                        time_limit: float | None = None, lazy_cuts: bool = True) -> tuple[Solution, CutStore]:
    """Outer-approximation loop for one epsilon.

    Cuts already in ``cuts`` are reused and new ones are appended in place.
    ``warm`` (a Solution or support) must be feasible; the top-k support is
    used otherwise. With ``time_limit`` (seconds) the solve raises
    :class:`TimeLimit` once the budget is spent; the error carries the best
    feasible support, its H2 and the proven lower bound. ``lazy_cuts``
    lets the branch-and-bound tree cut off integral points itself (one tree
    per epsilon); without it every integral point goes back through the
    outer loop.
    """
    pi = _as_pi(pool)
    y = np.asarray(y, dtype=float)
    if k > len(pi):
        raise KTooLarge(f"k={k} exceeds m={len(pi)}")
    if not check_feasible(pi, k, epsilon):
        raise Infeasible(f"epsilon={epsilon} exceeds epsilon_max={top_k_sum(pi, k)}",
                         epsilon=epsilon, epsilon_max=top_k_sum(pi, k))
    cuts = CutStore() if cuts is None else cuts
    mp = MasterProblem(cuts.cuts, pi, epsilon, k)
    tree = MasterTree(pi, k, epsilon, cuts.cuts) if backend == "bnb" else None
    oracle = lambda u: relaxed_value_grad(u, pm, y)  # noqa: E731

    z = getattr(warm, "support", warm)
    if z is None or not mp.is_feasible(z):
        z = _top_k_support(pi, k)
    kern = ridge_kernel(z, pm, y)
    new_cuts, nodes = 0, 0

    def lazy(support):
        nonlocal new_cuts
        kk = ridge_kernel(support, pm, y)
        if cuts.add(kk.support, kk.h2_value, grad_h2(kk, pm)):
            new_cuts += 1
            return kk.h2_value, cuts.cuts[-1]
        return kk.h2_value, None

    start = time.monotonic()
    deadline = None if time_limit is None else start + time_limit
    lower = -np.inf
    for it in range(1, max_iter + 1):
        if cuts.add(kern.support, kern.h2_value, grad_h2(kern, pm)):
            new_cuts += 1
            if tree is not None:
                tree.add_cut(cuts.cuts[-1])
        inc = cuts.best_feasible(pi, k, epsilon)
        delta = rel_tol * (1.0 + abs(inc[1]))
        # half of the budget goes to the master, half to the outer test
        try:
            if deadline is not None and time.monotonic() > deadline:
                raise TimeLimit("time limit reached between master solves", lower_bound=lower)
            if tree is not None:
                if root_rounds and it == 1:
                    tree.root_cuts(oracle, root_rounds)
                res = tree.solve(inc, tol=0.5 * delta, oracle=oracle, node_rounds=node_rounds,
                                 deadline=deadline, lazy=lazy if lazy_cuts else None)
            else:
                mp.incumbent = inc
                remaining = None if deadline is None else deadline - time.monotonic()
                res = solve_master(mp, tol=0.5 * delta, backend=backend, time_limit=remaining)
        except TimeLimit as e:
            inc = cuts.best_feasible(pi, k, epsilon)
            bound = e.info.get("lower_bound")
            e.info.update(epsilon=epsilon, seconds=time.monotonic() - start, iterations=it,
                          best_support=list(inc[0]), best_h2=float(inc[1]),
                          lower_bound=None if bound is None or not np.isfinite(bound) else float(bound))
            raise
        nodes += res.nodes
        lower = res.nu - 0.5 * delta
        cand = ridge_kernel(res.support, pm, y)
        if cand.h2_value < inc[1]:
            kern = cand
        else:
            kern = ridge_kernel(inc[0], pm, y)
        if kern.h2_value <= lower + delta:
            log.debug("eps=%.6g converged: iterations=%d new_cuts=%d nodes=%d h2=%.10g",
                      epsilon, it, new_cuts, nodes, kern.h2_value)
            sol = _solution(kern, pm, pi, epsilon, "moss", iterations=it, new_cuts=new_cuts,
                            nodes=nodes, lower_bound=lower)
            return sol, cuts
        kern = cand
    raise IterationLimit(f"cutting-plane loop did not converge in {max_iter} iterations",
                         epsilon=epsilon, iterations=max_iter)


def compute_pareto(pool, pm: PredictionMatrix, y, k: int, eps_subset, *, reuse_cuts: bool = True,
                   backend: str = "bnb", fingerprint: str = "",
                   time_limit: float | None = None) -> ParetoFrontier:
    """Solve a strictly decreasing list of epsilons.

    With ``reuse_cuts`` each solve is warm-started from the previous
    solution and shares one cut store; otherwise every epsilon starts cold
    from the top-k support with no cuts. ``time_limit`` applies to each
    epsilon separately.
    """
    pi = _as_pi(pool)
    eps_subset = [float(e) for e in eps_subset]
    if any(b >= a for a, b in zip(eps_subset, eps_subset[1:])):
        raise ValueError("eps_subset must be strictly decreasing")
    if not fingerprint and hasattr(pool, "fingerprint"):
        fingerprint = pool.fingerprint()
    store = CutStore()
    points, iters, total = [], [], 0
    prev = None
    for eps in eps_subset:
        if not reuse_cuts:
            store, prev = CutStore(), None
        try:
            sol, store = solve_fixed_epsilon(pi, pm, y, k, eps, store, prev, backend=backend,
                                             time_limit=time_limit)
        except SolverError as e:
            e.info.setdefault("epsilon", eps)
            raise
        points.append(sol)
        iters.append(sol.meta["iterations"])
        total += sol.meta["new_cuts"]
        prev = sol
    log.info("pareto sweep: %d epsilons, %d cuts, reuse=%s", len(points), total, reuse_cuts)
    return ParetoFrontier(points, fingerprint, total, iters)
