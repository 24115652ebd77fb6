"""Master integer program of the cutting-plane loop.

    min  nu
    s.t. nu >= a_j' z + b_j              for every stored cut j
         sum_i pi_i z_i >= epsilon
         sum_i z_i <= k,   z in {0,1}^m

The built-in backend is a best-bound branch-and-bound whose node bound is
the LP relaxation, re-solved by warm-started HiGHS dual simplex. Before
each LP the two side constraints are propagated: a variable that cannot reach
``epsilon`` when switched on is fixed to 0, one without which ``epsilon``
is out of reach is fixed to 1. Near the largest feasible ``epsilon`` this
fixes almost everything and the tree collapses.
"""

from __future__ import annotations

import heapq
import logging
import time
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import highspy
from scipy import sparse
from scipy.optimize import Bounds, LinearConstraint, milp

from .errors import Infeasible, IterationLimit, TimeLimit

log = logging.getLogger(__name__)

FEAS_TOL = 1e-12
LP_TOL = 1e-9
INT_TOL = 1e-9


@dataclass(frozen=True)
class Cut:
    """Linear underestimator ``nu >= a'z + b``, tight at ``origin_support``."""

    a: np.ndarray
    b: float
    origin_support: tuple[int, ...]

    @classmethod
    def at(cls, support, value: float, grad: np.ndarray) -> "Cut":
        support = tuple(sorted(int(i) for i in support))
        a = np.array(grad, dtype=float)
        a.flags.writeable = False
        return cls(a, float(value - a[list(support)].sum()), support)

    @classmethod
    def at_point(cls, z, value: float, grad: np.ndarray) -> "Cut":
        """Tangent at a fractional point; ``origin_support`` stays empty."""
        a = np.array(grad, dtype=float)
        a.flags.writeable = False
        return cls(a, float(value - a @ np.asarray(z, dtype=float)), ())

    def __call__(self, z) -> float:
        return float(self.a @ np.asarray(z, dtype=float) + self.b)

    def at_support(self, support) -> float:
        return float(self.a[list(support)].sum() + self.b)


@dataclass
class MasterProblem:
    cuts: list[Cut]
    pi: np.ndarray
    epsilon: float
    k: int
    incumbent: tuple[tuple[int, ...], float] | None = None

    @property
    def m(self) -> int:
        return len(self.pi)

    def cut_matrix(self) -> tuple[np.ndarray, np.ndarray]:
        A = np.vstack([c.a for c in self.cuts])
        b = np.array([c.b for c in self.cuts])
        return A, b

    def model_value(self, support) -> float:
        """Piecewise-linear model ``max_j a_j'z + b_j`` at an integer point."""
        A, b = self.cut_matrix()
        return float((A[:, list(support)].sum(axis=1) + b).max())

    def is_feasible(self, support) -> bool:
        support = list(support)
        return len(support) <= self.k and self.pi[support].sum() >= self.epsilon - FEAS_TOL

    def to_lp(self) -> str:
        """CPLEX LP-format text, for cross-checking with external solvers."""

        def terms(coefs, prefix="z"):
            parts = [f"{'-' if c < 0 else '+'} {abs(c)!r} {prefix}{i}" for i, c in enumerate(coefs) if c != 0]
            return " ".join(parts) if parts else "0 z0"

        lines = ["\\ cutting-plane master problem", "Minimize", " obj: nu", "Subject To",
                 f" stability: {terms(self.pi)} >= {self.epsilon!r}",
                 f" cardinality: {terms(np.ones(self.m))} <= {self.k}"]
        for j, c in enumerate(self.cuts):
            lines.append(f" cut{j}: nu {terms(-c.a)} >= {c.b!r}")
        lines += ["Bounds", " nu free", "Binaries", " " + " ".join(f"z{i}" for i in range(self.m)), "End"]
        return "\n".join(lines) + "\n"


class MasterResult(NamedTuple):
    nu: float
    support: tuple[int, ...]
    nodes: int = 0


def top_k_sum(pi, k: int) -> float:
    pi = np.asarray(pi, dtype=float)
    if k <= 0:
        return 0.0
    return float(np.sort(pi)[::-1][:k].sum())


def check_feasible(pi, k: int, epsilon: float) -> bool:
    if epsilon <= 0:
        return True
    return top_k_sum(pi, k) >= epsilon - FEAS_TOL


def _propagate(pi, k, eps, lb, ub):
    """Tighten 0/1 bounds in place. Returns False if the node is infeasible."""
    while True:
        on = lb == 1
        free = np.flatnonzero((lb == 0) & (ub == 1))
        rem = k - int(on.sum())
        if rem < 0:
            return False
        need = eps - float(pi[on].sum())
        if rem == 0 or free.size == 0:
            ub[free] = 0
            return need <= FEAS_TOL
        order = free[np.argsort(-pi[free], kind="stable")]
        top = order[:rem]
        best = float(pi[top].sum())
        if best < need - FEAS_TOL:
            return False
        changed = False
        # switching i on: best completion is i plus the top rem-1 others
        base = float(pi[order[: rem - 1]].sum()) if rem > 1 else 0.0
        rest = order[rem - 1:] if rem >= 1 else order
        kill = rest[pi[rest] + base < need - FEAS_TOL]
        # order[rem-1] itself is in the top-rem set and always survives the test above
        if kill.size:
            ub[kill] = 0
            changed = True
        # leaving i off: replace it by the next-best free variable
        nxt = float(pi[order[rem]]) if order.size > rem else 0.0
        force = top[best - pi[top] + nxt < need - FEAS_TOL]
        if force.size:
            lb[force] = 1
            changed = True
        if not changed:
            return True


class _Rows:
    """Append-only row store with amortized O(1) appends."""

    def __init__(self, m: int, rows=None, scale: float = 1.0):
        self._buf = np.zeros((16, m))
        self._rhs = np.zeros(16)
        self.n = 0
        self.scale = scale
        for a, b in rows or ():
            self.append(a, b)

    def append(self, a, b) -> None:
        if self.n == len(self._rhs):
            self._buf = np.vstack([self._buf, np.zeros_like(self._buf)])
            self._rhs = np.concatenate([self._rhs, np.zeros_like(self._rhs)])
        self._buf[self.n] = np.asarray(a, dtype=float) / self.scale
        self._rhs[self.n] = float(b) / self.scale
        self.n += 1

    @property
    def A(self) -> np.ndarray:
        return self._buf[: self.n]

    @property
    def b(self) -> np.ndarray:
        return self._rhs[: self.n]


class _NodeLP:
    """LP relaxation held in one HiGHS instance.

    Nodes only change column bounds, so each re-solve is a warm-started dual
    simplex. Cut rows are dense and HiGHS time grows with their number, so
    only a working set of cuts lives in the LP: after each solve every
    stored cut is checked at the LP optimum, violated ones are added and the
    LP is re-solved. The returned optimum is therefore that of the full LP.
    Rows that stay non-binding for a long time are dropped again.

    The LP works in units of ``scale`` (the order of magnitude of the cut
    values) so that its absolute tolerances mean the same thing whatever
    the scale of the response; values and reduced costs are reported in
    the original units.
    """

    PURGE_EVERY = 50
    MAX_IDLE = 25
    ADD_PER_ROUND = 8

    def __init__(self, A, b, pi, k, eps, scale: float = 1.0):
        J, m = A.shape
        self.m = m
        self.scale = float(scale)
        self.cuts = _Rows(m, zip(A, b), self.scale)
        inf = highspy.kHighsInf
        lp = highspy.HighsLp()
        lp.num_col_ = m + 1
        lp.num_row_ = 2
        lp.col_cost_ = np.append(np.zeros(m), 1.0)
        lp.col_lower_ = np.append(np.zeros(m), -inf)
        lp.col_upper_ = np.append(np.ones(m), inf)
        lp.row_lower_ = np.array([eps - FEAS_TOL, -inf])
        lp.row_upper_ = np.array([inf, float(k)])
        csc = sparse.csc_matrix(np.vstack([np.append(pi, 0.0), np.append(np.ones(m), 0.0)]))
        lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
        lp.a_matrix_.start_ = csc.indptr
        lp.a_matrix_.index_ = csc.indices
        lp.a_matrix_.value_ = csc.data
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("primal_feasibility_tolerance", LP_TOL)
        h.setOptionValue("dual_feasibility_tolerance", LP_TOL)
        h.passModel(lp)
        self.h = h
        self.idx = np.arange(m, dtype=np.int32)
        self.rows: list[int] = []  # cut id of LP row 2 + i
        self.idle = np.zeros(0, dtype=np.int64)
        self.in_lp = np.zeros(J, dtype=bool)
        self.solves = 0
        # nu is unbounded below without a cut; the newest one is a good start
        self._activate([J - 1])

    def _activate(self, ids):
        inf = highspy.kHighsInf
        A, b = self.cuts.A, self.cuts.b
        for j in ids:
            a = A[j]
            idx = np.flatnonzero(a).astype(np.int32)
            self.h.addRow(-inf, -b[j], idx.size + 1, np.append(idx, self.m).astype(np.int32),
                          np.append(a[idx], -1.0))
            self.rows.append(int(j))
            self.in_lp[j] = True
        self.idle = np.append(self.idle, np.zeros(len(ids), dtype=np.int64))

    def add_cut(self, a, b):
        self.cuts.append(a, b)
        self.in_lp = np.append(self.in_lp, False)
        self._activate([self.cuts.n - 1])

    def _purge(self):
        drop = self.idle > self.MAX_IDLE
        if not drop.any() or drop.all():
            return
        self.h.deleteRows(int(drop.sum()), (2 + np.flatnonzero(drop)).astype(np.int32))
        rows = np.array(self.rows)
        self.in_lp[rows[drop]] = False
        self.rows = rows[~drop].tolist()
        self.idle = self.idle[~drop]

    def solve(self, lb, ub):
        """Returns (value, z, reduced_costs) or None if infeasible."""
        h = self.h
        self.solves += 1
        if self.solves % self.PURGE_EVERY == 0:
            self._purge()
        h.changeColsBounds(self.m, self.idx, lb.astype(float), ub.astype(float))
        while True:
            h.run()
            status = h.getModelStatus()
            if status == highspy.HighsModelStatus.kInfeasible:
                return None
            if status != highspy.HighsModelStatus.kOptimal:
                raise RuntimeError(f"LP relaxation failed: {h.modelStatusToString(status)}")
            sol = h.getSolution()
            x = np.asarray(sol.col_value)
            nu = float(x[-1])
            viol = self.cuts.A @ x[: self.m] + self.cuts.b - nu
            viol[self.in_lp] = -np.inf
            bad = np.flatnonzero(viol > LP_TOL * (1.0 + abs(nu)))
            if bad.size == 0:
                break
            self._activate(bad[np.argsort(-viol[bad], kind="stable")][: self.ADD_PER_ROUND])
        binding = np.abs(np.asarray(sol.row_dual)[2:]) > 1e-12
        self.idle = np.where(binding, 0, self.idle + 1)
        d = np.asarray(sol.col_dual)[: self.m] * self.scale
        z = np.clip(x[: self.m], 0.0, 1.0)
        return nu * self.scale, z, d


def _round(z, pi, k, eps, lb, ub):
    """Cheap incumbent: fixed-on variables plus the largest remaining z."""
    on = np.flatnonzero(lb == 1)
    free = np.flatnonzero((lb == 0) & (ub == 1))
    rem = k - on.size
    order = free[np.lexsort((free, -z[free]))]
    picked = np.sort(np.concatenate([on, order[:rem]])).astype(int)
    if pi[picked].sum() >= eps - FEAS_TOL:
        return tuple(picked.tolist())
    return None


class MasterTree:
    """Best-bound branch-and-bound for the master at one fixed epsilon.

    The tree outlives a single solve. Its leaves always cover the feasible
    set, each with a lower bound on the model inside it, and adding a cut can
    only raise those bounds. The next solve therefore restarts from the old
    leaves instead of the root, which is what makes a long run of outer
    iterations cheap. Every solve is still exact.
    """

    def __init__(self, pi, k: int, epsilon: float, cuts=(), tol: float | None = None,
                 node_limit: int = 10**6):
        self.pi = np.asarray(pi, dtype=float)
        self.k, self.eps = int(k), float(epsilon)
        if not check_feasible(self.pi, self.k, self.eps):
            emax = top_k_sum(self.pi, self.k)
            raise Infeasible(f"epsilon={self.eps} exceeds the largest feasible value {emax}",
                             epsilon=self.eps, epsilon_max=emax)
        self.tol, self.node_limit = tol, node_limit
        m = len(self.pi)
        self._rows = _Rows(m)
        self._lp = None
        self._counter = 0
        # (bound, counter, lb, ub, deferred); see _expand for ``deferred``
        self._leaves = [(-np.inf, 0, np.zeros(m, dtype=np.int8), np.ones(m, dtype=np.int8), None)]
        self.nodes = 0
        for c in cuts:
            self.add_cut(c)

    @property
    def m(self) -> int:
        return len(self.pi)

    @property
    def n_cuts(self) -> int:
        return self._rows.n

    def add_cut(self, cut: Cut) -> None:
        self._rows.append(cut.a, cut.b)
        if self._lp is not None:
            self._lp.add_cut(cut.a, cut.b)

    def model_value(self, support) -> float:
        return float((self._rows.A[:, list(support)].sum(axis=1) + self._rows.b).max())

    def root_cuts(self, oracle, max_rounds: int = 50, rel_tol: float = 1e-6) -> list[Cut]:
        """Tighten the root relaxation with tangents of a convex function
        that the cuts underestimate, taken at fractional LP optima.

        ``oracle(z)`` returns the function value and gradient at ``z``.
        Any such tangent is valid on the whole box, so the master's optimum
        over integers is unchanged in meaning; only its bound gets stronger.
        """
        if not self._rows.n:
            raise ValueError("master problem needs at least one cut")
        if self._lp is None:
            self._lp = self._make_lp()
        lb = np.zeros(self.m, dtype=np.int8)
        ub = np.ones(self.m, dtype=np.int8)
        if not _propagate(self.pi, self.k, self.eps, lb, ub):
            return []
        added = []
        for _ in range(max_rounds):
            res = self._lp.solve(lb, ub)
            if res is None:
                break
            lp_val, z, _ = res
            value, grad = oracle(z)
            if value <= lp_val + rel_tol * (1.0 + abs(value)):
                break
            cut = Cut.at_point(z, value, grad)
            self.add_cut(cut)
            added.append(cut)
        return added

    def _make_lp(self):
        A, b = self._rows.A, self._rows.b
        return _NodeLP(A, b, self.pi, self.k, self.eps, scale=1.0 + float(np.abs(b).max()))

    def _gap(self, v):
        return self.tol if self.tol is not None else 1e-9 * (1.0 + abs(v))

    def _push(self, heap, bound, lb, ub, deferred=None):
        self._counter += 1
        heapq.heappush(heap, (bound, self._counter, lb, ub, deferred))

    def _expand(self, heap, lb, ub, deferred):
        """Reduced-cost fixing removed the regions 'flip variable j' one at a
        time, each with its own bound; they are materialized only on demand."""
        lb, ub = lb.copy(), ub.copy()
        for j, val, bound in deferred:
            clb, cub = lb.copy(), ub.copy()
            clb[j] = cub[j] = 1 - val
            self._push(heap, bound, clb, cub)
            lb[j] = ub[j] = val

    def solve(self, incumbent=None, tol: float | None = None, oracle=None,
              node_rounds: int = 0, deadline: float | None = None, lazy=None) -> MasterResult:
        """Optimal within ``tol`` (default: the tree's own setting).

        With ``oracle`` (see :meth:`root_cuts`), up to ``node_rounds``
        tangent cuts are separated at each fractional node before branching.
        ``deadline`` is a ``time.monotonic()`` value; passing it raises
        :class:`TimeLimit` carrying the current best bound. The tree is not
        reusable after that.

        ``lazy(support)`` returns the true objective at an integral point and
        the tangent cut there (or None if that cut is already stored). With
        it every integral candidate is scored by the true objective, and a
        node whose model undervalues its integral LP point is re-solved with
        the new cut. The incumbent value is then attained by a real support,
        so the solve closes the outer loop on its own.
        """
        if tol is not None:
            self.tol = tol
        if not self._rows.n:
            raise ValueError("master problem needs at least one cut")
        pi, k, eps = self.pi, self.k, self.eps
        if self._lp is None:
            self._lp = self._make_lp()

        added = False

        def value(support):
            nonlocal added
            if lazy is None:
                return self.model_value(support)
            true, cut = lazy(support)
            added = cut is not None
            if added:
                self.add_cut(cut)
            return true

        inc_val, inc = np.inf, None
        if incumbent is not None:
            sup = tuple(sorted(incumbent[0]))
            if len(sup) <= k and pi[list(sup)].sum() >= eps - FEAS_TOL:
                inc, inc_val = sup, value(sup)

        heap = self._leaves
        heapq.heapify(heap)
        kept = []
        nodes = 0
        while heap:
            bound, _, lb, ub, deferred = heap[0]
            if inc is not None and bound >= inc_val - self._gap(inc_val):
                break
            heapq.heappop(heap)
            if deferred is not None:
                self._expand(heap, lb, ub, deferred)
                continue
            nodes += 1
            if nodes % 5000 == 0:
                log.debug("master progress: nodes=%d open=%d bound=%.10g incumbent=%.10g cuts=%d",
                          nodes, len(heap), bound, inc_val, self._rows.n)
            if deadline is not None and time.monotonic() > deadline:
                raise TimeLimit("time limit reached in branch-and-bound", nodes=self.nodes + nodes,
                                lower_bound=float(bound))
            if self.nodes + nodes > self.node_limit:
                raise IterationLimit(f"branch-and-bound exceeded {self.node_limit} nodes",
                                     nodes=self.nodes + nodes)
            if not _propagate(pi, k, eps, lb, ub):
                continue
            res = self._lp.solve(lb, ub)
            if res is None:
                continue
            lp_val, z, d = res
            frac = np.minimum(z, 1.0 - z)
            for _ in range(node_rounds if oracle is not None else 0):
                if frac.max() <= INT_TOL or (inc is not None and lp_val >= inc_val - self._gap(inc_val)):
                    break
                v, g = oracle(z)
                if v <= lp_val + 1e-6 * (1.0 + abs(v)):
                    break
                self.add_cut(Cut.at_point(z, v, g))
                if inc is not None and lazy is None:
                    inc_val = value(inc)
                lp_val, z, d = self._lp.solve(lb, ub)
                frac = np.minimum(z, 1.0 - z)
            lp_val = max(lp_val, bound)
            if inc is not None and lp_val >= inc_val - self._gap(inc_val):
                kept.append((lp_val, 0, lb, ub, None))
                continue
            if frac.max() <= INT_TOL:
                sup = tuple(np.flatnonzero(z > 0.5).tolist())
                v = value(sup)
                if v < inc_val:
                    inc_val, inc = v, sup
                if added and v > lp_val + self._gap(v):
                    # the model was too optimistic at this point; look again with the new cut
                    self._push(heap, lp_val, lb, ub)
                    continue
                kept.append((lp_val, 0, lb, ub, None))
                continue
            cand = _round(z, pi, k, eps, lb, ub)
            if cand is not None:
                v = value(cand)
                if v < inc_val:
                    inc_val, inc = v, cand
            if inc is not None:
                # reduced-cost fixing: flipping a nonbasic variable costs at least |d|
                cutoff = inc_val - self._gap(inc_val) - lp_val
                free = (lb == 0) & (ub == 1)
                off = np.flatnonzero(free & (z <= INT_TOL) & (d >= cutoff))
                on = np.flatnonzero(free & (z >= 1 - INT_TOL) & (-d >= cutoff))
                if off.size or on.size:
                    fixes = ([(int(j), 0, lp_val + float(d[j])) for j in off]
                             + [(int(j), 1, lp_val - float(d[j])) for j in on])
                    kept.append((min(f[2] for f in fixes), 0, lb.copy(), ub.copy(), fixes))
                    ub[off] = 0
                    lb[on] = 1
            # most fractional; argmax returns the lowest index on ties
            j = int(np.argmax(frac))
            clb, cub = lb.copy(), ub.copy()
            clb[j] = 1
            self._push(heap, lp_val, clb, ub.copy())
            cub[j] = 0
            self._push(heap, lp_val, lb.copy(), cub)
        if inc is None:
            raise Infeasible(f"no feasible point for epsilon={eps}", epsilon=eps,
                             epsilon_max=top_k_sum(pi, k))
        for node in kept:
            self._push(heap, *node[:1], *node[2:])
        self._leaves = heap
        self.nodes += nodes
        log.debug("master: m=%d cuts=%d eps=%.6g nodes=%d leaves=%d nu=%.10g",
                  self.m, self._rows.n, eps, nodes, len(heap), inc_val)
        return MasterResult(inc_val, inc, nodes)


def solve_master_bnb(mp: MasterProblem, tol: float | None = None, node_limit: int = 10**6,
                     time_limit: float | None = None) -> MasterResult:
    """One-shot solve; :class:`MasterTree` keeps the tree between solves."""
    tree = MasterTree(mp.pi, mp.k, mp.epsilon, mp.cuts, tol=tol, node_limit=node_limit)
    deadline = None if time_limit is None else time.monotonic() + time_limit
    return tree.solve(mp.incumbent, deadline=deadline)


def solve_master_highs(mp: MasterProblem, tol: float | None = None, node_limit: int = 10**6,
                       time_limit: float | None = None) -> MasterResult:
    """Same problem handed to the HiGHS MILP solver (external backend)."""
    pi = np.asarray(mp.pi, dtype=float)
    m, k, eps = len(pi), int(mp.k), float(mp.epsilon)
    if not check_feasible(pi, k, eps):
        raise Infeasible(f"epsilon={eps} exceeds the largest feasible value {top_k_sum(pi, k)}",
                         epsilon=eps, epsilon_max=top_k_sum(pi, k))
    A, b = mp.cut_matrix()
    c = np.zeros(m + 1)
    c[-1] = 1.0
    cons = [LinearConstraint(np.hstack([A, -np.ones((len(b), 1))]), -np.inf, -b),
            LinearConstraint(np.append(pi, 0.0)[None, :], eps - FEAS_TOL, np.inf),
            LinearConstraint(np.append(np.ones(m), 0.0)[None, :], 0, k)]
    integrality = np.append(np.ones(m), 0)
    lo = np.append(np.zeros(m), -np.inf)
    hi = np.append(np.ones(m), np.inf)
    options = {"mip_rel_gap": 0.0, "node_limit": node_limit}
    if time_limit is not None:
        options["time_limit"] = max(float(time_limit), 0.0)
    res = milp(c, constraints=cons, integrality=integrality, bounds=Bounds(lo, hi), options=options)
    if res.status == 2:
        raise Infeasible(f"no feasible point for epsilon={eps}", epsilon=eps, epsilon_max=top_k_sum(pi, k))
    if res.status == 1 and time_limit is not None and "time" in res.message.lower():
        raise TimeLimit(f"HiGHS MILP hit the time limit: {res.message}",
                        lower_bound=getattr(res, "mip_dual_bound", None))
    if res.x is None or res.status != 0:
        raise IterationLimit(f"HiGHS MILP did not finish: {res.message}")
    sup = tuple(np.flatnonzero(res.x[:m] > 0.5).tolist())
    return MasterResult(mp.model_value(sup), sup, 0)


BACKENDS = {"bnb": solve_master_bnb, "highs": solve_master_highs}


def solve_master(mp: MasterProblem, tol: float | None = None, backend: str = "bnb",
                 node_limit: int = 10**6, time_limit: float | None = None) -> MasterResult:
    try:
        fn = BACKENDS[backend]
    except KeyError:
        raise ValueError(f"unknown master backend {backend!r}; choose from {sorted(BACKENDS)}") from None
    return fn(mp, tol=tol, node_limit=node_limit, time_limit=time_limit)
