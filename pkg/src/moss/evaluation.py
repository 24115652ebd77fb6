"""Cross-validation harness for the MOSS rule-set variants and the top-k
baseline, plus sweeps over gamma and k."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .data import Dataset, RuleModel, build_prediction_matrix
from .errors import ConfigError, ConstantTarget, DimensionMismatch, MossError
from .heuristic import fit_target_k, lambda1_max
from .rules import ForestConfig, generate_pool
from .solver import compute_pareto, epsilon_sequence, stability_select_topk
from .stability import empirical_stability

log = logging.getLogger(__name__)

METHODS = ("moss_h", "moss_m", "moss_l", "topk")


def r_squared(y_true, y_pred) -> float:
    """1 - SSE/SST with SST taken around the mean of ``y_true``."""
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_true.shape != y_pred.shape:
        raise DimensionMismatch(f"y_true has shape {y_true.shape}, y_pred {y_pred.shape}")
    if y_true.size < 2:
        raise DimensionMismatch("need at least two observations")
    sst = float(np.sum((y_true - y_true.mean()) ** 2))
    if sst == 0.0:
        raise ConstantTarget("R^2 is undefined for a constant target")
    return 1.0 - float(np.sum((y_true - y_pred) ** 2)) / sst


def fold_assignment(n: int, folds: int, seed: int) -> list[np.ndarray]:
    """Shuffle rows once, then cut the permutation into contiguous blocks."""
    if folds < 2:
        raise ConfigError("folds must be at least 2")
    if n < folds:
        raise ConfigError(f"n={n} is smaller than folds={folds}")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(block) for block in np.array_split(perm, folds)]


@dataclass(frozen=True)
class ExperimentConfig:
    folds: int = 10
    k: int = 15
    gamma: float = 1e-3
    methods: tuple[str, ...] = METHODS
    forest: ForestConfig = field(default_factory=ForestConfig)
    gamma_grid: tuple[float, ...] | None = None
    k_grid: tuple[int, ...] | None = None
    seed: int = 0
    eps_high: int = 3  # 1-based positions in the epsilon sequence
    eps_mid: int = 40
    lambda2_ratio: float = 0.1  # moss_l: lambda2 as a fraction of lambda1_max(lambda2=0)
    time_limit: float | None = None  # seconds per epsilon for the exact solver

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        if self.folds < 2:
            raise ConfigError("folds must be at least 2")
        if self.k < 1:
            raise ConfigError("k must be positive")
        if not self.gamma > 0:
            raise ConfigError("gamma must be positive")
        bad = set(self.methods) - set(METHODS)
        if bad or not self.methods:
            raise ConfigError(f"methods must be a non-empty subset of {METHODS}, got {self.methods}")
        if self.eps_high < 1 or self.eps_mid < 1:
            raise ConfigError("epsilon positions are 1-based")
        if self.lambda2_ratio < 0:
            raise ConfigError("lambda2_ratio must be non-negative")
        if self.time_limit is not None and not self.time_limit > 0:
            raise ConfigError("time_limit must be positive")
        for name in ("gamma_grid", "k_grid"):
            grid = getattr(self, name)
            if grid is not None:
                if len(grid) == 0:
                    raise ConfigError(f"{name} is empty")
                object.__setattr__(self, name, tuple(grid))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["methods"] = list(self.methods)
        for name in ("gamma_grid", "k_grid"):
            if d[name] is not None:
                d[name] = list(d[name])
        d["forest"].pop("n_jobs")
        return d


@dataclass
class MethodResult:
    r2: list[float]
    rule_sets: list[list[dict]]  # per fold: the rules' split lists
    models: list[dict]
    stability: float
    seconds: list[float] = field(default_factory=list)

    @property
    def r2_mean(self) -> float:
        return float(np.mean(self.r2))

    @property
    def r2_se(self) -> float:
        if len(self.r2) < 2:
            return 0.0
        return float(np.std(self.r2, ddof=1) / math.sqrt(len(self.r2)))

    def to_dict(self, timing: bool = False) -> dict:
        d = {"r2_mean": self.r2_mean, "r2_se": self.r2_se, "stability": self.stability,
             "r2_folds": list(self.r2), "rule_sets": self.rule_sets, "models": self.models}
        if timing:
            d["seconds"] = list(self.seconds)
        return d


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    methods: dict[str, MethodResult]
    folds: list[list[int]]
    fold_info: list[dict]
    metric: str = "dsc"

    def to_dict(self, timing: bool = False) -> dict:
        """Timing is left out by default so equal seeds give equal bytes."""
        return {"config": self.config.to_dict(), "metric": self.metric, "folds": self.folds,
                "fold_info": self.fold_info,
                "methods": {name: res.to_dict(timing) for name, res in self.methods.items()}}

    def csv_row(self, dataset: str = "") -> str:
        cells = [dataset] + [repr(self.methods[m].r2_mean) if m in self.methods else "" for m in METHODS]
        cells += [repr(self.methods[m].stability) if m in self.methods else "" for m in METHODS]
        return ",".join(cells)

    @staticmethod
    def csv_header() -> str:
        return ",".join(["dataset"] + [f"r2_{m}" for m in METHODS] + [f"stability_{m}" for m in METHODS])


def rule_identity(rule_dict: dict) -> tuple:
    """Hashable identity of a serialized rule: its splits, not its means."""
    return tuple((s["feature"], s["op"], float(s["threshold"])) for s in rule_dict["splits"])


def stability_from_rule_sets(rule_sets, metric: str = "dsc") -> float:
    return empirical_stability([{rule_identity(r) for r in rs} for rs in rule_sets], metric)


def _fold_seed(seed: int, fold: int) -> int:
    return int(np.random.SeedSequence([seed, fold]).generate_state(1)[0])


def _fit_fold(train: Dataset, cfg: ExperimentConfig, fold: int) -> tuple[dict, dict, dict]:
    forest = replace(cfg.forest, seed=_fold_seed(cfg.seed, fold))
    pool = generate_pool(train, forest)
    pm = build_prediction_matrix(pool, train, cfg.gamma)
    yc = pm.center(train.target)
    sols, secs = {}, {}
    info = {"m": pool.m, "pool_fingerprint": pool.fingerprint()}

    exact = [m for m in ("moss_h", "moss_m") if m in cfg.methods]
    if exact:
        E = epsilon_sequence(pool, cfg.k)
        pos = {"moss_h": min(cfg.eps_high, len(E)), "moss_m": min(cfg.eps_mid, len(E))}
        last = max(pos[m] for m in exact)
        t = time.perf_counter()
        frontier = compute_pareto(pool, pm, yc, cfg.k, E.values[:last], time_limit=cfg.time_limit)
        elapsed = time.perf_counter() - t
        info.update(eps_len=len(E), cuts=frontier.cuts_generated)
        for m in exact:
            sols[m] = frontier.points[pos[m] - 1]
            secs[m] = elapsed
    if "moss_l" in cfg.methods:
        t = time.perf_counter()
        lam2 = cfg.lambda2_ratio * lambda1_max(pm, yc, pool.pi, cfg.gamma, 0.0)
        sols["moss_l"] = fit_target_k(pm, yc, pool.pi, cfg.gamma, lam2, cfg.k)
        secs["moss_l"] = time.perf_counter() - t
        info["lambda2"] = lam2
    if "topk" in cfg.methods:
        t = time.perf_counter()
        sols["topk"] = stability_select_topk(pool, cfg.k, pm, yc)
        secs["topk"] = time.perf_counter() - t
    models = {m: RuleModel.from_solution(s, pool, pm, train.feature_names) for m, s in sols.items()}
    return models, secs, info


def run_cv(data: Dataset, cfg: ExperimentConfig, metric: str = "dsc") -> ExperimentReport:
    blocks = fold_assignment(data.n, cfg.folds, cfg.seed)
    per = {m: {"r2": [], "sets": [], "models": [], "secs": []} for m in cfg.methods}
    fold_info = []
    for f, test_idx in enumerate(blocks):
        train_idx = np.setdiff1d(np.arange(data.n), test_idx)
        train, test = data.subset(train_idx), data.subset(test_idx)
        try:
            models, secs, info = _fit_fold(train, cfg, f)
            for m in cfg.methods:
                model = models[m]
                r2 = r_squared(test.target, model.predict(test.features))
                per[m]["r2"].append(r2)
                per[m]["sets"].append([{"splits": r.to_dict()["splits"]} for r in model.rules])
                per[m]["models"].append(model.to_dict())
                per[m]["secs"].append(secs[m])
        except MossError as e:
            e.info.setdefault("fold", f)
            raise
        fold_info.append(info)
        log.info("fold %d/%d: m=%d %s", f + 1, cfg.folds, info["m"],
                 " ".join(f"{m}={per[m]['r2'][-1]:.4f}" for m in cfg.methods))
    methods = {}
    for m in cfg.methods:
        sets = per[m]["sets"]
        methods[m] = MethodResult(per[m]["r2"], sets, per[m]["models"],
                                  stability_from_rule_sets(sets, metric), per[m]["secs"])
    return ExperimentReport(cfg, methods, [b.tolist() for b in blocks], fold_info, metric)


def run_sensitivity(data: Dataset, cfg: ExperimentConfig, metric: str = "dsc") -> list[ExperimentReport]:
    """One ``run_cv`` per (gamma, k) pair of the configured grids."""
    if cfg.gamma_grid is None and cfg.k_grid is None:
        raise ConfigError("sensitivity mode needs gamma_grid or k_grid")
    gammas = cfg.gamma_grid if cfg.gamma_grid is not None else (cfg.gamma,)
    ks = cfg.k_grid if cfg.k_grid is not None else (cfg.k,)
    reports = []
    for g in gammas:
        for k in ks:
            log.info("sensitivity: gamma=%g k=%d", g, k)
            reports.append(run_cv(data, replace(cfg, gamma=g, k=k), metric))
    return reports
