"""Command-line entry point.

Subcommands: ``rules``, ``pareto``, ``fit``, ``cv``, ``stability`` and
``predict``. Settings are resolved as flags > ``--config`` file > defaults.
Exit codes: 0 on success, 1 on user error, 2 on solver failure (the error
is written to stderr as one JSON object).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .data import (CandidatePool, Dataset, RuleModel, build_prediction_matrix, dump_json, load_dataset,
                   load_json, read_csv)
from .errors import ConfigError, DataError, MossError, SolverError
from .evaluation import METHODS, ExperimentConfig, ExperimentReport, run_cv, run_sensitivity
from .heuristic import CDConfig, fit_target_k, lambda1_max, solve_cd
from .master import BACKENDS
from .rules import ForestConfig, generate_pool
from .solver import compute_pareto, epsilon_sequence, solve_fixed_epsilon, stability_select_topk
from .stability import METRICS, empirical_stability, similarity_matrix

log = logging.getLogger("moss")

LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


class UserError(Exception):
    """Bad flags, files or config; exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UserError(f"{self.prog}: {message}")


# ---------------------------------------------------------------- arguments

def _csv_list(kind):
    def parse(text):
        try:
            return tuple(kind(v) for v in str(text).split(",") if v.strip())
        except ValueError:
            raise argparse.ArgumentTypeError(f"cannot parse {text!r} as a comma-separated list") from None
    return parse


def _add_common(p):
    p.add_argument("--config", help="key=value file; flags override it")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1, help="worker cap for forest fitting")


def _add_data(p, required=True):
    p.add_argument("--data", required=required, help="CSV with a header row")
    p.add_argument("--target", required=required, help="name of the response column")


def _add_forest(p):
    g = p.add_argument_group("rule generation")
    g.add_argument("--trees", type=int, default=500)
    g.add_argument("--depth", type=int, default=2)
    g.add_argument("--mtry", type=int, default=None)
    g.add_argument("--min-leaf", type=int, default=5)
    g.add_argument("--quantiles", type=int, default=10)
    g.add_argument("--max-rules", type=int, default=1000)
    g.add_argument("--noise-sigma", type=float, default=0.0)
    g.add_argument("--leaf-rules-only", action="store_true",
                   help="extract leaf paths only instead of every node path")
    g.add_argument("--pool", help="reuse a pool JSON written by `rules` instead of growing a forest")


def _add_model(p):
    p.add_argument("--k", type=int, default=15)
    p.add_argument("--gamma", type=float, default=1e-3)
    p.add_argument("--time-limit", type=float, default=None,
                   help="seconds allowed per epsilon for the exact solver (default: no limit)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="moss", description="Stable and accurate decision-rule sets.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("rules", help="grow a forest and write the candidate pool")
    _add_common(p)
    _add_data(p)
    _add_forest(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("pareto", help="trace the stability/loss frontier")
    _add_common(p)
    _add_data(p)
    _add_forest(p)
    _add_model(p)
    p.add_argument("--eps-count", type=int, default=None, help="solve the first N epsilon values")
    p.add_argument("--eps-indices", type=_csv_list(int), default=None, help="1-based positions, e.g. 1,3,40")
    p.add_argument("--no-reuse", action="store_true", help="solve every epsilon from scratch")
    p.add_argument("--backend", choices=BACKENDS, default="bnb")
    p.add_argument("--out", required=True)
    p.add_argument("--csv", help="also write epsilon,h1,h2,support_size rows here")

    p = sub.add_parser("fit", help="fit one rule model")
    _add_common(p)
    _add_data(p)
    _add_forest(p)
    _add_model(p)
    p.add_argument("--method", choices=("moss", "cd", "topk"), default="moss")
    p.add_argument("--epsilon", type=float, default=None, help="stability floor for --method moss")
    p.add_argument("--eps-index", type=int, default=None, help="1-based position in the epsilon sequence")
    p.add_argument("--lambda1", type=float, default=None, help="fixed L0 weight for --method cd")
    p.add_argument("--lambda2", type=float, default=None,
                   help="stability reward for --method cd (default: 0.1 x lambda1_max at lambda2=0)")
    p.add_argument("--backend", choices=BACKENDS, default="bnb")
    p.add_argument("--out", required=True)

    p = sub.add_parser("cv", help="k-fold cross-validation of the rule-set methods")
    _add_common(p)
    _add_data(p)
    _add_forest(p)
    _add_model(p)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--methods", type=_csv_list(str), default=METHODS)
    p.add_argument("--metric", choices=METRICS, default="dsc")
    p.add_argument("--eps-high", type=int, default=3)
    p.add_argument("--eps-mid", type=int, default=40)
    p.add_argument("--lambda2-ratio", type=float, default=0.1)
    p.add_argument("--gamma-grid", type=_csv_list(float), default=None)
    p.add_argument("--k-grid", type=_csv_list(int), default=None)
    p.add_argument("--timing", action="store_true", help="include wall-clock seconds in the report")
    p.add_argument("--emit-csv", help="append one summary row per report to this CSV")
    p.add_argument("--out", required=True)

    p = sub.add_parser("stability", help="empirical stability of rule-set files")
    p.add_argument("--config", help=argparse.SUPPRESS)
    p.add_argument("--metric", choices=METRICS, default="dsc")
    p.add_argument("files", nargs="+", help="rule-set, model or pool JSON files")

    p = sub.add_parser("predict", help="apply a model JSON to new rows")
    p.add_argument("--config", help=argparse.SUPPRESS)
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    return parser


def read_config(path) -> dict:
    """``key = value`` lines; ``#`` starts a comment; keys may use dashes."""
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as e:
        raise UserError(f"cannot read config {path}: {e.strerror}") from None
    for lineno, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UserError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _subparser(parser, name):
    for action in parser._subparsers._group_actions:
        if name in action.choices:
            return action.choices[name]
    raise KeyError(name)


def parse_args(argv) -> argparse.Namespace:
    parser = build_parser()
    command = argv[0] if argv and argv[0] in COMMANDS else None
    if command is None:
        return parser.parse_args(argv)
    pre = _Parser(add_help=False)
    pre.add_argument("--config")
    config = pre.parse_known_args(argv[1:])[0].config
    if not config:
        return parser.parse_args(argv)
    sub = _subparser(parser, command)
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, raw in read_config(config).items():
        a = actions.get(key)
        if a is None or key in ("config", "help"):
            raise UserError(f"{config}: unknown key {key!r} for `{command}`")
        if a.nargs == 0:  # store_true
            value = raw.lower() in ("1", "true", "yes", "on")
        else:
            try:
                value = a.type(raw) if a.type else raw
            except (ValueError, argparse.ArgumentTypeError):
                raise UserError(f"{config}: bad value {raw!r} for {key!r}") from None
            if a.choices is not None and value not in a.choices:
                raise UserError(f"{config}: {key}={raw!r} is not one of {list(a.choices)}")
        defaults[key] = value
    # required flags may now come from the file; explicit flags still win over these defaults
    for a in sub._actions:
        if a.dest in defaults:
            a.required = False
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


# ------------------------------------------------------------------ helpers

def _forest_config(ns) -> ForestConfig:
    return ForestConfig(n_trees=ns.trees, max_depth=ns.depth, mtry=ns.mtry, min_leaf=ns.min_leaf,
                        n_quantiles=ns.quantiles, max_rules=ns.max_rules,
                        response_noise_sigma=ns.noise_sigma, seed=ns.seed,
                        interior_rules=not ns.leaf_rules_only, n_jobs=max(1, ns.threads))


def _pool(ns, data: Dataset) -> CandidatePool:
    if ns.pool:
        return CandidatePool.from_dict(load_json(ns.pool))
    return generate_pool(data, _forest_config(ns))


def _problem(ns):
    data = load_dataset(ns.data, ns.target)
    pool = _pool(ns, data)
    pm = build_prediction_matrix(pool, data, ns.gamma)
    return data, pool, pm, pm.center(data.target)


def _write_frontier_csv(frontier, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epsilon", "h1", "h2", "support_size"])
        for p in frontier.points:
            w.writerow([repr(p.epsilon), repr(p.h1), repr(p.h2), p.size])


def _rule_sets_from_json(obj) -> list:
    """Accept a bare rule list, ``{"rules": [...]}`` (model, pool or rule-set
    file) and return the list of split lists."""
    rules = obj["rules"] if isinstance(obj, dict) else obj
    if not isinstance(rules, list):
        raise DataError("expected a list of rules or an object with a 'rules' list")
    out = []
    for r in rules:
        splits = r["splits"] if isinstance(r, dict) else r
        out.append(tuple((int(s["feature"]), s["op"], float(s["threshold"])) for s in splits))
    return out


# ---------------------------------------------------------------- commands

def cmd_rules(ns) -> None:
    data = load_dataset(ns.data, ns.target)
    pool = generate_pool(data, _forest_config(ns))
    d = pool.to_dict()
    d["meta"]["feature_names"] = list(data.feature_names)
    dump_json(d, ns.out)
    log.info("wrote %d rules to %s", pool.m, ns.out)


def cmd_pareto(ns) -> None:
    _, pool, pm, yc = _problem(ns)
    E = epsilon_sequence(pool, ns.k)
    if ns.eps_indices:
        pos = sorted(set(ns.eps_indices))
        if pos[0] < 1 or pos[-1] > len(E):
            raise UserError(f"--eps-indices must lie in [1, {len(E)}]")
        eps = [E.values[i - 1] for i in pos]
    else:
        count = len(E) if ns.eps_count is None else ns.eps_count
        if count < 1:
            raise UserError("--eps-count must be positive")
        eps = list(E.values[:count])
    frontier = compute_pareto(pool, pm, yc, ns.k, eps, reuse_cuts=not ns.no_reuse, backend=ns.backend,
                              time_limit=ns.time_limit)
    for p in frontier.points:
        log.debug("eps=%.6g iterations=%d new_cuts=%d nodes=%d", p.epsilon, p.meta["iterations"],
                  p.meta["new_cuts"], p.meta["nodes"])
    d = frontier.to_dict()
    d.update(k=ns.k, gamma=ns.gamma, eps_len=len(E), eps_max=E.eps_max)
    dump_json(d, ns.out)
    if ns.csv:
        _write_frontier_csv(frontier, ns.csv)


def cmd_fit(ns) -> None:
    data, pool, pm, yc = _problem(ns)
    if ns.method == "moss":
        if (ns.epsilon is None) == (ns.eps_index is None):
            raise UserError("--method moss needs exactly one of --epsilon and --eps-index")
        eps = ns.epsilon
        if ns.eps_index is not None:
            if ns.eps_index < 1:
                raise UserError("--eps-index is 1-based")
            eps = epsilon_sequence(pool, ns.k).element(ns.eps_index)
        sol, _ = solve_fixed_epsilon(pool, pm, yc, ns.k, eps, backend=ns.backend, time_limit=ns.time_limit)
    elif ns.method == "cd":
        lam2 = ns.lambda2
        if lam2 is None:
            lam2 = 0.1 * lambda1_max(pm, yc, pool.pi, ns.gamma, 0.0)
        if ns.lambda1 is not None:
            sol = solve_cd(pm, yc, pool.pi, CDConfig(ns.lambda1, lam2, ns.gamma))
        else:
            sol = fit_target_k(pm, yc, pool.pi, ns.gamma, lam2, ns.k)
    else:
        sol = stability_select_topk(pool, ns.k, pm, yc)
    model = RuleModel.from_solution(sol, pool, pm, data.feature_names)
    d = model.to_dict()
    if sol.method == "cd":
        d.update(lambda1=sol.meta["lambda1"], lambda2=sol.meta["lambda2"], converged=sol.meta["converged"])
    dump_json(d, ns.out)


def _write_rule_set_files(report: ExperimentReport, base: Path) -> dict:
    base.mkdir(parents=True, exist_ok=True)
    index = {}
    for name, res in report.methods.items():
        paths = []
        for f, rs in enumerate(res.rule_sets):
            path = base / f"{name}_fold{f:02d}.json"
            dump_json({"method": name, "fold": f, "rules": rs}, path)
            paths.append(path.name)
        index[name] = paths
    return index


def cmd_cv(ns) -> None:
    data = load_dataset(ns.data, ns.target)
    cfg = ExperimentConfig(folds=ns.folds, k=ns.k, gamma=ns.gamma, methods=ns.methods,
                           forest=_forest_config(ns), gamma_grid=ns.gamma_grid, k_grid=ns.k_grid,
                           seed=ns.seed, eps_high=ns.eps_high, eps_mid=ns.eps_mid,
                           lambda2_ratio=ns.lambda2_ratio, time_limit=ns.time_limit)
    sweep = cfg.gamma_grid is not None or cfg.k_grid is not None
    reports = run_sensitivity(data, cfg, ns.metric) if sweep else [run_cv(data, cfg, ns.metric)]
    out = Path(ns.out)
    stem = out.with_suffix("")
    docs = []
    for i, rep in enumerate(reports):
        d = rep.to_dict(timing=ns.timing)
        base = Path(f"{stem}_rulesets") if not sweep else Path(f"{stem}_rulesets") / f"run{i:02d}"
        d["rule_set_files"] = {"directory": os.path.relpath(base, out.parent or "."),
                               "files": _write_rule_set_files(rep, base)}
        docs.append(d)
    dump_json(docs[0] if not sweep else {"runs": docs}, out)
    if ns.emit_csv:
        path = Path(ns.emit_csv)
        new = not path.exists() or path.stat().st_size == 0
        with open(path, "a", encoding="utf-8") as fh:
            if new:
                fh.write(ExperimentReport.csv_header() + "\n")
            for rep in reports:
                label = Path(ns.data).stem
                if sweep:
                    label += f"[gamma={rep.config.gamma!r};k={rep.config.k}]"
                fh.write(rep.csv_row(label) + "\n")


def cmd_stability(ns) -> None:
    sets = []
    for path in ns.files:
        sets.append(set(_rule_sets_from_json(load_json(path))))
    value = empirical_stability(sets, ns.metric)
    S = similarity_matrix(sets, ns.metric)
    out = sys.stdout
    out.write(f"{ns.metric},{value!r}\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow([""] + list(ns.files))
    for path, row in zip(ns.files, S):
        w.writerow([path] + [repr(float(v)) for v in row])


def _prediction_features(model: RuleModel, path) -> np.ndarray:
    X, header, _ = read_csv(path)
    names = list(model.feature_names)
    if names and all(n in header for n in names):
        return X[:, [header.index(n) for n in names]]
    p = 1 + max((s.feature for r in model.rules for s in r.splits), default=-1)
    if names and X.shape[1] != len(names):
        raise DataError(f"{path}: header {header} lacks the model's features {names}")
    if X.shape[1] < p:
        raise DataError(f"{path}: {X.shape[1]} columns, but the model uses feature index {p - 1}")
    return X


def cmd_predict(ns) -> None:
    try:
        model = RuleModel.from_dict(load_json(ns.model))
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"{ns.model}: not a model file ({e})") from None
    yhat = model.predict(_prediction_features(model, ns.data))
    with open(ns.out, "w", newline="", encoding="utf-8") as fh:
        fh.write("prediction\n")
        for v in yhat:
            fh.write(repr(float(v)) + "\n")


COMMANDS = {"rules": cmd_rules, "pareto": cmd_pareto, "fit": cmd_fit, "cv": cmd_cv,
            "stability": cmd_stability, "predict": cmd_predict}


def _setup_logging() -> None:
    level = os.environ.get("MOSS_LOG", "error").strip().lower()
    if level not in LOG_LEVELS:
        raise UserError(f"MOSS_LOG must be one of {sorted(LOG_LEVELS)}, got {level!r}")
    logging.basicConfig(level=LOG_LEVELS[level], format="%(name)s %(levelname)s: %(message)s",
                        stream=sys.stderr, force=True)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        _setup_logging()
        ns = parse_args(argv)
        if getattr(ns, "threads", 1) < 1:
            raise UserError("--threads must be at least 1")
        COMMANDS[ns.command](ns)
    except SolverError as e:
        sys.stderr.write(json.dumps(e.to_dict(), default=float) + "\n")
        return 2
    except (UserError, MossError) as e:
        sys.stderr.write(f"moss: error: {e}\n")
        return 1
    except (ConfigError, ValueError, KeyError) as e:
        sys.stderr.write(f"moss: error: {e}\n")
        return 1
    except OSError as e:
        sys.stderr.write(f"moss: error: {e.filename}: {e.strerror}\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
