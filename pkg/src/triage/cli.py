"""``triage`` command-line entry point.

Exit codes: 0 success or GO, 1 NO-GO, 2 usage or configuration error,
3 data error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import config as config_mod
from .codehealth import DIALECTS, analyze_path
from .costmodel import CostParams, simulate_policy
from .errors import ConfigurationError, TriageError
from .evaluation import (
    ALL_POLICIES,
    draw_pilot,
    dumps_report,
    evaluate,
    pilot_gates,
    rq1_compare,
    summary_table,
)
from .featurestore import FeatureStore, Missing, atomic_write, load_coverage, read_files, update_store
from .outcomes import AsymmetryParams, HealthDistribution, dumps_corpus, generate_corpus, ingest_runs, synthesize_features
from .router import TierModel, build_arrays, make_policy, route_tasks, train_classifier
from .stats import brunner_munzel

EXIT_OK, EXIT_NOGO, EXIT_USAGE, EXIT_DATA = 0, 1, 2, 3
POLICY_CHOICES = ("heuristic", "classifier", "oracle", "always-light", "always-heavy", "random")


def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file")
    common.add_argument("--seed", type=int, help="random seed (overrides config)")
    common.add_argument("--out", help="write output here instead of stdout")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="triage", description="Code-health model-tier routing")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[common], help="per-file sub-factors and health score")
    p.add_argument("paths", nargs="+")
    p.add_argument("--dialect", choices=DIALECTS)
    p.add_argument("--format", choices=("json", "text"), default="json")

    p = sub.add_parser("store", help="feature store maintenance")
    store_sub = p.add_subparsers(dest="store_command", required=True)
    q = store_sub.add_parser("update", parents=[common])
    q.add_argument("paths", nargs="+")
    q.add_argument("--store", default="features.jsonl")
    q.add_argument("--coverage")
    q = store_sub.add_parser("get", parents=[common])
    q.add_argument("paths", nargs="+")
    q.add_argument("--store", default="features.jsonl")

    p = sub.add_parser("route", parents=[common], help="route tasks from a corpus file")
    p.add_argument("task_file")
    p.add_argument("--policy", choices=POLICY_CHOICES, default="heuristic")
    p.add_argument("--model")
    p.add_argument("--store")
    p.add_argument("--thresholds")

    p = sub.add_parser("train", parents=[common], help="train the tier classifier")
    p.add_argument("--corpus", required=True)
    p.add_argument("--store")
    p.add_argument("--costs")

    p = sub.add_parser("gen-corpus", parents=[common], help="synthetic corpus")
    p.add_argument("--n", type=int, default=300)
    p.add_argument("--params", help="JSON file of asymmetry parameters")
    p.add_argument("--null", action="store_true", help="no health signal")
    p.add_argument("--health", default="uniform",
                   help="uniform | bimodal:mu1,mu2,sigma | empirical:<json file>")
    p.add_argument("--features", help="also write a synthetic feature store here")

    p = sub.add_parser("ingest", parents=[common], help="validate a corpus file")
    p.add_argument("file")

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo routing cost")
    p.add_argument("--corpus", required=True)
    p.add_argument("--policy", choices=POLICY_CHOICES, default="heuristic")
    p.add_argument("--costs")
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--resample", action="store_true", help="redraw outcomes from pass_prob")
    p.add_argument("--model")
    p.add_argument("--store")
    p.add_argument("--thresholds")

    p = sub.add_parser("evaluate", parents=[common], help="compare policies")
    p.add_argument("--corpus", required=True)
    p.add_argument("--costs")
    p.add_argument("--policies", default="all")
    p.add_argument("--store")
    p.add_argument("--model")
    p.add_argument("--text", action="store_true", help="print the summary table")

    p = sub.add_parser("pilot", parents=[common], help="go/no-go gates")
    p.add_argument("--corpus", required=True)
    p.add_argument("--costs")
    p.add_argument("--sample", action="store_true",
                   help="draw the configured pilot size from a larger corpus")
    p.add_argument("--store")

    p = sub.add_parser("rq1", parents=[common], help="composite vs top-k sub-factors")
    p.add_argument("--corpus", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--k", default="1,3,5")
    p.add_argument("--costs")

    p = sub.add_parser("stats", help="statistics utilities")
    stats_sub = p.add_subparsers(dest="stats_command", required=True)
    q = stats_sub.add_parser("bm", parents=[common], help="Brunner-Munzel test")
    q.add_argument("--x", required=True)
    q.add_argument("--y", required=True)
    q.add_argument("--alternative", choices=("two-sided", "greater", "less"), default="two-sided")

    p = sub.add_parser("config", parents=[common], help="print the effective configuration")
    return parser


# ---------------------------------------------------------------------------

def _load_config(args) -> config_mod.Config:
    cfg = config_mod.load(args.config) if getattr(args, "config", None) else config_mod.Config()
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "costs", None):
        cfg = replace(cfg, costs=_parse_costs(args.costs))
    if getattr(args, "thresholds", None):
        try:
            values = tuple(float(x) for x in args.thresholds.split(","))
        except ValueError:
            raise ConfigurationError(f"cannot parse thresholds {args.thresholds!r}") from None
        cfg = replace(cfg, thresholds=values)
    return cfg


def _parse_costs(text: str) -> CostParams:
    try:
        return CostParams.parse(text)
    except TriageError as exc:
        raise ConfigurationError(str(exc)) from None


def _require(path: str | None) -> Path:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"no such file: {path}")
    return p


def _store(args, cfg):
    """Open ``--store``; the stored weights apply unless a config file overrides them."""
    if getattr(args, "store", None) is None:
        return None
    return FeatureStore.open(_require(args.store), cfg.weights if args.config else None)


def _emit(args, payload) -> None:
    text = payload if isinstance(payload, str) else json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if getattr(args, "out", None):
        atomic_write(args.out, text)
    else:
        sys.stdout.write(text)


def _policy(name, cfg, args):
    model = None
    if name == "classifier":
        if not args.model:
            raise ConfigurationError("--policy classifier needs --model")
        model = TierModel.load(_require(args.model))
    return make_policy(name, thresholds=cfg.thresholds, model=model)


def cmd_analyze(args, cfg):
    reports = [analyze_path(p, args.dialect, cfg.weights) for p in args.paths]
    if args.format == "json":
        _emit(args, {"schema_version": 1, "files": reports})
        return EXIT_OK
    width = max(len(r["path"]) for r in reports)
    lines = [f"{'path'.ljust(width)}  score  band         cc_max  loc   dup"]
    for r in reports:
        sf = r["sub_factors"]
        lines.append(f"{r['path'].ljust(width)}  {r['score']:5.2f}  {r['band']:<11}  "
                     f"{sf['cyclomatic_max']:6.0f}  {sf['file_loc']:4.0f}  {sf['duplication_ratio']:.2f}")
    _emit(args, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_store(args, cfg):
    if args.store_command == "update":
        store = FeatureStore.open(args.store, cfg.weights if args.config else None)
        coverage = load_coverage(_require(args.coverage)) if args.coverage else None
        summary = update_store(store, read_files(args.paths), coverage=coverage)
        _emit(args, summary.to_json())
        return EXIT_DATA if summary.errors else EXIT_OK
    store = FeatureStore.open(_require(args.store))
    found = store.lookup(args.paths)
    out = [{"path": r.path, "missing": True} if isinstance(r, Missing) else r.to_json() for r in found]
    _emit(args, {"schema_version": 1, "records": out})
    return EXIT_DATA if any(isinstance(r, Missing) for r in found) else EXIT_OK


def cmd_route(args, cfg):
    corpus = ingest_runs(_require(args.task_file))
    store = _store(args, cfg)
    policy = _policy(args.policy.replace("-", "_"), cfg, args)
    decisions = route_tasks(corpus, policy, store, seed=cfg.seed)
    _emit(args, {"schema_version": 1, "decisions": [d.to_json() for d in decisions]})
    return EXIT_OK


def cmd_train(args, cfg):
    corpus = ingest_runs(_require(args.corpus))
    store = _store(args, cfg)
    params = replace(cfg.classifier, seed=cfg.classifier.seed if args.seed is None else args.seed)
    model = train_classifier(corpus, store, params, cfg.costs)
    _emit(args, model.to_json())
    return EXIT_OK


def _health_distribution(text: str) -> HealthDistribution:
    kind, _, rest = text.partition(":")
    if kind == "uniform":
        return HealthDistribution()
    if kind == "bimodal":
        return HealthDistribution("bimodal", tuple(float(x) for x in rest.split(",")))
    if kind == "empirical":
        return HealthDistribution.from_file(_require(rest))
    raise ConfigurationError(f"unknown health distribution {text!r}")


def cmd_gen_corpus(args, cfg):
    params = cfg.asymmetry
    if args.params:
        with open(_require(args.params), encoding="utf-8") as fh:
            params = AsymmetryParams.from_dict(json.load(fh))
    if args.null:
        params = AsymmetryParams.null(seed=params.seed)
    corpus = generate_corpus(args.n, _health_distribution(args.health), params,
                             seed=cfg.seed, n_runs=cfg.n_runs)
    if args.features:
        synthesize_features(corpus, cfg.weights, seed=cfg.seed).save(args.features)
    _emit(args, dumps_corpus(corpus))
    return EXIT_OK


def cmd_ingest(args, cfg):
    corpus = ingest_runs(_require(args.file))
    _emit(args, {"schema_version": 1, "n_tasks": len(corpus), "total_runs": corpus.total_runs,
                 "runs_per_tier": corpus[0].n_runs if corpus else 0})
    return EXIT_OK


def cmd_simulate(args, cfg):
    corpus = ingest_runs(_require(args.corpus))
    store = _store(args, cfg)
    policy = _policy(args.policy.replace("-", "_"), cfg, args)
    arrays = build_arrays(corpus, store)
    result = simulate_policy(arrays, policy, cfg.costs, seed=cfg.seed, n_trials=args.trials,
                             resample=args.resample or None)
    out = result.to_json()
    out["schema_version"] = 1
    out["policy"] = policy.name
    _emit(args, out)
    return EXIT_OK


def cmd_evaluate(args, cfg):
    corpus = ingest_runs(_require(args.corpus))
    store = _store(args, cfg)
    policies = ALL_POLICIES if args.policies == "all" else tuple(
        p.strip().replace("-", "_") for p in args.policies.split(","))
    unknown = set(policies) - set(ALL_POLICIES)
    if unknown:
        raise ConfigurationError(f"unknown policies: {sorted(unknown)}")
    model = TierModel.load(_require(args.model)) if args.model else None
    report = evaluate(corpus, policies, cfg.costs, cfg.eval_config(), store, model)
    _emit(args, summary_table(report) if args.text else dumps_report(report))
    return EXIT_OK


def cmd_pilot(args, cfg):
    corpus = ingest_runs(_require(args.corpus))
    if args.sample:
        corpus = draw_pilot(corpus, cfg.pilot.size, cfg.seed)
    store = _store(args, cfg)
    pilot_cfg = replace(cfg.pilot, thresholds=cfg.thresholds)
    report = pilot_gates(corpus, cfg.costs, pilot_cfg, store)
    out = report.to_json()
    out["schema_version"] = 1
    _emit(args, out)
    return EXIT_OK if report.go else EXIT_NOGO


def cmd_rq1(args, cfg):
    corpus = ingest_runs(_require(args.corpus))
    store = FeatureStore.open(_require(args.store))
    try:
        k_list = [int(k) for k in args.k.split(",") if k.strip()]
    except ValueError:
        raise ConfigurationError(f"cannot parse --k {args.k!r}") from None
    table = rq1_compare(corpus, store, k_list, cfg.costs, cfg.classifier, seed=cfg.seed)
    _emit(args, table)
    return EXIT_OK


def _read_sample(path) -> list[float]:
    text = _require(path).read_text(encoding="utf-8").strip()
    if text.startswith("["):
        return [float(x) for x in json.loads(text)]
    return [float(x) for x in text.replace(",", " ").split()]


def cmd_stats(args, cfg):
    result = brunner_munzel(_read_sample(args.x), _read_sample(args.y), args.alternative)
    out = result.to_json()
    out["schema_version"] = 1
    _emit(args, out)
    return EXIT_OK


def cmd_config(args, cfg):
    _emit(args, config_mod.dumps(cfg))
    return EXIT_OK


COMMANDS = {
    "analyze": cmd_analyze, "store": cmd_store, "route": cmd_route, "train": cmd_train,
    "gen-corpus": cmd_gen_corpus, "ingest": cmd_ingest, "simulate": cmd_simulate,
    "evaluate": cmd_evaluate, "pilot": cmd_pilot, "rq1": cmd_rq1, "stats": cmd_stats,
    "config": cmd_config,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        cfg = _load_config(args)
        return COMMANDS[args.command](args, cfg)
    except ConfigurationError as exc:
        print(f"triage: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TriageError, OSError, ValueError) as exc:
        print(f"triage: error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
