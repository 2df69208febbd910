"""Evaluation protocol: policy comparison, coverage strata, pilot go/no-go
gates and the composite-versus-sub-factor (RQ1) study."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .codehealth import HEALTHY_MIN, PROBLEMATIC_MIN, SUB_FACTORS
from .costmodel import CostParams, GateVerdict, cost_gate, expected_cost, realized_mix, task_costs
from .errors import DomainError, RoutingError, TrainingError
from .featurestore import FeatureStore
from .router import (
    DEFAULT_THRESHOLDS,
    BaselinePolicy,
    ClassifierParams,
    ClassifierPolicy,
    HeuristicPolicy,
    OraclePolicy,
    TierModel,
    build_arrays,
    oracle_tiers,
    split_ids,
    train_classifier,
)
from .stats import (
    EffectResult,
    brunner_munzel,
    confusion_matrix,
    matched_pairs,
    mcc,
    prob_superiority,
    shapley_importance,
)
from .tasks import CorpusArrays, Tier, subset

SCHEMA_VERSION = 1
ALL_POLICIES = ("heuristic", "classifier", "oracle", "always_light", "always_heavy", "random")
P_HAT_THRESHOLD = 0.56
PILOT_SIZE = 50
PILOT_MIN_SIZE = 20


@dataclass(frozen=True)
class PilotConfig:
    size: int = PILOT_SIZE
    min_size: int = PILOT_MIN_SIZE
    p_hat_threshold: float = P_HAT_THRESHOLD
    cost_ratio: float | None = None
    thresholds: tuple = DEFAULT_THRESHOLDS
    primary_grouping: str = "verdict"

    def __post_init__(self):
        if self.min_size < 1 or self.size < self.min_size:
            raise DomainError("pilot sizes need 1 <= min_size <= size")
        if self.primary_grouping not in ("verdict", "band"):
            raise DomainError("primary_grouping must be 'verdict' or 'band'")
        if self.cost_ratio is not None and not 0.0 < self.cost_ratio < 1.0:
            raise DomainError("cost_ratio override must lie in (0, 1)")


@dataclass(frozen=True)
class EvalConfig:
    coverage_edges: tuple = (0.3, 0.7)
    folds: int = 5
    caliper: float | None = None
    seed: int = 0
    thresholds: tuple = DEFAULT_THRESHOLDS
    classifier: ClassifierParams = field(default_factory=ClassifierParams)
    pilot: PilotConfig = field(default_factory=PilotConfig)


# ---------------------------------------------------------------------------
# metrics

def policy_metrics(tiers, verdicts, oracle, costs: CostParams) -> dict:
    tiers = np.asarray(tiers, dtype=int)
    n = len(tiers)
    cost, success = task_costs(tiers, verdicts, costs)
    n_success = int(success.sum())
    mix = realized_mix(tiers, verdicts)
    total = float(cost.sum())
    realized = total / n if n else 0.0
    return {
        "n_tasks": n,
        "n_successes": n_success,
        "success_rate": n_success / n if n else 0.0,
        "total_cost": total,
        "realized_cost": realized,
        "expected_cost": expected_cost(costs, mix),
        "savings_vs_heavy": costs.c_H - realized,
        "cost_per_successful_task": total / n_success if n_success else None,
        "triage_accuracy": int((tiers == oracle).sum()) / n if n else 0.0,
        "over_triage_rate": int((tiers > oracle).sum()) / n if n else 0.0,
        "under_triage_rate": int((tiers < oracle).sum()) / n if n else 0.0,
        "n_correct": int((tiers == oracle).sum()),
        "n_over": int((tiers > oracle).sum()),
        "n_under": int((tiers < oracle).sum()),
        "mix": mix.as_dict(),
        "routed": {t.label: int((tiers == t).sum()) for t in Tier},
    }


def coverage_strata(coverage: np.ndarray, edges=(0.3, 0.7)) -> dict[str, np.ndarray]:
    """Masks for [0, e1), [e1, e2), ..., [e_k, 1] and an ``unknown`` stratum."""
    bounds = [0.0, *edges, 1.0]
    known = ~np.isnan(coverage)
    strata = {}
    for i, (lo, hi) in enumerate(zip(bounds[:-1], bounds[1:])):
        last = i == len(bounds) - 2
        label = f"[{lo:g}, {hi:g}]" if last else f"[{lo:g}, {hi:g})"
        with np.errstate(invalid="ignore"):
            upper = coverage <= hi if last else coverage < hi
            strata[label] = known & (coverage >= lo) & upper
    strata["unknown"] = ~known
    return strata


# ---------------------------------------------------------------------------
# pilot gates

@dataclass
class GateReport:
    cost: GateVerdict
    signal: GateVerdict
    n_tasks: int
    n_routed_light: int
    signal_by_verdict: float | None
    signal_by_band: float | None
    bm: EffectResult | None
    notes: list = field(default_factory=list)

    @property
    def go(self) -> bool:
        return self.cost.passed and self.signal.passed

    def to_json(self) -> dict:
        return {
            "verdict": "GO" if self.go else "NO-GO",
            "cost_gate": self.cost.as_dict(),
            "signal_gate": self.signal.as_dict(),
            "n_tasks": self.n_tasks,
            "n_routed_light": self.n_routed_light,
            "p_hat_by_verdict": self.signal_by_verdict,
            "p_hat_by_band": self.signal_by_band,
            "brunner_munzel": None if self.bm is None else self.bm.to_json(),
            "notes": list(self.notes),
        }


def go_decision(cost: GateVerdict, signal: GateVerdict) -> bool:
    return cost.passed and signal.passed


def signal_gate(p_hat: float | None, threshold: float = P_HAT_THRESHOLD) -> GateVerdict:
    """At least a small effect: p_hat >= threshold (closed)."""
    if p_hat is None:
        return GateVerdict(False, math.nan, threshold, "p_hat >= threshold")
    return GateVerdict(p_hat >= threshold, p_hat, threshold, "p_hat >= threshold")


def gate_report(arrays: CorpusArrays, costs: CostParams, cfg: PilotConfig | None = None) -> GateReport:
    """Cost and signal gates on light-versus-heavy outcomes (no size check)."""
    cfg = cfg or PilotConfig()
    verdicts = arrays.verdicts
    light_pass = verdicts[:, Tier.LIGHT]
    health = arrays.health
    notes = []

    t_light = cfg.thresholds[0]
    routed_light = health >= t_light
    n_light = int(routed_light.sum())
    if n_light:
        rate = float(light_pass[routed_light].mean())
    else:
        rate = 0.0
        notes.append("no task was routed light; cost gate cannot pass")
    if cfg.cost_ratio is None:
        cost = cost_gate(rate, costs.c_L, costs.c_H)
    else:
        cost = cost_gate(rate, cfg.cost_ratio, 1.0)

    known = ~np.isnan(health)
    xs, ys = health[known & light_pass], health[known & ~light_pass]
    by_verdict = prob_superiority(xs, ys) if len(xs) and len(ys) else None
    if by_verdict is None:
        notes.append("light tier passed or failed every task; verdict-grouped p_hat undefined")
    bm = brunner_munzel(xs, ys) if len(xs) >= 2 and len(ys) >= 2 else None

    high = known & (health >= HEALTHY_MIN)
    low = known & (health < PROBLEMATIC_MIN)
    by_band = None
    if high.any() and low.any():
        by_band = prob_superiority(light_pass[high].astype(float), light_pass[low].astype(float))
    primary = by_verdict if cfg.primary_grouping == "verdict" else by_band
    signal = signal_gate(primary, cfg.p_hat_threshold)
    return GateReport(cost, signal, len(arrays), n_light, by_verdict, by_band, bm, notes)


def draw_pilot(corpus, size: int = PILOT_SIZE, seed: int = 0):
    """Seeded sample of ``size`` tasks (all tasks when the corpus is smaller)."""
    tasks = sorted(corpus, key=lambda t: t.task_id)
    if len(tasks) <= size:
        return tasks
    idx = np.sort(np.random.default_rng(seed).choice(len(tasks), size, replace=False))
    return [tasks[i] for i in idx]


def pilot_gates(corpus, costs: CostParams | None = None, cfg: PilotConfig | None = None,
                store: FeatureStore | None = None) -> GateReport:
    """Go/no-go on a pilot corpus; GO requires both the cost and signal gates.

    Corpora smaller than ``cfg.min_size`` are refused. The gates use every
    task given; :func:`draw_pilot` carves the nominal pilot out of a larger
    corpus.
    """
    cfg = cfg or PilotConfig()
    costs = costs or CostParams()
    n = len(corpus)
    if n < cfg.min_size:
        raise DomainError(f"pilot corpus has {n} tasks; at least {cfg.min_size} are required")
    arrays = build_arrays(corpus, store)
    if arrays.runs is None:
        raise DomainError("pilot corpus needs light and heavy outcomes for every task")
    report = gate_report(arrays, costs, cfg)
    if n != cfg.size:
        report.notes.append(f"pilot ran on {n} tasks (nominal size {cfg.size})")
    return report


# ---------------------------------------------------------------------------
# policy comparison

def cross_fit_classifier(arrays: CorpusArrays, costs: CostParams, cfg: EvalConfig):
    """Out-of-fold classifier routes: each fold is routed by a model trained
    on the remaining folds. Folds that cannot be trained route Heavy."""
    n = len(arrays)
    tiers = np.full(n, int(Tier.HEAVY))
    notes = []
    k = max(2, min(cfg.folds, n))
    order = np.random.default_rng(cfg.seed).permutation(n)
    for f, fold in enumerate(np.array_split(order, k)):
        rest = np.setdiff1d(np.arange(n), fold)
        try:
            model = train_classifier(None, params=cfg.classifier, costs=costs,
                                     arrays=subset(arrays, rest))
        except TrainingError as exc:
            notes.append(f"fold {f}: {exc}; routed heavy")
            continue
        tiers[np.sort(fold)] = ClassifierPolicy(model).assign(subset(arrays, np.sort(fold)))
    return tiers, notes


def matched_effect(arrays: CorpusArrays, cfg: EvalConfig) -> dict:
    """Light-tier success of Healthy versus Unhealthy tasks matched on patch size."""
    h = arrays.health
    high = {arrays.task_ids[i]: arrays.patch_size[i] for i in np.flatnonzero(h >= HEALTHY_MIN)}
    low = {arrays.task_ids[i]: arrays.patch_size[i] for i in np.flatnonzero(h < PROBLEMATIC_MIN)}
    if not high or not low:
        return {"n_pairs": 0, "effect": None, "note": "a health group is empty"}
    match = matched_pairs(high, low, cfg.caliper)
    index = {tid: i for i, tid in enumerate(arrays.task_ids)}
    light = arrays.verdicts[:, Tier.LIGHT].astype(float)
    xs = [light[index[a]] for a, _, _ in match.pairs]
    ys = [light[index[b]] for _, b, _ in match.pairs]
    out = {"n_pairs": len(match.pairs), "caliper": match.caliper,
           "unmatched_high": len(match.unmatched_high), "unmatched_low": len(match.unmatched_low),
           "pairs": [[a, b] for a, b, _ in match.pairs], "effect": None}
    if len(xs) >= 2:
        out["effect"] = brunner_munzel(xs, ys).to_json()
    elif xs:
        out["effect"] = {"p_hat": prob_superiority(xs, ys)}
    return out


def evaluate(corpus, policies=ALL_POLICIES, costs: CostParams | None = None,
             cfg: EvalConfig | None = None, store: FeatureStore | None = None,
             model: TierModel | None = None) -> dict:
    """Route the corpus under every policy and collect protocol metrics."""
    cfg = cfg or EvalConfig()
    costs = costs or CostParams()
    if not corpus:
        raise DomainError("corpus is empty")
    arrays = build_arrays(corpus, store)
    if arrays.runs is None:
        raise DomainError("evaluation needs recorded outcomes for every task")
    verdicts = arrays.verdicts
    oracle = oracle_tiers(verdicts)
    strata_masks = coverage_strata(arrays.coverage, cfg.coverage_edges)
    notes = []
    results = {}
    for i, name in enumerate(policies):
        name = name.replace("-", "_")
        rng = np.random.default_rng([cfg.seed, i])
        if name == "classifier":
            if model is not None:
                tiers = ClassifierPolicy(model).assign(arrays)
            else:
                tiers, fold_notes = cross_fit_classifier(arrays, costs, cfg)
                notes.extend(f"classifier {m}" for m in fold_notes)
        elif name == "heuristic":
            tiers = HeuristicPolicy(cfg.thresholds).assign(arrays)
        elif name == "oracle":
            tiers = OraclePolicy().assign(arrays, verdicts)
        else:
            tiers = BaselinePolicy(name).assign(arrays, verdicts, rng)
        metrics = policy_metrics(tiers, verdicts, oracle, costs)
        metrics["strata"] = {
            label: policy_metrics(tiers[mask], verdicts[mask], oracle[mask], costs)
            for label, mask in strata_masks.items() if mask.any()
        }
        results[name] = metrics
    all_fail = [arrays.task_ids[i] for i in np.flatnonzero(~verdicts.any(axis=1))]
    gates = gate_report(arrays, costs, cfg.pilot)
    return {
        "schema_version": SCHEMA_VERSION,
        "costs": list(costs.as_tuple()),
        "n_tasks": len(arrays),
        "n_runs_per_tier": arrays.n_runs,
        "oracle_distribution": {t.label: int((oracle == t).sum()) for t in Tier},
        "all_tiers_fail": all_fail,
        "policies": results,
        "matched_pairs": matched_effect(arrays, cfg),
        "gates": gates.to_json(),
        # per-run rates are diagnostics only; every metric above uses majority verdicts
        "diagnostics": {"per_run_pass_rate": {
            t.label: sum(sum(task.runs[t]) for task in corpus) / sum(task.n_runs for task in corpus)
            for t in Tier}},
        "notes": notes,
    }


def dumps_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"


def summary_table(report: dict) -> str:
    header = ("policy", "success", "cost/task", "cost/success", "accuracy", "over", "under")
    rows = [header]
    for name, m in report["policies"].items():
        cps = m["cost_per_successful_task"]
        rows.append((name, f"{m['success_rate']:.3f}", f"{m['realized_cost']:.3f}",
                     "-" if cps is None else f"{cps:.3f}", f"{m['triage_accuracy']:.3f}",
                     f"{m['over_triage_rate']:.3f}", f"{m['under_triage_rate']:.3f}"))
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) if j == 0 else c.rjust(w) for j, (c, w) in enumerate(zip(r, widths)))
             for r in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    gates = report.get("gates")
    if gates:
        lines.append("")
        observed = gates["signal_gate"]["observed"]
        shown = "undefined" if observed is None else f"{observed:.3f}"
        lines.append(f"pilot gates: {gates['verdict']} (cost {gates['cost_gate']['observed']:.3f} "
                     f"> {gates['cost_gate']['threshold']:.3f}: {gates['cost_gate']['passed']}, "
                     f"signal p_hat {shown} >= "
                     f"{gates['signal_gate']['threshold']:.2f}: {gates['signal_gate']['passed']})")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# RQ1

def _routed_mcc(model: TierModel, arrays: CorpusArrays) -> float:
    tiers = ClassifierPolicy(model).assign(arrays)
    return mcc(confusion_matrix(oracle_tiers(arrays.verdicts), tiers))


def classifier_value_fn(arrays: CorpusArrays, costs: CostParams, params: ClassifierParams,
                        fraction: float = 0.3, seed: int = 0):
    """Set function for Shapley importance: held-out MCC of a classifier
    retrained on the given feature subset."""
    fit_idx, val_idx = split_ids(arrays.task_ids, fraction, seed)
    fit, val = subset(arrays, fit_idx), subset(arrays, val_idx)

    def value(features) -> float:
        names = tuple(n for n in SUB_FACTORS + ("composite", "patch_size", "coverage")
                      if n in features)
        try:
            model = train_classifier(None, params=params, costs=costs, feature_names=names,
                                     arrays=fit)
        except TrainingError:
            return 0.0
        return _routed_mcc(model, val)

    return value


def rq1_compare(corpus, store: FeatureStore, k_list=(1, 3, 5), costs: CostParams | None = None,
                params: ClassifierParams | None = None, holdout_fraction: float = 0.3,
                seed: int = 0) -> dict:
    """Top-k sub-factor classifiers versus the composite-only classifier.

    Sub-factors are ranked by exact Shapley importance on the training split;
    every variant is then retrained on that split and scored on the held-out
    split by routing MCC and realized savings over always-heavy.
    """
    costs = costs or CostParams()
    params = params or ClassifierParams()
    k_list = list(k_list)
    for k in k_list:
        if not 1 <= k <= len(SUB_FACTORS):
            raise DomainError(f"k={k} outside 1..{len(SUB_FACTORS)} available sub-factors")
    table = {"schema_version": SCHEMA_VERSION, "ranking": [], "variants": []}
    if not k_list:
        return table
    arrays = build_arrays(corpus, store)
    if arrays.runs is None:
        raise DomainError("RQ1 needs recorded outcomes")
    complete = ~np.isnan(np.column_stack([arrays.features[n] for n in SUB_FACTORS])).any(axis=1)
    if not complete.all():
        raise RoutingError(f"{int((~complete).sum())} tasks lack sub-factor records in the store")
    train_idx, hold_idx = split_ids(arrays.task_ids, holdout_fraction, seed)
    train, hold = subset(arrays, train_idx), subset(arrays, hold_idx)
    ranking = shapley_importance(SUB_FACTORS, classifier_value_fn(train, costs, params, seed=seed))
    table["ranking"] = [{"feature": f, "shapley": v} for f, v in ranking]

    def score(label: str, names) -> dict:
        model = train_classifier(None, params=params, costs=costs, feature_names=names, arrays=train)
        tiers = ClassifierPolicy(model).assign(hold)
        cost, _ = task_costs(tiers, hold.verdicts, costs)
        return {"variant": label, "features": list(names), "tau": model.tau,
                "mcc": mcc(confusion_matrix(oracle_tiers(hold.verdicts), tiers)),
                "savings": costs.c_H - float(cost.mean())}

    for k in k_list:
        table["variants"].append(score(f"top-{k}", tuple(f for f, _ in ranking[:k])))
    table["variants"].append(score("composite", ("composite",)))
    table["n_train"] = len(train)
    table["n_holdout"] = len(hold)
    return table
