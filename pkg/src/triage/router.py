"""Routing policies: heuristic thresholds, trained classifier, oracle, baselines.

Every policy exposes ``assign(arrays, verdicts, rng)`` returning one tier
index per task of a :class:`~triage.tasks.CorpusArrays`, which is what the
simulator and the evaluation harness consume. :func:`route_tasks` wraps that
into per-task :class:`RoutingDecision` objects.

A task whose health cannot be resolved is routed Heavy: when uncertain the
router overpays rather than risks a failure.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .codehealth import SUB_FACTORS
from .costmodel import CostParams, task_costs
from .errors import ConfigurationError, DomainError, RoutingError, TrainingError
from .featurestore import FeatureStore, Missing
from .outcomes import task_verdicts
from .tasks import TIERS, CorpusArrays, TaskRecord, Tier, compile_corpus

FEATURES = SUB_FACTORS + ("composite", "patch_size", "coverage")
DEFAULT_THRESHOLDS = (9.0, 5.0)
TAU_GRID = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))


@dataclass(frozen=True)
class RoutingDecision:
    task_id: str
    tier: Tier
    policy: str
    health_used: float | None
    rationale: str

    def to_json(self) -> dict:
        return {"task_id": self.task_id, "tier": self.tier.label, "policy": self.policy,
                "health_used": self.health_used, "rationale": self.rationale}


# ---------------------------------------------------------------------------
# features

def task_health(task: TaskRecord, store: FeatureStore | None = None) -> float:
    """Health of the worst file the task touches."""
    if store is None:
        health = task.health
        if health is None:
            raise RoutingError(f"task {task.task_id!r}: files lack health values and no store given")
        return health
    found = store.lookup(f.path for f in task.files)
    missing = [r.path for r in found if isinstance(r, Missing)]
    if missing:
        raise RoutingError(f"task {task.task_id!r}: no feature record for {missing}")
    return min(r.score.value for r in found)


def _worst_record(task: TaskRecord, store: FeatureStore):
    found = store.lookup(f.path for f in task.files)
    if any(isinstance(r, Missing) for r in found):
        return None
    return min(found, key=lambda r: (r.score.value, r.path))


def build_arrays(corpus, store: FeatureStore | None = None) -> CorpusArrays:
    """Array view with health and classifier features resolved.

    Sub-factor columns come from the worst-health file in ``store`` and are
    nan without a store; ``patch_size`` enters as ``log1p(patch_size)``.
    """
    tasks = sorted(corpus, key=lambda t: t.task_id)
    health = {}
    cols = {name: np.full(len(tasks), np.nan) for name in FEATURES}
    for i, task in enumerate(tasks):
        try:
            h = task_health(task, store)
        except RoutingError:
            h = math.nan
        health[task.task_id] = h
        cols["composite"][i] = h
        cols["patch_size"][i] = math.log1p(task.patch_size)
        if task.coverage is not None:
            cols["coverage"][i] = task.coverage
        if store is not None:
            rec = _worst_record(task, store)
            if rec is not None:
                for name in SUB_FACTORS:
                    cols[name][i] = getattr(rec.sub_factors, name)
    arrays = compile_corpus(tasks, health)
    arrays.features = cols
    return arrays


# ---------------------------------------------------------------------------
# heuristic

def check_thresholds(thresholds) -> tuple[float, float]:
    t_light, t_standard = (float(x) for x in thresholds)
    if not 1.0 <= t_standard <= t_light <= 10.0:
        raise ConfigurationError(
            f"thresholds need 1 <= t_standard <= t_light <= 10, got {(t_light, t_standard)}")
    return t_light, t_standard


def route_heuristic(health: float, thresholds=DEFAULT_THRESHOLDS) -> Tier:
    t_light, t_standard = check_thresholds(thresholds)
    if health >= t_light:
        return Tier.LIGHT
    if health >= t_standard:
        return Tier.STANDARD
    return Tier.HEAVY


class HeuristicPolicy:
    name = "heuristic"
    deterministic = True

    def __init__(self, thresholds=DEFAULT_THRESHOLDS):
        self.thresholds = check_thresholds(thresholds)

    def assign(self, arrays, verdicts=None, rng=None) -> np.ndarray:
        h = arrays.health
        t_light, t_standard = self.thresholds
        tiers = np.full(len(h), int(Tier.HEAVY))
        tiers[h >= t_standard] = Tier.STANDARD
        tiers[h >= t_light] = Tier.LIGHT
        return tiers  # nan compares False everywhere and stays Heavy

    def explain(self, tier: Tier, health: float) -> str:
        t_light, t_standard = self.thresholds
        if math.isnan(health):
            return "health unknown; erring above"
        if tier is Tier.LIGHT:
            return f"worst-file health {health:.2f} >= {t_light:g}"
        if tier is Tier.STANDARD:
            return f"{t_standard:g} <= worst-file health {health:.2f} < {t_light:g}"
        return f"worst-file health {health:.2f} < {t_standard:g}"


# ---------------------------------------------------------------------------
# oracle

def oracle_tiers(verdicts: np.ndarray) -> np.ndarray:
    """Cheapest tier whose majority verdict passes; Heavy when none does."""
    verdicts = np.asarray(verdicts, dtype=bool)
    any_pass = verdicts.any(axis=1)
    return np.where(any_pass, verdicts.argmax(axis=1), int(Tier.HEAVY))


def route_oracle(task: TaskRecord) -> Tier:
    if task.runs is None:
        raise RoutingError(f"task {task.task_id!r} has no outcomes; the oracle cannot route it")
    verdicts = task_verdicts(task)
    for tier in TIERS:
        if verdicts[tier]:
            return tier
    return Tier.HEAVY


class OraclePolicy:
    name = "oracle"
    deterministic = True

    def assign(self, arrays, verdicts, rng=None) -> np.ndarray:
        if verdicts is None:
            raise RoutingError("the oracle needs outcome verdicts")
        return oracle_tiers(verdicts)

    def explain(self, tier: Tier, health: float) -> str:
        return f"cheapest passing tier in hindsight: {tier.label}"


# ---------------------------------------------------------------------------
# baselines

BASELINES = ("always_light", "always_heavy", "random")


def route_baseline(kind: str, rng: np.random.Generator | None = None) -> Tier:
    if kind == "always_light":
        return Tier.LIGHT
    if kind == "always_heavy":
        return Tier.HEAVY
    if kind == "random":
        if rng is None:
            raise ConfigurationError("the random baseline needs a seeded generator")
        return Tier(int(rng.integers(0, 3)))
    raise ConfigurationError(f"unknown baseline {kind!r}; expected one of {BASELINES}")


class BaselinePolicy:
    deterministic = True

    def __init__(self, kind: str):
        if kind not in BASELINES:
            raise ConfigurationError(f"unknown baseline {kind!r}; expected one of {BASELINES}")
        self.kind = kind
        self.name = kind
        self.deterministic = kind != "random"

    def assign(self, arrays, verdicts=None, rng=None) -> np.ndarray:
        n = len(arrays)
        if self.kind == "always_light":
            return np.zeros(n, dtype=int)
        if self.kind == "always_heavy":
            return np.full(n, int(Tier.HEAVY))
        if rng is None:
            raise ConfigurationError("the random baseline needs a seeded generator")
        return rng.integers(0, 3, n)

    def explain(self, tier: Tier, health: float) -> str:
        return f"baseline {self.kind}"


# ---------------------------------------------------------------------------
# classifier

@dataclass(frozen=True)
class ClassifierParams:
    learning_rate: float = 0.1
    epochs: int = 500
    l2: float = 0.01
    seed: int = 42
    validation_fraction: float = 0.25
    tau_grid: tuple = TAU_GRID

    def __post_init__(self):
        if self.learning_rate <= 0 or self.epochs < 0 or self.l2 < 0:
            raise ConfigurationError("learning_rate > 0, epochs >= 0 and l2 >= 0 are required")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ConfigurationError("validation_fraction must lie in (0, 1)")
        if not self.tau_grid or not all(0.0 < t < 1.0 for t in self.tau_grid):
            raise ConfigurationError("tau_grid values must lie in (0, 1)")


@dataclass
class TierModel:
    """One-vs-rest logistic models for Light and Standard plus threshold tau."""

    feature_names: tuple
    coef: np.ndarray        # (2, d)
    intercept: np.ndarray   # (2,)
    mean: np.ndarray        # (d,)
    sd: np.ndarray          # (d,)
    tau: float
    metadata: dict = field(default_factory=dict)

    def standardize(self, X: np.ndarray) -> np.ndarray:
        X = np.array(X, dtype=float, copy=True)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != len(self.feature_names):
            raise DomainError(f"expected {len(self.feature_names)} features "
                              f"{list(self.feature_names)}, got {X.shape[1]}")
        if "coverage" in self.feature_names:
            j = self.feature_names.index("coverage")
            col = X[:, j]
            col[np.isnan(col)] = self.mean[j]
        return (X - self.mean) / self.sd

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        """Pass probabilities (n, 2) for Light and Standard."""
        Z = self.standardize(X)
        return _sigmoid(Z @ self.coef.T + self.intercept)

    def to_json(self) -> dict:
        return {
            "schema_version": 1,
            "feature_names": list(self.feature_names),
            "coef": self.coef.tolist(),
            "intercept": self.intercept.tolist(),
            "mean": self.mean.tolist(),
            "sd": self.sd.tolist(),
            "tau": self.tau,
            "metadata": self.metadata,
        }

    @classmethod
    def from_json(cls, data: dict) -> "TierModel":
        return cls(
            feature_names=tuple(data["feature_names"]),
            coef=np.asarray(data["coef"], dtype=float).reshape(2, -1),
            intercept=np.asarray(data["intercept"], dtype=float),
            mean=np.asarray(data["mean"], dtype=float),
            sd=np.asarray(data["sd"], dtype=float),
            tau=float(data["tau"]),
            metadata=data.get("metadata", {}),
        )

    def save(self, path) -> None:
        from .featurestore import atomic_write
        atomic_write(path, json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "TierModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _logit(p: float) -> float:
    p = min(max(p, 1e-6), 1.0 - 1e-6)
    return math.log(p / (1.0 - p))


def tiers_from_proba(proba: np.ndarray, tau: float) -> np.ndarray:
    """Light if p_L >= tau, else Standard if p_S >= tau, else Heavy."""
    p_l, p_s = proba[:, 0], proba[:, 1]
    return np.where(p_l >= tau, int(Tier.LIGHT), np.where(p_s >= tau, int(Tier.STANDARD), int(Tier.HEAVY)))


def route_classifier(model: TierModel, features) -> Tier:
    """Route one task from its feature vector (ordered as ``model.feature_names``)."""
    x = np.asarray(features, dtype=float)
    if x.ndim != 1 or x.shape[0] != len(model.feature_names):
        raise DomainError(f"expected {len(model.feature_names)} features, got shape {x.shape}")
    required = [i for i, n in enumerate(model.feature_names) if n != "coverage"]
    if np.isnan(x[required]).any():
        return Tier.HEAVY
    return Tier(int(tiers_from_proba(model.predict_proba(x), model.tau)[0]))


def feature_matrix(arrays: CorpusArrays, names) -> np.ndarray:
    try:
        return np.column_stack([arrays.features[n] for n in names]) if names else np.zeros((len(arrays), 0))
    except KeyError as exc:
        raise DomainError(f"feature {exc.args[0]!r} is not available; build arrays with build_arrays") from None


class ClassifierPolicy:
    name = "classifier"
    deterministic = True

    def __init__(self, model: TierModel):
        self.model = model

    def assign(self, arrays, verdicts=None, rng=None) -> np.ndarray:
        names = self.model.feature_names
        X = feature_matrix(arrays, names)
        required = [i for i, n in enumerate(names) if n != "coverage"]
        unresolved = np.isnan(X[:, required]).any(axis=1) if required else np.zeros(len(X), bool)
        tiers = np.full(len(X), int(Tier.HEAVY))
        ok = ~unresolved
        if ok.any():
            tiers[ok] = tiers_from_proba(self.model.predict_proba(X[ok]), self.model.tau)
        return tiers

    def explain(self, tier: Tier, health: float) -> str:
        return f"classifier with tau={self.model.tau:g}"


def _fit_logistic(Z: np.ndarray, y: np.ndarray, params: ClassifierParams):
    n, d = Z.shape
    w = np.zeros(d)
    b = _logit(float(y.mean()))
    lr, shrink = params.learning_rate, 1.0 + params.learning_rate * params.l2
    for _ in range(params.epochs):
        r = _sigmoid(Z @ w + b) - y
        # proximal L2 step stays stable for any penalty strength
        w = (w - lr * (Z.T @ r) / n) / shrink
        b -= lr * float(r.mean())
    return w, b


def split_ids(task_ids, fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic (train, validation) index split over sorted task ids."""
    n = len(task_ids)
    if n < 2:
        raise TrainingError("need at least two tasks to form disjoint train and validation splits")
    order = np.argsort(np.asarray(task_ids, dtype=object), kind="stable")
    perm = order[np.random.default_rng(seed).permutation(n)]
    n_val = min(n - 1, max(1, int(round(fraction * n))))
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def fit_tier_model(X: np.ndarray, verdicts: np.ndarray, feature_names, params: ClassifierParams,
                   all_labels: np.ndarray | None = None) -> TierModel:
    """Fit Light and Standard pass models on a training block (tau left at 0.5)."""
    X = np.asarray(X, dtype=float)
    d = X.shape[1]
    mean = np.nanmean(X, axis=0) if len(X) else np.zeros(d)
    mean = np.where(np.isnan(mean), 0.0, mean)
    filled = np.where(np.isnan(X), mean, X)
    sd = filled.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    Z = (filled - mean) / sd
    coef = np.zeros((2, d))
    intercept = np.zeros(2)
    constant = []
    for k, tier in enumerate((Tier.LIGHT, Tier.STANDARD)):
        y = verdicts[:, k].astype(float)
        if y.min() == y.max():
            full = all_labels[:, k] if all_labels is not None else y
            if full.min() != full.max():
                raise TrainingError(f"degenerate training split for tier {tier.label}: "
                                    f"every training label is {'pass' if y[0] else 'fail'}")
            intercept[k] = _logit(float(y[0]))
            constant.append(tier.label)
            continue
        coef[k], intercept[k] = _fit_logistic(Z, y, params)
    return TierModel(tuple(feature_names), coef, intercept, mean, sd, 0.5,
                     {"constant_tiers": constant})


def select_tau(model: TierModel, X: np.ndarray, verdicts: np.ndarray, costs: CostParams,
               grid=TAU_GRID) -> tuple[float, dict]:
    """Tau maximizing realized savings; ties go to the larger (more cautious) tau."""
    proba = model.predict_proba(X)
    best_tau, best = None, -math.inf
    table = {}
    for tau in sorted(grid):
        cost, _ = task_costs(tiers_from_proba(proba, tau), verdicts, costs)
        savings = costs.c_H - float(cost.mean())
        table[f"{tau:.2f}"] = savings
        if savings >= best - 1e-12:
            best_tau, best = tau, max(best, savings)
    return best_tau, table


def train_classifier(corpus, store: FeatureStore | None = None,
                     params: ClassifierParams | None = None,
                     costs: CostParams | None = None,
                     feature_names=None, arrays: CorpusArrays | None = None) -> TierModel:
    """Train the tier classifier on oracle outcomes.

    The corpus is split by task id into a training part, which fits the two
    one-vs-rest logistic models, and a validation part, which picks tau.
    Feature names default to every feature fully available in the corpus.
    """
    params = params or ClassifierParams()
    costs = costs or CostParams()
    if arrays is None:
        if not corpus:
            raise TrainingError("cannot train on an empty corpus")
        arrays = build_arrays(corpus, store)
    if arrays.runs is None:
        raise TrainingError("training needs recorded outcomes for every task")
    if feature_names is None:
        feature_names = [n for n in FEATURES
                         if n == "coverage" or not np.isnan(arrays.features[n]).any()]
        if "coverage" in feature_names and np.isnan(arrays.features["coverage"]).all():
            feature_names.remove("coverage")
    feature_names = tuple(feature_names)
    X = feature_matrix(arrays, feature_names)
    verdicts = arrays.verdicts
    required = [i for i, n in enumerate(feature_names) if n != "coverage"]
    usable = ~np.isnan(X[:, required]).any(axis=1) if required else np.ones(len(X), bool)
    ids = np.asarray(arrays.task_ids, dtype=object)[usable]
    X, verdicts = X[usable], verdicts[usable]
    train, val = split_ids(list(ids), params.validation_fraction, params.seed)
    model = fit_tier_model(X[train], verdicts[train], feature_names, params, all_labels=verdicts)
    tau, table = select_tau(model, X[val], verdicts[val], costs, params.tau_grid)
    model.tau = tau
    model.metadata.update({
        "n_train": int(len(train)),
        "n_validation": int(len(val)),
        "n_excluded": int((~usable).sum()),
        "validation_savings_by_tau": table,
        "hyperparams": {"learning_rate": params.learning_rate, "epochs": params.epochs,
                        "l2": params.l2, "seed": params.seed,
                        "validation_fraction": params.validation_fraction},
        "costs": list(costs.as_tuple()),
    })
    return model


# ---------------------------------------------------------------------------

def make_policy(name: str, *, thresholds=DEFAULT_THRESHOLDS, model: TierModel | None = None):
    name = name.replace("-", "_")
    if name == "heuristic":
        return HeuristicPolicy(thresholds)
    if name == "oracle":
        return OraclePolicy()
    if name == "classifier":
        if model is None:
            raise ConfigurationError("the classifier policy needs a trained model")
        return ClassifierPolicy(model)
    return BaselinePolicy(name)


def route_tasks(corpus, policy, store: FeatureStore | None = None, seed: int = 0) -> list[RoutingDecision]:
    """Route every task; decisions come back in task_id order."""
    arrays = build_arrays(corpus, store)
    verdicts = arrays.verdicts if arrays.runs is not None else None
    rng = np.random.default_rng(seed)
    tiers = policy.assign(arrays, verdicts, rng)
    out = []
    for task_id, tier, h in zip(arrays.task_ids, tiers, arrays.health):
        tier = Tier(int(tier))
        health = None if math.isnan(h) else float(h)
        out.append(RoutingDecision(task_id, tier, policy.name, health,
                                   policy.explain(tier, h)))
    return out
