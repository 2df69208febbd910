"""Pass/fail verdicts: majority vote, recorded-run ingestion, synthetic corpora.

Corpus files are JSON Lines, one task per line::

    {"task_id": "django-1", "files": [{"path": "a.py", "health": 6.2}],
     "patch_size": 14, "coverage": 0.8,
     "runs": {"light": ["fail", "pass", "fail"], "standard": [...], "heavy": [...]}}

``coverage`` and ``health`` may be omitted or null. Synthetic corpora add a
``pass_prob`` object holding the per-run pass probability of every tier.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .codehealth import SUB_FACTORS, SubFactorVector, WeightConfig, composite_score
from .errors import DomainError, IngestionError
from .featurestore import FeatureRecord, FeatureStore, atomic_write
from .tasks import TIERS, Corpus, TaskFile, TaskRecord, Tier

PASS, FAIL = "pass", "fail"


def majority_pass(runs) -> bool:
    """True iff a strict majority of an odd, non-empty run list passed."""
    runs = [_verdict(r) for r in runs]
    if not runs or len(runs) % 2 == 0:
        raise DomainError(f"majority vote needs an odd, non-empty run list, got {len(runs)} runs")
    return sum(runs) * 2 > len(runs)


def _verdict(value) -> bool:
    if isinstance(value, bool):
        return value
    if value == PASS:
        return True
    if value == FAIL:
        return False
    raise DomainError(f"run verdict must be 'pass' or 'fail', got {value!r}")


def task_verdicts(task: TaskRecord) -> dict[Tier, bool]:
    if task.runs is None:
        raise DomainError(f"task {task.task_id!r} has no recorded runs")
    return {tier: majority_pass(task.runs[tier]) for tier in TIERS}


# ---------------------------------------------------------------------------
# ingestion

def task_to_json(task: TaskRecord) -> dict:
    out = {
        "task_id": task.task_id,
        "files": [{"path": f.path, "health": f.health} for f in task.files],
        "patch_size": task.patch_size,
        "coverage": task.coverage,
    }
    if task.runs is not None:
        out["runs"] = {tier.label: [PASS if r else FAIL for r in task.runs[tier]] for tier in TIERS}
    if task.pass_prob is not None:
        out["pass_prob"] = {tier.label: task.pass_prob[tier] for tier in TIERS}
    return out


def task_from_json(data: dict) -> TaskRecord:
    if not isinstance(data, dict):
        raise IngestionError("task line must be a JSON object")
    try:
        task_id = data["task_id"]
        raw_files = data["files"]
    except KeyError as exc:
        raise IngestionError(f"missing field {exc.args[0]!r}") from None
    if not isinstance(task_id, str):
        raise IngestionError("task_id must be a string")
    if not isinstance(raw_files, list):
        raise IngestionError("files must be a list")
    files = []
    for f in raw_files:
        if isinstance(f, str):
            files.append(TaskFile(f))
        elif isinstance(f, dict) and isinstance(f.get("path"), str):
            health = f.get("health")
            if health is not None:
                health = float(health)
                if not 1.0 <= health <= 10.0:
                    raise IngestionError(f"health of {f['path']!r} outside [1, 10]")
            files.append(TaskFile(f["path"], health))
        else:
            raise IngestionError("each file must be a path string or {path, health} object")
    patch_size = data.get("patch_size", 0)
    if not isinstance(patch_size, int) or isinstance(patch_size, bool):
        raise IngestionError("patch_size must be an integer")
    coverage = data.get("coverage")
    runs = None
    if data.get("runs") is not None:
        raw = data["runs"]
        if not isinstance(raw, dict) or set(raw) != {t.label for t in TIERS}:
            raise IngestionError("runs must map light, standard and heavy to verdict lists")
        try:
            runs = {tier: tuple(_verdict(v) for v in raw[tier.label]) for tier in TIERS}
        except (DomainError, TypeError) as exc:
            raise IngestionError(str(exc)) from None
    pass_prob = None
    if data.get("pass_prob") is not None:
        pass_prob = tuple(float(data["pass_prob"][tier.label]) for tier in TIERS)
    return TaskRecord(task_id=task_id, files=tuple(files), patch_size=patch_size,
                      coverage=None if coverage is None else float(coverage),
                      runs=runs, pass_prob=pass_prob)


def ingest_runs(path) -> Corpus:
    """Load and validate a corpus file; errors name the offending line."""
    corpus = Corpus()
    seen: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                task = task_from_json(json.loads(line))
            except json.JSONDecodeError as exc:
                raise IngestionError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from None
            except (IngestionError, ValueError, TypeError, KeyError) as exc:
                raise IngestionError(f"{path}:{lineno}: {exc}") from None
            if task.task_id in seen:
                raise IngestionError(
                    f"{path}:{lineno}: duplicate task_id {task.task_id!r} "
                    f"(first seen on line {seen[task.task_id]})")
            seen[task.task_id] = lineno
            corpus.append(task)
    return corpus


def dumps_corpus(corpus) -> str:
    return "".join(json.dumps(task_to_json(t), sort_keys=True) + "\n" for t in corpus)


def write_corpus(corpus, path) -> None:
    atomic_write(Path(path), dumps_corpus(corpus))


# ---------------------------------------------------------------------------
# synthetic generation

@dataclass(frozen=True)
class AsymmetryParams:
    """Linear-in-health pass probability per tier.

    ``p_t(h) = clamp(base_t + slope_t * (h - 1), 0, 1)``. The defaults give
    the light tier a steep health dependence, the standard tier a milder one
    and the heavy tier none.
    """

    base_light: float = 0.05
    base_standard: float = 0.35
    base_heavy: float = 0.85
    slope_light: float = 0.10
    slope_standard: float = 0.065
    slope_heavy: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("base_light", "base_standard", "base_heavy",
                     "slope_light", "slope_standard", "slope_heavy"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")

    @classmethod
    def null(cls, base: float = 0.5, seed: int = 0) -> "AsymmetryParams":
        """No health signal: equal bases, zero slopes."""
        return cls(base, base, base, 0.0, 0.0, 0.0, seed)

    def pass_prob(self, health) -> np.ndarray:
        """Per-run pass probabilities, shape ``health.shape + (3,)``."""
        h = np.asarray(health, dtype=float)[..., None]
        base = np.array([self.base_light, self.base_standard, self.base_heavy])
        slope = np.array([self.slope_light, self.slope_standard, self.slope_heavy])
        return np.clip(base + slope * (h - 1.0), 0.0, 1.0)

    def as_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, data: dict) -> "AsymmetryParams":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise DomainError(f"unknown asymmetry parameters: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class HealthDistribution:
    """Distribution of per-file health on [1, 10].

    kind ``uniform`` takes (low, high); ``bimodal`` takes (mu1, mu2, sigma)
    as an equal mixture of two normals clipped to [1, 10]; ``empirical``
    resamples from a list of observed values.
    """

    kind: str = "uniform"
    params: tuple = (1.0, 10.0)

    def __post_init__(self):
        if self.kind == "uniform":
            low, high = self.params
            if not 1.0 <= low < high <= 10.0:
                raise DomainError(f"uniform health bounds must satisfy 1 <= low < high <= 10")
        elif self.kind == "bimodal":
            mu1, mu2, sigma = self.params
            if sigma <= 0 or not (1 <= mu1 <= 10 and 1 <= mu2 <= 10):
                raise DomainError("bimodal needs means in [1, 10] and sigma > 0")
        elif self.kind == "empirical":
            if not self.params or not all(1.0 <= v <= 10.0 for v in self.params):
                raise DomainError("empirical health values must be non-empty and in [1, 10]")
        else:
            raise DomainError(f"unknown health distribution {self.kind!r}")

    @classmethod
    def from_file(cls, path) -> "HealthDistribution":
        with open(path, encoding="utf-8") as fh:
            values = json.load(fh)
        return cls("empirical", tuple(float(v) for v in values))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "uniform":
            return rng.uniform(self.params[0], self.params[1], size)
        if self.kind == "bimodal":
            mu1, mu2, sigma = self.params
            means = np.where(rng.random(size) < 0.5, mu1, mu2)
            return np.clip(rng.normal(means, sigma), 1.0, 10.0)
        return rng.choice(np.asarray(self.params, dtype=float), size)


PATCH_RANGE = (1, 1000)


def task_rng(seed: int, index: int, stream: int = 0) -> np.random.Generator:
    """Independent generator for one task, derived from (seed, index)."""
    return np.random.default_rng([int(seed), int(index), int(stream)])


def generate_corpus(n_tasks: int, health_distribution: HealthDistribution | None = None,
                    params: AsymmetryParams | None = None, seed: int | None = None,
                    n_runs: int = 3, files_per_task: tuple[int, int] = (1, 3),
                    coverage=None) -> Corpus:
    """Draw a reproducible synthetic corpus.

    Each task touches 1-3 files, has a log-uniform patch size in
    ``PATCH_RANGE`` and ``n_runs`` Bernoulli runs per tier whose pass
    probability depends on the worst file's health. ``coverage`` is a
    callable ``rng -> fraction`` or ``None`` for uniform [0, 1].
    """
    if n_tasks < 1:
        raise DomainError("n_tasks must be >= 1")
    if n_runs < 1 or n_runs % 2 == 0:
        raise DomainError("n_runs must be odd and >= 1")
    lo, hi = files_per_task
    if not 1 <= lo <= hi:
        raise DomainError("files_per_task must satisfy 1 <= low <= high")
    dist = health_distribution or HealthDistribution()
    params = params or AsymmetryParams()
    seed = params.seed if seed is None else seed
    width = len(str(n_tasks - 1))
    corpus = Corpus()
    for i in range(n_tasks):
        rng = task_rng(seed, i)
        k = int(rng.integers(lo, hi + 1))
        healths = dist.sample(rng, k)
        task_id = f"syn-{i:0{width}d}"
        files = tuple(TaskFile(f"src/{task_id}/mod{j}.py", float(h)) for j, h in enumerate(healths))
        worst = float(min(healths))
        patch = int(round(math.exp(rng.uniform(math.log(PATCH_RANGE[0]), math.log(PATCH_RANGE[1])))))
        cov = float(rng.uniform()) if coverage is None else float(coverage(rng))
        probs = params.pass_prob(worst)
        outcomes = rng.random((3, n_runs)) < probs[:, None]
        runs = {tier: tuple(bool(x) for x in outcomes[tier]) for tier in TIERS}
        corpus.append(TaskRecord(task_id=task_id, files=files, patch_size=patch, coverage=cov,
                                 runs=runs, pass_prob=tuple(float(p) for p in probs)))
    return corpus


def _split_penalty(total: float, weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Random split of ``total`` into shares with ``0 <= share_k <= weights_k``."""
    shares = np.zeros_like(weights)
    active = weights > 0
    if total <= 0 or not active.any():
        return shares
    mix = np.zeros_like(weights)
    mix[active] = rng.dirichlet(np.ones(active.sum()))
    free = active.copy()
    remaining = total
    while True:
        shares[free] = remaining * mix[free] / mix[free].sum()
        over = free & (shares > weights)
        if not over.any():
            break
        shares[over] = weights[over]
        free &= ~over
        remaining = total - shares[~free & active].sum()
        if not free.any():
            break
    return shares


def synthesize_vector(health: float, weights: WeightConfig, rng: np.random.Generator) -> SubFactorVector:
    """Sub-factor vector whose composite score equals ``health``.

    The penalty budget ``10 - health`` is split at random across weighted
    sub-factors and each share is mapped back through its ramp; factors left
    without a share sit below their low knee (or anywhere below the high knee
    when their weight is zero).
    """
    if not 1.0 <= health <= 10.0:
        raise DomainError(f"health {health!r} outside [1, 10]")
    if health < 10.0 - weights.total_weight - 1e-12:
        raise DomainError(f"health {health!r} unreachable under weights summing to "
                          f"{weights.total_weight}")
    w = np.array([weights.weights[name] for name in SUB_FACTORS], dtype=float)
    shares = _split_penalty(10.0 - health, w, rng)
    values = {}
    for k, name in enumerate(SUB_FACTORS):
        low, high = weights.knees[name]
        if w[k] > 0 and shares[k] > 0:
            values[name] = low + min(1.0, shares[k] / w[k]) * (high - low)
        else:
            values[name] = rng.uniform(0.0, max(low, 0.0) if w[k] > 0 else high)
    return SubFactorVector(**values)


def synthesize_features(corpus, weights: WeightConfig | None = None, seed: int = 0) -> FeatureStore:
    """In-memory feature store whose composite scores reproduce file health."""
    weights = weights or WeightConfig()
    store = FeatureStore(weights=weights)
    for i, task in enumerate(sorted(corpus, key=lambda t: t.task_id)):
        rng = task_rng(seed, i, stream=1)
        for f in task.files:
            if f.health is None:
                raise DomainError(f"file {f.path!r} has no health to synthesize from")
            v = synthesize_vector(f.health, weights, rng)
            store.put(FeatureRecord(path=f.path, content_hash=f"synthetic:{f.path}",
                                    sub_factors=v, score=composite_score(v, weights),
                                    coverage=task.coverage))
    return store
