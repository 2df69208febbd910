"""Core task types: capability tiers, task records and their array form."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .errors import DomainError, IngestionError


class Tier(IntEnum):
    LIGHT = 0
    STANDARD = 1
    HEAVY = 2

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, value) -> "Tier":
        if isinstance(value, Tier):
            return value
        if isinstance(value, str):
            try:
                return cls[value.strip().upper()]
            except KeyError:
                raise DomainError(f"unknown tier {value!r}") from None
        return cls(int(value))


TIERS = (Tier.LIGHT, Tier.STANDARD, Tier.HEAVY)


@dataclass(frozen=True)
class TaskFile:
    path: str
    health: float | None = None


@dataclass(frozen=True)
class TaskRecord:
    """One task: touched files, difficulty proxy, coverage and run outcomes.

    ``runs`` maps every tier to its ordered run verdicts (``True`` = pass).
    ``pass_prob`` is the per-run pass probability per tier, only known for
    synthetic tasks; simulations may redraw outcomes from it.
    """

    task_id: str
    files: tuple[TaskFile, ...]
    patch_size: int = 0
    coverage: float | None = None
    runs: dict | None = None
    pass_prob: tuple[float, float, float] | None = None

    def __post_init__(self):
        if not self.task_id:
            raise IngestionError("task_id must be a non-empty string")
        if not self.files:
            raise IngestionError(f"task {self.task_id!r} references no files")
        if self.patch_size < 0:
            raise IngestionError(f"task {self.task_id!r}: patch_size must be >= 0")
        if self.coverage is not None and not 0.0 <= self.coverage <= 1.0:
            raise IngestionError(f"task {self.task_id!r}: coverage outside [0, 1]")
        if self.runs is not None:
            if set(self.runs) != set(TIERS):
                raise IngestionError(f"task {self.task_id!r}: runs must cover light, standard, heavy")
            counts = {len(self.runs[t]) for t in TIERS}
            if len(counts) != 1:
                raise IngestionError(f"task {self.task_id!r}: uneven run counts across tiers")
            n = counts.pop()
            if n == 0 or n % 2 == 0:
                raise IngestionError(
                    f"task {self.task_id!r}: run count must be odd for a majority vote, got {n}")
        if self.pass_prob is not None:
            if len(self.pass_prob) != 3 or not all(0.0 <= p <= 1.0 for p in self.pass_prob):
                raise IngestionError(f"task {self.task_id!r}: pass_prob must be 3 values in [0, 1]")

    @property
    def has_outcomes(self) -> bool:
        return self.runs is not None

    @property
    def n_runs(self) -> int:
        return len(self.runs[Tier.LIGHT]) if self.runs else 0

    @property
    def health(self) -> float | None:
        """Worst-file health from the corpus itself, if every file carries one."""
        values = [f.health for f in self.files]
        if any(v is None for v in values):
            return None
        return min(values)


class Corpus(list):
    """A list of :class:`TaskRecord` with corpus-level bookkeeping."""

    @property
    def total_runs(self) -> int:
        return sum(3 * t.n_runs for t in self if t.runs)

    def by_id(self) -> dict[str, TaskRecord]:
        return {t.task_id: t for t in self}

    def sorted(self) -> "Corpus":
        return Corpus(sorted(self, key=lambda t: t.task_id))


@dataclass
class CorpusArrays:
    """Column-oriented view of a corpus, sorted by task_id."""

    task_ids: list[str]
    health: np.ndarray          # (n,) worst-file health, nan when unknown
    runs: np.ndarray | None     # (n, 3, r) bool
    pass_prob: np.ndarray | None  # (n, 3) per-run pass probability
    patch_size: np.ndarray
    coverage: np.ndarray        # nan when absent
    features: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.task_ids)

    @property
    def verdicts(self) -> np.ndarray:
        """Majority verdict per task and tier, shape (n, 3)."""
        if self.runs is None:
            raise DomainError("corpus carries no run outcomes")
        return self.runs.sum(axis=2) * 2 > self.runs.shape[2]

    @property
    def n_runs(self) -> int:
        return 0 if self.runs is None else self.runs.shape[2]


def compile_corpus(corpus, health=None) -> CorpusArrays:
    """Build the array view; ``health`` optionally overrides per-task health."""
    tasks = sorted(corpus, key=lambda t: t.task_id)
    n = len(tasks)
    ids = [t.task_id for t in tasks]
    if health is None:
        hv = np.array([t.health if t.health is not None else math.nan for t in tasks], dtype=float)
    else:
        hv = np.array([health.get(t.task_id, math.nan) if isinstance(health, dict) else health(t)
                       for t in tasks], dtype=float)
    runs = None
    if n and all(t.runs is not None for t in tasks):
        widths = {t.n_runs for t in tasks}
        if len(widths) == 1:
            runs = np.array([[t.runs[tier] for tier in TIERS] for t in tasks], dtype=bool)
        else:
            # pad to a common odd width by majority-preserving expansion
            width = max(widths)
            runs = np.zeros((n, 3, width), dtype=bool)
            for i, t in enumerate(tasks):
                for j, tier in enumerate(TIERS):
                    verdict = sum(t.runs[tier]) * 2 > t.n_runs
                    runs[i, j, :] = verdict
    pass_prob = None
    if n and all(t.pass_prob is not None for t in tasks):
        pass_prob = np.array([t.pass_prob for t in tasks], dtype=float)
    return CorpusArrays(
        task_ids=ids,
        health=hv,
        runs=runs,
        pass_prob=pass_prob,
        patch_size=np.array([t.patch_size for t in tasks], dtype=float),
        coverage=np.array([t.coverage if t.coverage is not None else math.nan for t in tasks],
                          dtype=float),
    )


def subset(arrays: CorpusArrays, idx) -> CorpusArrays:
    """Rows ``idx`` of an array view (features included)."""
    idx = np.asarray(idx, dtype=int)
    return CorpusArrays(
        task_ids=[arrays.task_ids[i] for i in idx],
        health=arrays.health[idx],
        runs=None if arrays.runs is None else arrays.runs[idx],
        pass_prob=None if arrays.pass_prob is None else arrays.pass_prob[idx],
        patch_size=arrays.patch_size[idx],
        coverage=arrays.coverage[idx],
        features={k: v[idx] for k, v in arrays.features.items()},
    )
