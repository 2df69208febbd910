"""Persistent per-file feature table with content-hash incremental updates.

On disk the store is a JSON Lines file. The first line is a header carrying
the format version, the store revision and the weight configuration used to
score every record; each following line is one :class:`FeatureRecord`.
Writes go to a temporary file that is renamed over the original, and a
sibling ``.lock`` file guarantees a single writer.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from pathlib import Path

from .codehealth import (
    HealthScore,
    SubFactorVector,
    WeightConfig,
    analyze_file,
    composite_score,
    dialect_for_path,
)
from .errors import DomainError, IntegrityError, LockError, TriageError

FORMAT = "triage-features"
FORMAT_VERSION = 1


def content_digest(content: bytes | str) -> str:
    if isinstance(content, str):
        content = content.encode("utf-8")
    return hashlib.sha256(content).hexdigest()


@dataclass(frozen=True)
class FeatureRecord:
    path: str
    content_hash: str
    sub_factors: SubFactorVector
    score: HealthScore
    coverage: float | None = None
    updated_at: int = 0

    def to_json(self) -> dict:
        return {
            "path": self.path,
            "content_hash": self.content_hash,
            "sub_factors": self.sub_factors.as_dict(),
            "score": self.score.value,
            "band": self.score.band.value,
            "coverage": self.coverage,
            "updated_at": self.updated_at,
        }

    @classmethod
    def from_json(cls, data: dict) -> "FeatureRecord":
        coverage = data.get("coverage")
        return cls(
            path=data["path"],
            content_hash=data["content_hash"],
            sub_factors=SubFactorVector.from_dict(data["sub_factors"]),
            score=HealthScore.of(float(data["score"])),
            coverage=None if coverage is None else float(coverage),
            updated_at=int(data.get("updated_at", 0)),
        )


@dataclass(frozen=True)
class Missing:
    """Marker returned by :meth:`FeatureStore.lookup` for unknown paths."""

    path: str


@dataclass
class UpdateSummary:
    analyzed: list[str] = field(default_factory=list)
    cache_hits: list[str] = field(default_factory=list)
    errors: dict[str, str] = field(default_factory=dict)
    revision: int = 0

    @property
    def n_analyzed(self) -> int:
        return len(self.analyzed)

    @property
    def n_hits(self) -> int:
        return len(self.cache_hits)

    def to_json(self) -> dict:
        return {"analyzed": self.analyzed, "cache_hits": self.cache_hits,
                "errors": self.errors, "revision": self.revision}


class FeatureStore:
    """In-memory feature table, optionally bound to a ``features.jsonl`` file.

    >>> store = FeatureStore()
    >>> store.update([("a.py", "def f():\\n    return 1\\n")]).n_analyzed
    1
    """

    def __init__(self, path: str | os.PathLike | None = None,
                 weights: WeightConfig | None = None):
        self.path = Path(path) if path is not None else None
        self.weights = weights or WeightConfig()
        self.revision = 0
        self.records: dict[str, FeatureRecord] = {}

    # -- persistence -------------------------------------------------------

    @classmethod
    def open(cls, path: str | os.PathLike, weights: WeightConfig | None = None) -> "FeatureStore":
        """Load an existing store, or start an empty one bound to ``path``."""
        path = Path(path)
        store = cls(path, weights)
        if not path.exists():
            return store
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        if not lines:
            raise IntegrityError(f"{path}:1: missing header line")
        try:
            header = json.loads(lines[0])
        except json.JSONDecodeError as exc:
            raise IntegrityError(f"{path}:1: header is not JSON ({exc.msg})") from None
        if header.get("format") != FORMAT or header.get("version") != FORMAT_VERSION:
            raise IntegrityError(f"{path}:1: unsupported store header {header!r}")
        stored_weights = WeightConfig.from_dict(header["weights"])
        if weights is None:
            store.weights = stored_weights
        store.revision = int(header.get("revision", 0))
        for lineno, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            try:
                record = FeatureRecord.from_json(json.loads(line))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError, TriageError) as exc:
                raise IntegrityError(f"{path}:{lineno}: corrupted record ({exc})") from None
            if record.path in store.records:
                raise IntegrityError(f"{path}:{lineno}: duplicate path {record.path!r}")
            store.records[record.path] = record
        if weights is not None and weights != stored_weights:
            store._rescore()
        return store

    def header(self) -> dict:
        return {"format": FORMAT, "version": FORMAT_VERSION, "revision": self.revision,
                "weights_digest": self.weights.digest(), "weights": self.weights.as_dict()}

    def dumps(self) -> str:
        lines = [json.dumps(self.header(), sort_keys=True)]
        for path in sorted(self.records):
            lines.append(json.dumps(self.records[path].to_json(), sort_keys=True))
        return "\n".join(lines) + "\n"

    def save(self, path: str | os.PathLike | None = None) -> None:
        target = Path(path) if path is not None else self.path
        if target is None:
            raise TriageError("store has no backing file")
        atomic_write(target, self.dumps())

    @contextmanager
    def writer(self):
        """Hold the single-writer lock, then commit atomically on success."""
        if self.path is None:
            yield self
            return
        lock = self.path.with_name(self.path.name + ".lock")
        try:
            fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise LockError(f"{lock} exists; another writer is active") from None
        try:
            os.write(fd, str(os.getpid()).encode())
            os.close(fd)
            yield self
            self.save()
        finally:
            os.unlink(lock)

    # -- operations --------------------------------------------------------

    def _rescore(self) -> None:
        for path, record in self.records.items():
            self.records[path] = replace(record, score=composite_score(record.sub_factors, self.weights))

    def update(self, files, weights: WeightConfig | None = None,
               coverage: dict[str, float] | None = None,
               dialect: str | None = None) -> UpdateSummary:
        """Analyze changed files; unchanged digests are cache hits.

        ``files`` is an iterable of ``(path, content)``; content may be text,
        bytes, or an exception raised while reading it (recorded as a
        per-file error). Paths absent from ``files`` are kept.
        """
        if weights is not None and weights != self.weights:
            self.weights = weights
            self._rescore()
        coverage = coverage or {}
        self.revision += 1
        summary = UpdateSummary(revision=self.revision)
        for path, content in files:
            path = str(path)
            if isinstance(content, BaseException):
                summary.errors[path] = str(content)
                continue
            digest = content_digest(content)
            old = self.records.get(path)
            cov = coverage.get(path, old.coverage if old else None)
            if cov is not None and not 0.0 <= cov <= 1.0:
                summary.errors[path] = f"coverage {cov!r} outside [0, 1]"
                continue
            if old is not None and old.content_hash == digest:
                summary.cache_hits.append(path)
                if cov != old.coverage:
                    self.records[path] = replace(old, coverage=cov)
                continue
            try:
                v = analyze_file(content, dialect or dialect_for_path(path))
            except TriageError as exc:
                summary.errors[path] = str(exc)
                continue
            self.records[path] = FeatureRecord(
                path=path, content_hash=digest, sub_factors=v,
                score=composite_score(v, self.weights), coverage=cov,
                updated_at=self.revision,
            )
            summary.analyzed.append(path)
        return summary

    def put(self, record: FeatureRecord) -> None:
        """Insert a pre-built record (used for synthetic feature tables)."""
        expected = composite_score(record.sub_factors, self.weights)
        if abs(expected.value - record.score.value) > 1e-9:
            raise DomainError(f"score of {record.path!r} is inconsistent with its sub-factors")
        self.records[record.path] = record

    def delete(self, paths) -> list[str]:
        return [p for p in paths if self.records.pop(str(p), None) is not None]

    def lookup(self, paths) -> list[FeatureRecord | Missing]:
        return [self.records.get(str(p)) or Missing(str(p)) for p in paths]

    def get(self, path: str) -> FeatureRecord | None:
        return self.records.get(path)

    def __contains__(self, path) -> bool:
        return str(path) in self.records

    def __len__(self) -> int:
        return len(self.records)


def update_store(store: FeatureStore, files, weights: WeightConfig | None = None,
                 coverage: dict[str, float] | None = None) -> UpdateSummary:
    with store.writer():
        return store.update(files, weights, coverage)


def lookup(store: FeatureStore, paths) -> list[FeatureRecord | Missing]:
    return store.lookup(paths)


def read_files(paths) -> list[tuple[str, bytes | OSError]]:
    out = []
    for p in paths:
        try:
            out.append((str(p), Path(p).read_bytes()))
        except OSError as exc:
            out.append((str(p), exc))
    return out


def load_coverage(path) -> dict[str, float]:
    """Read a ``{"path": fraction}`` JSON coverage report."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise IntegrityError(f"{path}: coverage file must be a JSON object")
    result = {}
    for key, value in data.items():
        value = float(value)
        if not 0.0 <= value <= 1.0:
            raise IntegrityError(f"{path}: coverage for {key!r} outside [0, 1]")
        result[str(key)] = value
    return result


def atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=path.name + ".", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
