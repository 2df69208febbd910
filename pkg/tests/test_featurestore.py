import json
import random

import pytest

from conftest import python_module
from triage.codehealth import WeightConfig, analyze_file, composite_score
from triage.errors import IntegrityError, LockError
from triage.featurestore import FeatureStore, Missing, content_digest, load_coverage


def _strip_revisions(store: FeatureStore) -> list:
    rows = []
    for path in sorted(store.records):
        data = store.records[path].to_json()
        data.pop("updated_at")
        rows.append(json.dumps(data, sort_keys=True))
    return rows


def test_update_analyzes_then_hits_cache():
    store = FeatureStore()
    files = [("a.py", "def f():\n    return 1\n"), ("b.c", "int g() { return 2; }\n")]
    first = store.update(files)
    assert first.n_analyzed == 2 and first.n_hits == 0
    second = store.update(files)
    assert second.n_analyzed == 0 and second.n_hits == 2
    assert second.revision == 2
    rec = store.get("a.py")
    assert rec.content_hash == content_digest("def f():\n    return 1\n")
    assert rec.score == composite_score(analyze_file(files[0][1], "indent"))


def test_lookup_returns_missing_marker():
    store = FeatureStore()
    store.update([("a.py", "x = 1\n")])
    got = store.lookup(["a.py", "nope.py"])
    assert got[0].path == "a.py"
    assert got[1] == Missing("nope.py")


def test_per_file_errors_do_not_abort():
    store = FeatureStore()
    summary = store.update([("ok.py", "x = 1\n"), ("bin.py", b"\x00\x01"),
                            ("gone.py", FileNotFoundError("no such file"))])
    assert summary.analyzed == ["ok.py"]
    assert set(summary.errors) == {"bin.py", "gone.py"}


def test_round_trip_and_integrity(tmp_path):
    path = tmp_path / "features.jsonl"
    store = FeatureStore(path)
    with store.writer():
        store.update([("a.py", "def f(x):\n    if x:\n        return 1\n")], coverage={"a.py": 0.4})
    again = FeatureStore.open(path)
    assert again.dumps() == store.dumps()
    assert again.get("a.py").coverage == 0.4

    lines = path.read_text().splitlines()
    lines[1] = lines[1][: len(lines[1]) // 2]
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(IntegrityError, match=r"features\.jsonl:2:"):
        FeatureStore.open(path)


def test_single_writer_lock(tmp_path):
    path = tmp_path / "features.jsonl"
    (tmp_path / "features.jsonl.lock").write_text("999")
    with pytest.raises(LockError):
        with FeatureStore(path).writer():
            pass
    assert not path.exists()


def test_failed_write_leaves_previous_file(tmp_path):
    path = tmp_path / "features.jsonl"
    store = FeatureStore(path)
    with store.writer():
        store.update([("a.py", "x = 1\n")])
    before = path.read_text()
    with pytest.raises(RuntimeError):
        with store.writer():
            store.update([("b.py", "y = 2\n")])
            raise RuntimeError("interrupted")
    assert path.read_text() == before
    assert not (tmp_path / "features.jsonl.lock").exists()


def test_weight_change_rescores_without_reanalysis(tmp_path):
    store = FeatureStore()
    src = "def f(a, b, c, d, e, f, g, h):\n    return a\n"
    store.update([("a.py", src)])
    heavy_args = WeightConfig(weights=dict(WeightConfig().weights, arg_count_max=5.0))
    summary = store.update([("a.py", src)], weights=heavy_args)
    assert summary.n_hits == 1
    assert store.get("a.py").score == composite_score(analyze_file(src, "indent"), heavy_args)


def test_coverage_file(tmp_path):
    p = tmp_path / "cov.json"
    p.write_text(json.dumps({"a.py": 0.5}))
    assert load_coverage(p) == {"a.py": 0.5}


def test_incremental_equals_from_scratch():
    rng = random.Random(7)
    files = {f"pkg/m{i}.py": python_module(rng, rng.randint(1, 4)) for i in range(50)}
    store = FeatureStore()
    store.update(sorted(files.items()))
    for _ in range(5):
        previous = {p: content_digest(c) for p, c in files.items()}
        for p in rng.sample(sorted(files), rng.randint(1, 15)):
            files[p] = python_module(rng, rng.randint(1, 4))
        summary = store.update(sorted(files.items()))
        unchanged = sum(previous[p] == content_digest(c) for p, c in files.items())
        assert summary.n_hits == unchanged
        scratch = FeatureStore()
        scratch.update(sorted(files.items()))
        assert _strip_revisions(store) == _strip_revisions(scratch)
