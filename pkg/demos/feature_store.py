"""Incremental analysis: only changed files are re-analyzed."""

import tempfile
from pathlib import Path

from triage.featurestore import FeatureStore

files = {
    "app/models.py": "class User:\n    def name(self):\n        return self.first + ' ' + self.last\n",
    "app/views.py": "def index(req):\n    if req.user:\n        return 'hi'\n    return 'bye'\n",
    "lib/util.c": "int clamp(int x) { return x < 0 ? 0 : x; }\n",
}

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "features.jsonl"
    store = FeatureStore.open(path)
    with store.writer():
        print("first pass:", store.update(files.items()).to_json())

    files["app/views.py"] += "\ndef about(req):\n    return 'about'\n"
    store = FeatureStore.open(path)
    with store.writer():
        print("second pass:", store.update(files.items()).to_json())

    for rec in store.lookup(["app/views.py", "app/missing.py"]):
        print(rec)
