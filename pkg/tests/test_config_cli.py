import json

import pytest

from triage import config as config_mod
from triage.cli import run
from triage.codehealth import WeightConfig
from triage.costmodel import CostParams
from triage.errors import ConfigurationError


def test_config_round_trip():
    cfg = config_mod.Config(costs=CostParams(2, 4, 20), thresholds=(8.5, 4.0), seed=7, caliper=0.5,
                            weights=WeightConfig(weights=dict(WeightConfig().weights, file_loc=2.0)))
    again = config_mod.loads(config_mod.dumps(cfg))
    assert again == cfg
    assert config_mod.loads(config_mod.dumps(config_mod.Config())) == config_mod.Config()


@pytest.mark.parametrize("text", [
    "[mystery]\nx = 1\n",
    "[costs]\nc_X = 1\n",
    "[costs]\nc_L = 20\n",
    "[router]\nthresholds = [3, 7]\n",
    "[pilot]\nsize = oops\n",
])
def test_config_rejects(text):
    with pytest.raises(ConfigurationError):
        config_mod.loads(text)


def test_partial_config_keeps_defaults():
    cfg = config_mod.loads("[pilot]\np_hat_threshold = 0.6\n")
    assert cfg.pilot.p_hat_threshold == 0.6
    assert cfg.costs == CostParams()


# ---------------------------------------------------------------------------
# CLI

def _json(capsys):
    return json.loads(capsys.readouterr().out)


def test_cli_analyze(tmp_path, capsys):
    src = tmp_path / "a.py"
    src.write_text("def f(x):\n    if x:\n        return 1\n    return 2\n")
    assert run(["analyze", str(src)]) == 0
    out = _json(capsys)
    assert out["files"][0]["sub_factors"]["cyclomatic_max"] == 2


def test_cli_store_round_trip(tmp_path, capsys):
    src = tmp_path / "a.py"
    src.write_text("x = 1\n")
    store = tmp_path / "features.jsonl"
    assert run(["store", "update", str(src), "--store", str(store)]) == 0
    assert _json(capsys)["analyzed"] == [str(src)]
    assert run(["store", "update", str(src), "--store", str(store)]) == 0
    assert _json(capsys)["cache_hits"] == [str(src)]
    assert run(["store", "get", str(src), "nope.py", "--store", str(store)]) == 3
    records = _json(capsys)["records"]
    assert records[1] == {"path": "nope.py", "missing": True}


def test_cli_pipeline(tmp_path, capsys):
    corpus = tmp_path / "corpus.jsonl"
    feats = tmp_path / "features.jsonl"
    assert run(["gen-corpus", "--n", "300", "--seed", "3", "--out", str(corpus),
                "--features", str(feats)]) == 0
    assert run(["ingest", str(corpus)]) == 0
    assert _json(capsys)["total_runs"] == 2700
    assert run(["pilot", "--corpus", str(corpus)]) == 0
    assert _json(capsys)["verdict"] == "GO"

    model = tmp_path / "model.json"
    assert run(["train", "--corpus", str(corpus), "--store", str(feats), "--out", str(model)]) == 0
    assert run(["route", str(corpus), "--policy", "classifier", "--model", str(model),
                "--store", str(feats)]) == 0
    assert len(_json(capsys)["decisions"]) == 300
    assert run(["simulate", "--corpus", str(corpus), "--trials", "3", "--resample"]) == 0
    assert _json(capsys)["n_trials"] == 3
    assert run(["evaluate", "--corpus", str(corpus), "--store", str(feats),
                "--policies", "heuristic,oracle", "--text"]) == 0
    assert "heuristic" in capsys.readouterr().out


def test_cli_pilot_nogo_exit_code(tmp_path, capsys):
    corpus = tmp_path / "null.jsonl"
    assert run(["gen-corpus", "--n", "300", "--null", "--seed", "1", "--out", str(corpus)]) == 0
    assert run(["pilot", "--corpus", str(corpus)]) == 1
    assert _json(capsys)["verdict"] == "NO-GO"


def test_cli_stats_bm(tmp_path, capsys):
    x, y = tmp_path / "x.txt", tmp_path / "y.txt"
    x.write_text("1 2 3 4 5")
    y.write_text("[3, 4, 5, 6, 7]")
    assert run(["stats", "bm", "--x", str(x), "--y", str(y)]) == 0
    assert _json(capsys)["p_hat"] == pytest.approx(0.18)


def test_cli_missing_corpus_named(tmp_path, capsys):
    missing = tmp_path / "absent.jsonl"
    assert run(["evaluate", "--corpus", str(missing)]) == 3
    assert str(missing) in capsys.readouterr().err


def test_cli_usage_errors(tmp_path, capsys):
    assert run(["frobnicate"]) == 2
    assert run(["simulate", "--corpus", "x", "--costs", "3,1,15"]) == 2
    bad = tmp_path / "bad.ini"
    bad.write_text("[nope]\n")
    assert run(["config", "--config", str(bad)]) == 2
    corpus = tmp_path / "c.jsonl"
    assert run(["gen-corpus", "--n", "5", "--out", str(corpus)]) == 0
    assert run(["route", str(corpus), "--policy", "classifier"]) == 2
    assert "--model" in capsys.readouterr().err


def test_cli_config_dump(tmp_path, capsys):
    assert run(["config", "--seed", "5"]) == 0
    assert config_mod.loads(capsys.readouterr().out).seed == 5
