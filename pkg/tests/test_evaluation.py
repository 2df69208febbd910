import json

import pytest
from hypothesis import given, strategies as st

from conftest import make_task
from triage.costmodel import CostParams, GateVerdict, cost_gate
from triage.errors import DomainError
from triage.evaluation import (
    PILOT_SIZE,
    EvalConfig,
    PilotConfig,
    draw_pilot,
    dumps_report,
    evaluate,
    go_decision,
    pilot_gates,
    rq1_compare,
    signal_gate,
    summary_table,
)
from triage.outcomes import AsymmetryParams, generate_corpus, synthesize_features
from triage.tasks import Corpus

COSTS = CostParams(1, 3, 15)
CHEAP = ("heuristic", "oracle", "always_light", "always_heavy", "random")


@pytest.fixture(scope="module")
def corpus():
    return generate_corpus(200, seed=4)


@pytest.fixture(scope="module")
def report(corpus):
    return evaluate(corpus, CHEAP, COSTS)


def test_oracle_is_perfectly_accurate(report):
    m = report["policies"]["oracle"]
    assert m["triage_accuracy"] == 1.0
    assert m["over_triage_rate"] == m["under_triage_rate"] == 0.0


def test_always_heavy_over_triage_count(report):
    dist = report["oracle_distribution"]
    m = report["policies"]["always_heavy"]
    assert m["n_over"] == dist["light"] + dist["standard"]
    assert m["n_under"] == 0
    assert m["realized_cost"] == 15.0


def test_always_light_when_light_never_passes():
    corpus = Corpus([make_task(f"t{i}", light="fff", standard="ppp" if i % 2 else "fff")
                     for i in range(10)])
    m = evaluate(corpus, ("always_light",), COSTS)["policies"]["always_light"]
    assert m["realized_cost"] == COSTS.c_L + COSTS.c_H
    assert m["n_under"] == 10
    heavy = evaluate(corpus, ("always_heavy",), COSTS)["policies"]["always_heavy"]
    assert m["success_rate"] == heavy["success_rate"]


def test_partition_identity(report):
    for m in report["policies"].values():
        assert m["n_correct"] + m["n_over"] + m["n_under"] == m["n_tasks"]
        assert m["triage_accuracy"] + m["over_triage_rate"] + m["under_triage_rate"] == pytest.approx(1.0)


def test_strata_aggregate_to_total(report):
    for m in report["policies"].values():
        strata = m["strata"].values()
        assert sum(s["n_tasks"] for s in strata) == m["n_tasks"]
        assert sum(s["total_cost"] for s in strata) == pytest.approx(m["total_cost"])
        assert sum(s["n_successes"] for s in strata) == m["n_successes"]


def test_unknown_coverage_stratum():
    corpus = Corpus([make_task("a", coverage=0.1), make_task("b", coverage=None),
                     make_task("c", coverage=1.0)])
    strata = evaluate(corpus, ("oracle",), COSTS)["policies"]["oracle"]["strata"]
    assert {k: v["n_tasks"] for k, v in strata.items()} == {"[0, 0.3)": 1, "[0.7, 1]": 1, "unknown": 1}


def test_all_tiers_fail_listed_and_charged_heavy():
    corpus = Corpus([make_task("dead", light="fff", standard="fff", heavy="fff"), make_task("ok")])
    report = evaluate(corpus, ("oracle",), COSTS)
    assert report["all_tiers_fail"] == ["dead"]
    assert report["policies"]["oracle"]["total_cost"] == 15.0 + 1.0
    assert report["policies"]["oracle"]["cost_per_successful_task"] == 16.0


def test_report_deterministic_and_strict_json(corpus):
    store = synthesize_features(corpus)
    a = dumps_report(evaluate(corpus, costs=COSTS, store=store, cfg=EvalConfig(folds=3)))
    b = dumps_report(evaluate(corpus, costs=COSTS, store=store, cfg=EvalConfig(folds=3)))
    assert a == b
    parsed = json.loads(a)
    assert parsed["schema_version"] == 1
    assert set(parsed["policies"]) >= {"classifier", "heuristic"}
    assert "pilot gates" in summary_table(parsed)


def test_matched_pairs_reported(report):
    mp = report["matched_pairs"]
    assert mp["n_pairs"] > 0
    assert mp["effect"]["p_hat"] > 0.5  # healthy tasks pass light more often


# ---------------------------------------------------------------------------
# gates

def test_gate_constants():
    assert cost_gate(0.25, 1, 5).passed and not cost_gate(0.20, 1, 5).passed
    assert signal_gate(0.56).passed and not signal_gate(0.5599).passed
    assert not signal_gate(None).passed


@given(st.booleans(), st.booleans())
def test_go_is_conjunction(c, s):
    cv = GateVerdict(c, 0.0, 0.0, "")
    sv = GateVerdict(s, 0.0, 0.0, "")
    assert go_decision(cv, sv) == (c and s)


def test_pilot_refuses_small_corpus():
    small = generate_corpus(19, seed=0)
    with pytest.raises(DomainError, match="at least 20"):
        pilot_gates(small)
    pilot_gates(generate_corpus(20, seed=0))


def test_pilot_defaults_to_fifty():
    assert PILOT_SIZE == 50 and PilotConfig().size == 50
    sample = draw_pilot(generate_corpus(300, seed=0), seed=3)
    assert len(sample) == 50
    assert [t.task_id for t in sample] == [t.task_id for t in draw_pilot(generate_corpus(300, seed=0), seed=3)]
    report = pilot_gates(sample)
    assert report.n_tasks == 50 and not any("nominal" in n for n in report.notes)


def test_pilot_go_and_nogo():
    asym = pilot_gates(generate_corpus(300, seed=1))
    assert asym.go
    flat = pilot_gates(generate_corpus(300, params=AsymmetryParams.null(), seed=1))
    assert not flat.go


def test_pilot_with_undefined_signal_serializes():
    corpus = Corpus([make_task(f"t{i:02d}", healths=(9.5,)) for i in range(25)])
    report = pilot_gates(corpus)
    assert not report.go
    out = report.to_json()
    assert out["signal_gate"]["observed"] is None
    json.dumps(out, allow_nan=False)


def test_cost_ratio_override():
    corpus = generate_corpus(100, seed=2)
    report = pilot_gates(corpus, cfg=PilotConfig(cost_ratio=0.99))
    assert report.cost.threshold == 0.99 and not report.cost.passed


def test_per_run_rates_are_diagnostic_only():
    corpus = Corpus([make_task("a", light="pff"), make_task("b", light="ppf")])
    report = evaluate(corpus, ("always_light",), COSTS)
    assert report["diagnostics"]["per_run_pass_rate"]["light"] == pytest.approx(3 / 6)
    # majority verdicts: a fails light, b passes
    assert report["policies"]["always_light"]["n_successes"] == 2
    assert report["policies"]["always_light"]["total_cost"] == 1 + 15 + 1


def test_rq1_empty_k_list_trains_nothing(corpus):
    table = rq1_compare(corpus, store=None, k_list=())
    assert table["variants"] == [] and table["ranking"] == []
    with pytest.raises(DomainError):
        rq1_compare(corpus, synthesize_features(corpus), k_list=(9,))
