"""Full policy comparison: metrics, coverage strata, matched pairs and gates."""

from triage.evaluation import EvalConfig, evaluate, summary_table
from triage.outcomes import generate_corpus, synthesize_features

corpus = generate_corpus(400, seed=5)
store = synthesize_features(corpus)
report = evaluate(corpus, store=store, cfg=EvalConfig(folds=5, seed=0))

print(summary_table(report))
print("oracle tiers:", report["oracle_distribution"])
print("tasks no tier solves:", len(report["all_tiers_fail"]))

mp = report["matched_pairs"]
print(f"matched healthy/unhealthy pairs: {mp['n_pairs']}, light-pass p_hat {mp['effect']['p_hat']:.3f}")

for stratum, m in report["policies"]["heuristic"]["strata"].items():
    print(f"heuristic, coverage {stratum:<11} n={m['n_tasks']:<4} cost {m['realized_cost']:.2f}")
