"""Does the composite score lose information? Compare it with top-k sub-factors."""

from triage.codehealth import SUB_FACTORS, WeightConfig
from triage.outcomes import generate_corpus, synthesize_features
from triage.evaluation import rq1_compare

corpus = generate_corpus(400, seed=10)

# a corpus where only cyclomatic complexity moves the composite
one_factor = WeightConfig(weights={n: (9.0 if n == "cyclomatic_max" else 0.0) for n in SUB_FACTORS})
store = synthesize_features(corpus, one_factor, seed=10)

table = rq1_compare(corpus, store, k_list=(1, 3))
for row in table["ranking"][:4]:
    print(f"{row['feature']:<22} shapley {row['shapley']:+.4f}")
for v in table["variants"]:
    print(f"{v['variant']:<10} mcc {v['mcc']:.4f}  savings {v['savings']:.2f}  features {v['features']}")
