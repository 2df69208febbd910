"""Route a synthetic corpus with the heuristic, a trained classifier and the oracle."""

import numpy as np

from triage.costmodel import CostParams, task_costs
from triage.outcomes import generate_corpus, synthesize_features
from triage.router import (HeuristicPolicy, OraclePolicy, BaselinePolicy, ClassifierPolicy,
                           build_arrays, route_tasks, train_classifier)

costs = CostParams()
train = generate_corpus(300, seed=1)
test = generate_corpus(300, seed=2)
store = synthesize_features(train + test)

model = train_classifier(train, store, costs=costs)
print(f"classifier tau={model.tau}, features={len(model.feature_names)}")

arrays = build_arrays(test, store)
verdicts = arrays.verdicts
policies = [HeuristicPolicy(), ClassifierPolicy(model), OraclePolicy(),
            BaselinePolicy("always_heavy"), BaselinePolicy("random")]
for policy in policies:
    tiers = policy.assign(arrays, verdicts, np.random.default_rng(0))
    cost, ok = task_costs(tiers, verdicts, costs)
    print(f"{policy.name:<13} mean cost {cost.mean():6.2f}  success {ok.mean():.2f}  "
          f"mix L/S/H {np.bincount(tiers, minlength=3)}")

for d in route_tasks(test[:3], HeuristicPolicy()):
    print(d.task_id, d.tier.label, "-", d.rationale)
