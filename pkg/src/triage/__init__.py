"""Cost-aware routing of software-engineering tasks to model tiers by code health."""

from .codehealth import (
    Band,
    HealthScore,
    SubFactorVector,
    WeightConfig,
    analyze_file,
    band_of,
    composite_score,
)
from .costmodel import CostParams, RoutingMix, cost_gate, expected_cost, savings_vs_heavy, simulate_policy
from .errors import TriageError
from .evaluation import evaluate, pilot_gates, rq1_compare
from .featurestore import FeatureStore, lookup, update_store
from .outcomes import AsymmetryParams, HealthDistribution, generate_corpus, ingest_runs, majority_pass
from .router import (
    RoutingDecision,
    TierModel,
    route_baseline,
    route_classifier,
    route_heuristic,
    route_oracle,
    task_health,
    train_classifier,
)
from .stats import brunner_munzel, matched_pairs, mcc, prob_superiority, shapley_importance
from .tasks import Corpus, TaskFile, TaskRecord, Tier

__version__ = "0.1.0"
