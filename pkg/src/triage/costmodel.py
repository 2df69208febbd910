"""Expected routing cost, savings over always-heavy, the cost gate, and a
Monte Carlo simulator with single-step heavy fallback."""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, SimulationError
from .tasks import CorpusArrays, Tier, compile_corpus


@dataclass(frozen=True)
class CostParams:
    c_L: float = 1.0
    c_S: float = 3.0
    c_H: float = 15.0

    def __post_init__(self):
        if not all(math.isfinite(c) for c in self.as_tuple()):
            raise DomainError("costs must be finite")
        if not 0 < self.c_L < self.c_S < self.c_H:
            raise DomainError(f"costs must satisfy 0 < c_L < c_S < c_H, got {self.as_tuple()}")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.c_L, self.c_S, self.c_H)

    def array(self) -> np.ndarray:
        return np.array(self.as_tuple(), dtype=float)

    @classmethod
    def parse(cls, text: str) -> "CostParams":
        """Parse ``"1,3,15"``."""
        try:
            parts = [float(x) for x in text.split(",")]
        except ValueError:
            raise DomainError(f"cannot parse costs {text!r}") from None
        if len(parts) != 3:
            raise DomainError(f"expected three costs c_L,c_S,c_H, got {text!r}")
        return cls(*parts)


@dataclass(frozen=True)
class RoutingMix:
    r_L: float = 0.0
    r_S: float = 0.0
    f_L: float = 0.0
    f_S: float = 0.0

    def __post_init__(self):
        for name in ("r_L", "r_S", "f_L", "f_S"):
            value = getattr(self, name)
            if not (math.isfinite(value) and 0.0 <= value <= 1.0):
                raise DomainError(f"{name} must lie in [0, 1], got {value!r}")
        if self.r_L + self.r_S > 1.0 + 1e-12:
            raise DomainError(f"r_L + r_S must not exceed 1, got {self.r_L + self.r_S!r}")

    def as_dict(self) -> dict:
        return {"r_L": self.r_L, "r_S": self.r_S, "f_L": self.f_L, "f_S": self.f_S}


def expected_cost(p: CostParams, m: RoutingMix) -> float:
    """Expected cost per task when failed light/standard routes fall back to heavy."""
    return (m.r_L * (p.c_L + m.f_L * p.c_H)
            + m.r_S * (p.c_S + m.f_S * p.c_H)
            + (1.0 - m.r_L - m.r_S) * p.c_H)


def savings_vs_heavy(p: CostParams, m: RoutingMix) -> float:
    """Perfect-routing margin minus the fallback penalty."""
    return (m.r_L * (p.c_H - p.c_L) + m.r_S * (p.c_H - p.c_S)
            - (m.r_L * m.f_L + m.r_S * m.f_S) * p.c_H)


@dataclass(frozen=True)
class GateVerdict:
    passed: bool
    observed: float
    threshold: float
    rule: str

    def as_dict(self) -> dict:
        observed = None if math.isnan(self.observed) else self.observed
        return {"passed": self.passed, "observed": observed,
                "threshold": self.threshold, "rule": self.rule}


def cost_gate(pass_rate: float, c_L: float, c_H: float) -> GateVerdict:
    """Try-light-first beats always-heavy iff pass_rate > c_L / c_H (strict)."""
    if not 0.0 <= pass_rate <= 1.0:
        raise DomainError(f"pass_rate must lie in [0, 1], got {pass_rate!r}")
    if not 0 < c_L < c_H:
        raise DomainError(f"need 0 < c_L < c_H, got {(c_L, c_H)}")
    ratio = c_L / c_H
    return GateVerdict(pass_rate > ratio, pass_rate, ratio, "pass_rate > c_L/c_H")


# ---------------------------------------------------------------------------
# realized costs

def task_costs(tiers: np.ndarray, verdicts: np.ndarray, p: CostParams):
    """Per-task charge and success under single-step heavy fallback.

    A failed light or standard route additionally pays ``c_H``; the heavy
    re-run is charged even when it fails too, and the task then counts as
    unsuccessful.
    """
    tiers = np.asarray(tiers, dtype=int)
    n = len(tiers)
    idx = np.arange(n)
    routed_pass = verdicts[idx, tiers]
    heavy_pass = verdicts[:, Tier.HEAVY]
    fallback = (~routed_pass) & (tiers != Tier.HEAVY)
    cost = p.array()[tiers] + fallback * p.c_H
    success = routed_pass | (fallback & heavy_pass)
    return cost, success


def realized_mix(tiers: np.ndarray, verdicts: np.ndarray) -> RoutingMix:
    tiers = np.asarray(tiers, dtype=int)
    n = len(tiers)
    if n == 0:
        return RoutingMix()
    idx = np.arange(n)
    fail = ~verdicts[idx, tiers]
    light, standard = tiers == Tier.LIGHT, tiers == Tier.STANDARD
    n_l, n_s = int(light.sum()), int(standard.sum())
    return RoutingMix(
        r_L=n_l / n,
        r_S=n_s / n,
        f_L=float(fail[light].sum() / n_l) if n_l else 0.0,
        f_S=float(fail[standard].sum() / n_s) if n_s else 0.0,
    )


class MixPolicy:
    """Routes each task at random: light with prob r_L, standard with r_S."""

    name = "mix"
    deterministic = False

    def __init__(self, r_L: float, r_S: float):
        RoutingMix(r_L, r_S)
        self.r_L, self.r_S = r_L, r_S

    def assign(self, arrays: CorpusArrays, verdicts: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        u = rng.random(len(arrays))
        return np.where(u < self.r_L, 0, np.where(u < self.r_L + self.r_S, 1, 2))


class _ScenarioIds(Sequence):
    """Task ids ``mix-0 .. mix-(n-1)`` built on demand."""

    def __init__(self, n: int):
        self.n = n

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [f"mix-{j}" for j in range(*i.indices(self.n))]
        if not -self.n <= i < self.n:
            raise IndexError(i)
        return f"mix-{i % self.n}"


def mix_scenario(m: RoutingMix, n_tasks: int) -> tuple[CorpusArrays, MixPolicy]:
    """Synthetic corpus and policy realizing a routing mix in expectation.

    Every task passes light with probability ``1 - f_L``, standard with
    ``1 - f_S`` and heavy always, each from a single run.
    """
    probs = np.tile([1.0 - m.f_L, 1.0 - m.f_S, 1.0], (n_tasks, 1))
    arrays = CorpusArrays(
        task_ids=_ScenarioIds(n_tasks),
        health=np.full(n_tasks, np.nan),
        runs=None,
        pass_prob=probs,
        patch_size=np.zeros(n_tasks),
        coverage=np.full(n_tasks, np.nan),
    )
    return arrays, MixPolicy(m.r_L, m.r_S)


@dataclass
class SimulationResult:
    costs: CostParams
    n_tasks: int
    n_trials: int
    mean_cost: np.ndarray          # per trial
    cost_per_success: np.ndarray   # per trial; nan when no task succeeded
    success_rate: np.ndarray       # per trial
    mixes: list = field(default_factory=list)
    pooled_mean: float = 0.0
    standard_error: float = 0.0
    pooled_mix: RoutingMix = field(default_factory=RoutingMix)

    @property
    def closed_form(self) -> float:
        """Expected cost at the pooled empirical mix."""
        return expected_cost(self.costs, self.pooled_mix)

    def to_json(self) -> dict:
        cps = [None if math.isnan(x) else float(x) for x in self.cost_per_success]
        return {
            "costs": list(self.costs.as_tuple()),
            "n_tasks": self.n_tasks,
            "n_trials": self.n_trials,
            "mean_cost": self.pooled_mean,
            "standard_error": self.standard_error,
            "closed_form_at_empirical_mix": self.closed_form,
            "empirical_mix": self.pooled_mix.as_dict(),
            "per_trial": {
                "mean_cost": [float(x) for x in self.mean_cost],
                "cost_per_success": cps,
                "success_rate": [float(x) for x in self.success_rate],
                "mix": [m.as_dict() for m in self.mixes],
            },
        }


def draw_verdicts(pass_prob: np.ndarray, n_runs: int, rng: np.random.Generator) -> np.ndarray:
    """Majority verdicts from ``n_runs`` fresh Bernoulli runs per task and tier."""
    if n_runs == 1:
        return rng.random(pass_prob.shape) < pass_prob
    passes = rng.binomial(n_runs, pass_prob)
    return passes * 2 > n_runs


def simulate_policy(corpus, policy, p: CostParams, seed: int = 0, n_trials: int = 1,
                    resample: bool | None = None, n_runs: int | None = None) -> SimulationResult:
    """Monte Carlo distribution of realized routing cost.

    Trial ``t`` draws from ``numpy.random.default_rng([seed, t])`` so results
    do not depend on execution order. With ``resample`` the verdicts are
    redrawn each trial from the tasks' pass probabilities; otherwise the
    recorded majority verdicts are used.
    """
    if n_trials < 1:
        raise SimulationError("n_trials must be >= 1")
    arrays = corpus if isinstance(corpus, CorpusArrays) else compile_corpus(corpus)
    n = len(arrays)
    if n == 0:
        raise SimulationError("corpus is empty")
    if resample is None:
        resample = arrays.runs is None
    if resample:
        if arrays.pass_prob is None:
            raise SimulationError("resampling needs per-task pass probabilities")
        runs_per_trial = n_runs or (arrays.n_runs or 1)
    elif arrays.runs is None:
        raise SimulationError("corpus tasks carry no recorded outcomes")
    else:
        fixed = arrays.verdicts

    mean_cost = np.empty(n_trials)
    cps = np.empty(n_trials)
    success_rate = np.empty(n_trials)
    mixes = []
    total = total_sq = 0.0
    counts = np.zeros(3)
    fails = np.zeros(3)
    for t in range(n_trials):
        rng = np.random.default_rng([int(seed), t])
        verdicts = draw_verdicts(arrays.pass_prob, runs_per_trial, rng) if resample else fixed
        tiers = np.asarray(policy.assign(arrays, verdicts, rng), dtype=int)
        cost, success = task_costs(tiers, verdicts, p)
        mean_cost[t] = cost.mean()
        n_success = int(success.sum())
        cps[t] = cost.sum() / n_success if n_success else math.nan
        success_rate[t] = n_success / n
        mixes.append(realized_mix(tiers, verdicts))
        total += cost.sum()
        total_sq += float((cost ** 2).sum())
        routed_fail = ~verdicts[np.arange(n), tiers]
        for k in (0, 1):
            sel = tiers == k
            counts[k] += sel.sum()
            fails[k] += routed_fail[sel].sum()
    N = n * n_trials
    pooled = total / N
    var = max(total_sq / N - pooled ** 2, 0.0) * N / max(N - 1, 1)
    pooled_mix = RoutingMix(
        r_L=counts[0] / N, r_S=counts[1] / N,
        f_L=fails[0] / counts[0] if counts[0] else 0.0,
        f_S=fails[1] / counts[1] if counts[1] else 0.0,
    )
    return SimulationResult(costs=p, n_tasks=n, n_trials=n_trials, mean_cost=mean_cost,
                            cost_per_success=cps, success_rate=success_rate, mixes=mixes,
                            pooled_mean=pooled, standard_error=math.sqrt(var / N),
                            pooled_mix=pooled_mix)
