"""Nonparametric effect sizes, the Brunner-Munzel test, multiclass MCC,
caliper matching and exact Shapley importance."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy import stats as sps

from .errors import StatsError

MAX_SHAPLEY_FEATURES = 12


@dataclass(frozen=True)
class EffectResult:
    """Outcome of comparing sample x against sample y.

    ``p_hat`` is P(X > Y) + P(X = Y) / 2. The statistic follows the usual
    Brunner-Munzel orientation: it is positive when y tends to exceed x.
    ``degenerate`` marks samples whose placement variances are both zero;
    the statistic is then 0 (identical samples) or infinite (complete
    separation) and ``bm_df`` is nan.
    """

    p_hat: float
    n_x: int
    n_y: int
    bm_statistic: float
    bm_df: float
    bm_p_value: float
    alternative: str = "two-sided"
    degenerate: bool = False

    def to_json(self) -> dict:
        def num(x):
            return None if math.isnan(x) else (str(x) if math.isinf(x) else float(x))
        return {"p_hat": self.p_hat, "n_x": self.n_x, "n_y": self.n_y,
                "bm_statistic": num(self.bm_statistic), "bm_df": num(self.bm_df),
                "bm_p_value": self.bm_p_value, "alternative": self.alternative,
                "degenerate": self.degenerate}


def _sample(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0:
        raise StatsError(f"sample {name} is empty")
    if np.isnan(arr).any():
        raise StatsError(f"sample {name} contains nan")
    return arr


def prob_superiority(xs, ys) -> float:
    """P(X > Y) with ties counted half, via sorting (O(n log n))."""
    x = _sample(xs, "xs")
    y = np.sort(_sample(ys, "ys"))
    below = np.searchsorted(y, x, side="left")
    not_above = np.searchsorted(y, x, side="right")
    wins = below.sum()
    ties = (not_above - below).sum()
    return float((wins + 0.5 * ties) / (x.size * y.size))


def brunner_munzel(xs, ys, alternative: str = "two-sided") -> EffectResult:
    """Brunner-Munzel test with a t approximation.

    ``alternative="greater"`` tests whether x is stochastically greater than
    y, ``"less"`` the reverse.
    """
    if alternative not in ("two-sided", "greater", "less"):
        raise StatsError(f"unknown alternative {alternative!r}")
    x = _sample(xs, "xs")
    y = _sample(ys, "ys")
    nx, ny = x.size, y.size
    if nx < 2 or ny < 2:
        raise StatsError("Brunner-Munzel needs at least two observations per sample")
    pooled = sps.rankdata(np.concatenate([x, y]))
    rx, ry = pooled[:nx], pooled[nx:]
    inner_x, inner_y = sps.rankdata(x), sps.rankdata(y)
    mx, my = rx.mean(), ry.mean()
    var_x = ((rx - inner_x - mx + (nx + 1) / 2) ** 2).sum() / (nx - 1)
    var_y = ((ry - inner_y - my + (ny + 1) / 2) ** 2).sum() / (ny - 1)
    p_hat = prob_superiority(x, y)
    spread = nx * var_x + ny * var_y
    if spread == 0:
        diff = my - mx
        if diff == 0:
            stat, p = 0.0, 1.0
        else:
            stat = math.copysign(math.inf, diff)
            if alternative == "two-sided":
                p = 0.0
            elif alternative == "greater":
                p = 0.0 if diff < 0 else 1.0
            else:
                p = 0.0 if diff > 0 else 1.0
        return EffectResult(p_hat, nx, ny, stat, math.nan, p, alternative, degenerate=True)
    stat = nx * ny * (my - mx) / ((nx + ny) * math.sqrt(spread))
    df = spread ** 2 / ((nx * var_x) ** 2 / (nx - 1) + (ny * var_y) ** 2 / (ny - 1))
    if alternative == "two-sided":
        p = 2.0 * sps.t.sf(abs(stat), df)
    elif alternative == "greater":
        p = sps.t.cdf(stat, df)
    else:
        p = sps.t.sf(stat, df)
    return EffectResult(p_hat, nx, ny, float(stat), float(df), float(min(1.0, p)), alternative)


# ---------------------------------------------------------------------------

def confusion_matrix(truth, predicted, k: int = 3) -> np.ndarray:
    """Rows are true (oracle) classes, columns predicted (routed) classes."""
    truth = np.asarray(truth, dtype=int)
    predicted = np.asarray(predicted, dtype=int)
    cm = np.zeros((k, k), dtype=np.int64)
    np.add.at(cm, (truth, predicted), 1)
    return cm


def mcc(cm) -> float:
    """Multiclass Matthews correlation; 0 when the denominator vanishes."""
    C = np.asarray(cm, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise StatsError("confusion matrix must be square")
    if (C < 0).any():
        raise StatsError("confusion matrix counts must be non-negative")
    s = C.sum()
    if s == 0:
        raise StatsError("confusion matrix is empty")
    t = C.sum(axis=1)
    p = C.sum(axis=0)
    c = np.trace(C)
    num = c * s - t @ p
    den = math.sqrt(s * s - p @ p) * math.sqrt(s * s - t @ t)
    return 0.0 if den == 0 else float(num / den)


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MatchResult:
    pairs: list          # (high_id, low_id, distance)
    unmatched_high: list
    unmatched_low: list
    caliper: float


def default_caliper(values) -> float:
    """Twenty percent of the proxy's interquartile range."""
    q75, q25 = np.percentile(np.asarray(values, dtype=float), [75, 25])
    return 0.2 * float(q75 - q25)


def matched_pairs(high: dict, low: dict, caliper: float | None = None) -> MatchResult:
    """Greedy nearest-neighbour caliper matching without replacement.

    ``high`` and ``low`` map task ids to their difficulty proxy. Candidate
    pairs within the caliper are taken in order of increasing distance, ties
    broken by task id, so swapping the two groups yields the same pairs.
    """
    if not high or not low:
        raise StatsError("matching needs two non-empty groups")
    if caliper is None:
        caliper = default_caliper(list(high.values()) + list(low.values()))
    if caliper < 0:
        raise StatsError("caliper must be non-negative")
    candidates = []
    for a in sorted(high):
        for b in sorted(low):
            dist = abs(float(high[a]) - float(low[b]))
            if dist <= caliper:
                candidates.append((dist, min(a, b), max(a, b), a, b))
    candidates.sort()
    used_h, used_l = set(), set()
    pairs = []
    for dist, _, _, a, b in candidates:
        if a in used_h or b in used_l:
            continue
        used_h.add(a)
        used_l.add(b)
        pairs.append((a, b, dist))
    pairs.sort()
    return MatchResult(pairs, sorted(set(high) - used_h), sorted(set(low) - used_l), float(caliper))


# ---------------------------------------------------------------------------

def shapley_values(features, value_fn) -> dict:
    """Exact Shapley value of every feature under a set function.

    ``value_fn`` takes a frozenset of feature names; it is called once per
    subset (2**k calls).
    """
    features = list(features)
    k = len(features)
    if len(set(features)) != k:
        raise StatsError("feature names must be unique")
    if k > MAX_SHAPLEY_FEATURES:
        raise StatsError(f"exact Shapley enumeration over {k} features is infeasible; "
                         f"reduce the feature set to at most {MAX_SHAPLEY_FEATURES}")
    cache: dict[frozenset, float] = {}

    def v(subset) -> float:
        if subset not in cache:
            cache[subset] = float(value_fn(subset))
        return cache[subset]

    weights = [math.factorial(s) * math.factorial(k - s - 1) / math.factorial(k) for s in range(k)]
    phi = {}
    for f in features:
        others = [g for g in features if g != f]
        total = 0.0
        for size in range(k):
            for combo in combinations(others, size):
                s = frozenset(combo)
                total += weights[size] * (v(s | {f}) - v(s))
        phi[f] = total
    return phi


def shapley_importance(features, value_fn) -> list[tuple[str, float]]:
    """Features ranked by descending Shapley value, ties broken by name."""
    phi = shapley_values(features, value_fn)
    return sorted(phi.items(), key=lambda kv: (-kv[1], kv[0]))
