"""Evaluation formulas over truth and prediction tables.

Tables are plain mappings ``fix id -> set of inducing ids``.  Sums go
through ``math.fsum`` so results do not depend on iteration order.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from typing import Iterable, Mapping

from scipy import stats as _stats

from .errors import DegenerateVariance, MismatchedFix

logger = logging.getLogger(__name__)

Table = Mapping[str, "set[str] | frozenset[str]"]
Pair = tuple[str, str]


@dataclass(frozen=True)
class MetricRow:
    algorithm: str
    precision: float
    recall: float
    f1: float
    n_fixes_recall: int
    n_fixes_precision: int

    def to_json(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class FixScore:
    recall: float
    precision: float | None


@dataclass(frozen=True)
class Contribution:
    numerator: int
    denominator: int

    @property
    def ratio(self) -> float:
        return self.numerator / self.denominator if self.denominator else 0.0

    def to_json(self) -> dict:
        return {"numerator": self.numerator, "denominator": self.denominator, "ratio": self.ratio}


@dataclass(frozen=True)
class Comparison:
    t_statistic: float
    p_value: float
    cohens_d: float
    df: int

    def to_json(self) -> dict:
        return asdict(self)


def f1_score(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def scores(truth: set[str], predicted: set[str]) -> FixScore:
    hit = len(set(truth) & set(predicted))
    recall = hit / len(truth) if truth else 0.0
    precision = hit / len(predicted) if predicted else None
    return FixScore(recall, precision)


def per_fix_scores(truth, predicted) -> FixScore:
    """Scores for one BugFixLink against one Prediction."""
    if truth.fixing_commit.id != predicted.fixing_commit.id:
        raise MismatchedFix(f"{truth.fixing_commit.short} vs {predicted.fixing_commit.short}")
    return scores(truth.inducing_ids, predicted.inducing_ids)


def metric_row(algorithm: str, truth: Table, predicted: Table) -> MetricRow:
    recalls, precisions = [], []
    for fix, want in truth.items():
        s = scores(set(want), set(predicted.get(fix, ())))
        recalls.append(s.recall)
        if s.precision is not None:
            precisions.append(s.precision)
    r = math.fsum(recalls) / len(recalls) if recalls else 0.0
    p = math.fsum(precisions) / len(precisions) if precisions else 0.0
    return MetricRow(algorithm, p, r, f1_score(p, r), len(recalls), len(precisions))


def aggregate(truth: Table, predictions: Mapping[str, Table]) -> list[MetricRow]:
    return [metric_row(alg, truth, pred) for alg, pred in predictions.items()]


def ablate(truth: Table, rmg_fixes: Iterable[str] = (), amg_inducers: Iterable[str] = ()) -> dict[str, set[str]]:
    """Truth table without RMG fixes and AMG inducers; emptied fixes are dropped."""
    drop_fix, drop_ind = set(rmg_fixes), set(amg_inducers)
    out = {}
    for fix, want in truth.items():
        if fix in drop_fix:
            continue
        kept = set(want) - drop_ind
        if kept:
            out[fix] = kept
    return out


def ghost_ablation(truth: Table, predictions: Mapping[str, Table], rmg_fixes: Iterable[str] = (),
                   amg_inducers: Iterable[str] = (), filter_rmg: bool = True,
                   filter_amg: bool = True) -> list[MetricRow]:
    t = ablate(truth, rmg_fixes if filter_rmg else (), amg_inducers if filter_amg else ())
    return aggregate(t, predictions)


# ---------------------------------------------------------- complementarity


def correct_pairs(truth: Table, predicted: Table) -> set[Pair]:
    return {(fix, c) for fix, want in truth.items() for c in set(want) & set(predicted.get(fix, ()))}


def overlap(a: set, b: set) -> float:
    """Intersection over union; two empty sets count as identical (1.0)."""
    union = a | b
    if not union:
        return 1.0
    return len(a & b) / len(union)


def overlap_matrix(correct: Mapping[str, set]) -> tuple[list[str], list[list[float]]]:
    names = list(correct)
    return names, [[overlap(correct[i], correct[j]) for j in names] for i in names]


def unique_contribution(correct_i: set, others: set) -> Contribution:
    return Contribution(len(correct_i - others), len(correct_i | others))


def unique_contributions(correct: Mapping[str, set]) -> dict[str, Contribution]:
    out = {}
    for name, mine in correct.items():
        others: set = set()
        for other, theirs in correct.items():
            if other != name:
                others |= theirs
        out[name] = unique_contribution(mine, others)
    return out


# --------------------------------------------------------------- statistics


def _mean(xs: list[float]) -> float:
    return math.fsum(xs) / len(xs)


def _var(xs: list[float], mean: float) -> float:
    return math.fsum((x - mean) ** 2 for x in xs) / (len(xs) - 1)


def skewness(xs: list[float]) -> float:
    n = len(xs)
    m = _mean(xs)
    m2 = math.fsum((x - m) ** 2 for x in xs) / n
    if m2 == 0:
        return 0.0
    m3 = math.fsum((x - m) ** 3 for x in xs) / n
    return m3 / m2 ** 1.5


def compare_recall_series(a: Iterable[float], b: Iterable[float]) -> Comparison:
    """Pooled two-sample t-test with Cohen's d on the pooled SD."""
    a, b = [float(x) for x in a], [float(x) for x in b]
    if len(a) < 2 or len(b) < 2:
        raise ValueError("each series needs at least two values")
    for name, xs in (("a", a), ("b", b)):
        g = skewness(xs)
        if abs(g) > 2:
            logger.warning("series %s is strongly skewed (%.2f); t-test assumptions are weak", name, g)
    na, nb = len(a), len(b)
    ma, mb = _mean(a), _mean(b)
    df = na + nb - 2
    pooled = ((na - 1) * _var(a, ma) + (nb - 1) * _var(b, mb)) / df
    diff = ma - mb
    if pooled == 0:
        if diff == 0:
            raise DegenerateVariance("both series constant with equal means")
        inf = math.copysign(math.inf, diff)
        return Comparison(inf, 0.0, inf, df)
    sd = math.sqrt(pooled)
    t = diff / (sd * math.sqrt(1 / na + 1 / nb))
    p = float(2 * _stats.t.sf(abs(t), df))
    return Comparison(t, p, diff / sd, df)


def fix_year(timestamp: int) -> int:
    year = datetime.fromtimestamp(timestamp, tz=timezone.utc).year
    return 2014 if year == 2013 else year


def recall_by_year(truth: Table, predicted: Table, years: Mapping[str, int]) -> dict[int, float]:
    """Mean recall per fix year (``years`` maps fix id to year; 2013 is folded into 2014)."""
    buckets: dict[int, list[float]] = {}
    for fix, want in truth.items():
        y = years[fix]
        y = 2014 if y == 2013 else y
        buckets.setdefault(y, []).append(scores(set(want), set(predicted.get(fix, ()))).recall)
    return {y: math.fsum(v) / len(v) for y, v in sorted(buckets.items())}
