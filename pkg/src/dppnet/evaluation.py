"""Set-recommendation metrics: mean percentile rank and AUC.

Both metrics are rank-based, so they are invariant under strictly monotone
transformations of the underlying scores.  Point estimates come with
percentile-bootstrap confidence intervals, overall and for three basket-size
terciles of the test set.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.stats

from .catalog import Subset, canonical_subset
from .errors import ConfigError, DegenerateSubsetError
from .kernel import condition, log_normalizer, marginal_vector, subset_logdet
from .seeding import substream

logger = logging.getLogger(__name__)

BOOTSTRAP_RESAMPLES = 1000
SEGMENT_NAMES = ("small", "medium", "large")


@dataclass
class SegmentEstimate:
    segment: str
    estimate: float
    ci_low: float
    ci_high: float
    count: int


@dataclass
class EvalReport:
    metric: str
    overall: SegmentEstimate
    segments: list[SegmentEstimate] = field(default_factory=list)

    def all_rows(self) -> list[SegmentEstimate]:
        return [self.overall, *self.segments]

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "segments": [
                {
                    "segment": row.segment,
                    "estimate": row.estimate,
                    "ci_low": row.ci_low,
                    "ci_high": row.ci_high,
                    "count": row.count,
                }
                for row in self.all_rows()
            ],
        }

    def write_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(self.to_dict(), handle, indent=2, sort_keys=True)
            handle.write("\n")

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["metric", "segment", "estimate", "ci_low", "ci_high"])
            for row in self.all_rows():
                writer.writerow(
                    [self.metric, row.segment, repr(row.estimate), repr(row.ci_low), repr(row.ci_high)]
                )


def bootstrap_interval(values: np.ndarray, rng: np.random.Generator, resamples: int):
    """95% percentile-bootstrap interval for the mean, widened if needed so it
    always contains the point estimate."""
    values = np.asarray(values, dtype=np.float64)
    estimate = float(values.mean())
    if values.size == 1:
        return estimate, estimate
    idx = rng.integers(0, values.size, size=(resamples, values.size))
    means = values[idx].mean(axis=1)
    low, high = np.percentile(means, [2.5, 97.5])
    return min(float(low), estimate), max(float(high), estimate)


def _summarize(name, values, rng, resamples) -> SegmentEstimate:
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        return SegmentEstimate(name, float("nan"), float("nan"), float("nan"), 0)
    low, high = bootstrap_interval(values, rng, resamples)
    return SegmentEstimate(name, float(values.mean()), low, high, int(values.size))


def size_terciles(sizes: Sequence[int]) -> list[np.ndarray]:
    """Indices of three near-equal populations ordered by basket size."""
    order = np.argsort(np.asarray(sizes), kind="stable")
    base, extra = divmod(len(order), 3)
    groups, start = [], 0
    for g in range(3):
        width = base + (1 if g < extra else 0)
        groups.append(order[start : start + width])
        start += width
    return groups


def _segment_report(metric, values, sizes, rng, resamples) -> EvalReport:
    overall = _summarize("overall", values, rng, resamples)
    segments = [
        _summarize(name, np.asarray(values)[idx], rng, resamples)
        for name, idx in zip(SEGMENT_NAMES, size_terciles(sizes))
    ]
    return EvalReport(metric=metric, overall=overall, segments=segments)


def percentile_rank(
    V: np.ndarray,
    base: Subset,
    held_out: int,
    tie_convention: str = "midrank",
) -> float:
    """Percentile of the held-out item's conditional score among all items
    outside ``base``, in [0, 100].

    The held-out item always counts fully in its own favor (so the rank is
    never 0); under the default midrank convention ties with other candidates
    count half, so a constant scorer lands at ~50 instead of 100.  The
    ``"ge"`` convention counts every tie fully.
    """
    if held_out in base:
        raise ConfigError("held-out item must lie outside the conditioned basket")
    scores = marginal_vector(condition(V, base))
    members = set(base)
    candidates = np.array([i for i in range(V.shape[0]) if i not in members])
    target = scores[held_out]
    others = scores[candidates[candidates != held_out]]
    if tie_convention == "midrank":
        favorable = 1.0 + np.sum(others < target) + 0.5 * np.sum(others == target)
    elif tie_convention == "ge":
        favorable = 1.0 + np.sum(others <= target)
    else:
        raise ConfigError(f"unknown tie convention {tie_convention!r}")
    return 100.0 * favorable / candidates.size


def mpr(
    V: np.ndarray,
    test_baskets: Sequence[Subset],
    seed: int = 0,
    resamples: int = BOOTSTRAP_RESAMPLES,
    tie_convention: str = "midrank",
) -> EvalReport:
    """Mean percentile rank over the test baskets.

    One member of each basket is held out uniformly at random; baskets with
    fewer than two items (nothing to condition on) and baskets whose
    remainder is degenerate are skipped with a warning.
    """
    heldout_rng = substream(seed, "heldout")
    ranks, sizes = [], []
    skipped = 0
    for basket in test_baskets:
        basket = canonical_subset(basket, V.shape[0])
        if len(basket) < 2:
            skipped += 1
            continue
        held_out = basket[heldout_rng.integers(len(basket))]
        base = tuple(i for i in basket if i != held_out)
        try:
            ranks.append(percentile_rank(V, base, held_out, tie_convention))
        except DegenerateSubsetError:
            skipped += 1
            continue
        sizes.append(len(basket))
    if skipped:
        logger.warning("skipped %d unusable test basket(s)", skipped)
    if not ranks:
        raise ConfigError("no test baskets usable for percentile ranking")
    return _segment_report("mpr", ranks, sizes, substream(seed, "bootstrap"), resamples)


def sample_negative(basket: Subset, catalog_size: int, rng: np.random.Generator) -> Subset:
    """Uniform random subset of the catalog with the same size as ``basket``,
    without replacement."""
    if len(basket) > catalog_size:
        raise ConfigError("negative subset cannot exceed the catalog")
    members = rng.choice(catalog_size, size=len(basket), replace=False)
    return tuple(sorted(int(i) for i in members))


def _mann_whitney_auc(pos: np.ndarray, neg: np.ndarray) -> float:
    """Probability a random positive outscores a random negative, ties half.

    Computed from midranks, so tied scores (including -inf against -inf)
    contribute 1/2; -inf scores rank below every finite score.
    """
    ranks = scipy.stats.rankdata(np.concatenate([pos, neg]))
    rank_sum = ranks[: pos.size].sum()
    u = rank_sum - pos.size * (pos.size + 1) / 2.0
    return float(u / (pos.size * neg.size))


def auc(
    V: np.ndarray,
    positives: Sequence[Subset],
    seed: int = 0,
    resamples: int = BOOTSTRAP_RESAMPLES,
) -> EvalReport:
    """AUC of subset log-likelihood scores, real baskets against size-matched
    uniform random subsets (one negative drawn per positive)."""
    if not positives:
        raise ConfigError("no positive baskets to score")
    negative_rng = substream(seed, "negatives")
    normalizer = log_normalizer(V)  # constant shift, kept for interpretability
    pos_scores, neg_scores, sizes = [], [], []
    for basket in positives:
        basket = canonical_subset(basket, V.shape[0])
        negative = sample_negative(basket, V.shape[0], negative_rng)
        pos_scores.append(subset_logdet(V, basket) - normalizer)
        neg_scores.append(subset_logdet(V, negative) - normalizer)
        sizes.append(len(basket))
    pos_scores = np.array(pos_scores)
    neg_scores = np.array(neg_scores)

    boot_rng = substream(seed, "bootstrap")
    overall = _auc_segment("overall", pos_scores, neg_scores, boot_rng, resamples)
    segments = [
        _auc_segment(name, pos_scores[idx], neg_scores[idx], boot_rng, resamples)
        for name, idx in zip(SEGMENT_NAMES, size_terciles(sizes))
    ]
    return EvalReport(metric="auc", overall=overall, segments=segments)


def _auc_segment(name, pos, neg, rng, resamples) -> SegmentEstimate:
    if pos.size == 0:
        return SegmentEstimate(name, float("nan"), float("nan"), float("nan"), 0)
    estimate = _mann_whitney_auc(pos, neg)
    if pos.size == 1:
        return SegmentEstimate(name, estimate, estimate, estimate, 1)
    samples = np.empty(resamples)
    for r in range(resamples):
        idx = rng.integers(0, pos.size, size=pos.size)
        samples[r] = _mann_whitney_auc(pos[idx], neg[idx])
    low, high = np.percentile(samples, [2.5, 97.5])
    low, high = min(float(low), estimate), max(float(high), estimate)
    return SegmentEstimate(name, estimate, low, high, int(pos.size))
