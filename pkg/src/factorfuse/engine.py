"""Merging-path construction: the four fusing strategies.

All strategies produce a :class:`MergingPath` of k nested models, from the
full model (one cluster per level) down to a single cluster.  Model fits go
through a shared thread-safe counter so the evaluation-cost contracts of
each strategy can be asserted:

* ``adaptive``       refits every candidate pair at every step,
* ``fast-adaptive``  orders levels once and tries only adjacent pairs,
* ``fixed``          builds one pairwise LRT distance matrix and runs
                     complete-linkage clustering on it,
* ``fast-fixed``     keeps complete-linkage distances only between adjacent
                     clusters in the initial order, refreshing a single
                     distance per merge.

``FACTORFUSE_THREADS`` caps the candidate-fit thread pool for the adaptive
strategies; results are reduced in candidate order so tie-breaking is
identical with or without threads.
"""

from __future__ import annotations

import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import Grouping, Partition, ResponseData, GAUSSIAN_1D, GAUSSIAN_ND, BINOMIAL, SURVIVAL
from .errors import InvalidStrategy
from .families import FittedModel, LevelStats, fit_stats
from .mds import mds_project_1d

STRATEGIES = ("adaptive", "fast-adaptive", "fixed", "fast-fixed")


class EvalCounter:
    """Thread-safe model-evaluation counter with a per-category breakdown."""

    def __init__(self):
        self._lock = threading.Lock()
        self._counts: dict[str, int] = {}

    def increment(self, category: str = "fit"):
        with self._lock:
            self._counts[category] = self._counts.get(category, 0) + 1

    @property
    def total(self) -> int:
        with self._lock:
            return sum(self._counts.values())

    def breakdown(self) -> dict[str, int]:
        with self._lock:
            return dict(self._counts)


class _TaggedCounter:
    """Routes increments from fit_stats into one category of a counter."""

    def __init__(self, counter: EvalCounter, category: str):
        self._counter = counter
        self._category = category

    def increment(self):
        self._counter.increment(self._category)


@dataclass(frozen=True)
class PathStep:
    """One model on the path; ``merged_pair`` is None for the full model."""

    merged_pair: tuple[str, str] | None
    model: FittedModel


@dataclass(frozen=True)
class MergingPath:
    steps: tuple[PathStep, ...]
    strategy: str
    evaluations: int
    evaluation_breakdown: dict[str, int]
    ordering: tuple[str, ...]
    levels: tuple[str, ...]
    n_obs: int

    @property
    def k(self) -> int:
        return len(self.levels)

    @property
    def full_model(self) -> FittedModel:
        return self.steps[0].model

    def model_at(self, step: int) -> FittedModel:
        return self.steps[step].model


def _thread_budget() -> int:
    raw = os.environ.get("FACTORFUSE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _fit_candidates(stats, partitions, counter):
    """Fit a list of candidate partitions, preserving input order."""
    threads = _thread_budget()
    if threads <= 1 or len(partitions) <= 1:
        return [fit_stats(stats, p, counter) for p in partitions]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda p: fit_stats(stats, p, counter), partitions))


# ------------------------------------------------------------------ #
# Level ordering for the fast strategies
# ------------------------------------------------------------------ #


def ordering_statistic(
    data: ResponseData,
    grouping: Grouping,
    stats: LevelStats | None = None,
    full_model: FittedModel | None = None,
) -> tuple[str, ...]:
    """Levels sorted by the family's ordering statistic.

    gaussian1d -> group mean; binomial -> success proportion; gaussianNd ->
    group mean of the 1-D non-metric MDS projection of the observations;
    survival -> log hazard ratio from the full model.  Ties keep the
    original level order.
    """
    stats = stats or LevelStats(data, grouping)
    levels = grouping.levels
    if data.kind in (GAUSSIAN_1D, BINOMIAL):
        value = {lv: stats.swy[i] / stats.sw[i] for i, lv in enumerate(levels)}
    elif data.kind == GAUSSIAN_ND:
        proj = mds_project_1d(data.values)
        w = data.weights if data.weights is not None else np.ones(data.n)
        idx = grouping.indices()
        value = {
            lv: float((proj[idx[lv]] * w[idx[lv]]).sum() / w[idx[lv]].sum())
            for lv in levels
        }
    elif data.kind == SURVIVAL:
        if full_model is None:
            full_model = fit_stats(stats, Partition.singletons(levels))
        value = {
            lv: full_model.estimates[f"({lv})"]["alpha"] for lv in levels
        }
    else:  # pragma: no cover - ResponseData validates kinds
        raise InvalidStrategy(data.kind)
    order = {lv: i for i, lv in enumerate(levels)}
    return tuple(sorted(levels, key=lambda lv: (value[lv], order[lv])))


# ------------------------------------------------------------------ #
# Strategy drivers
# ------------------------------------------------------------------ #


def merge_factors(
    data: ResponseData,
    grouping: Grouping,
    strategy: str = "adaptive",
) -> MergingPath:
    if grouping.k < 2:
        raise InvalidStrategy("need at least 2 factor levels to merge")
    if strategy == "adaptive":
        return _drive_adaptive(data, grouping, adjacent_only=False)
    if strategy == "fast-adaptive":
        return _drive_adaptive(data, grouping, adjacent_only=True)
    if strategy == "fixed":
        return _drive_fixed(data, grouping)
    if strategy == "fast-fixed":
        return _drive_fast_fixed(data, grouping)
    raise InvalidStrategy(strategy)


def _candidate_pairs(partition: Partition, adjacent_only: bool):
    labels = partition.labels
    if adjacent_only:
        return [(labels[i], labels[i + 1]) for i in range(len(labels) - 1)]
    return [
        (labels[i], labels[j])
        for i in range(len(labels))
        for j in range(i + 1, len(labels))
    ]


def _drive_adaptive(data, grouping, adjacent_only: bool) -> MergingPath:
    stats = LevelStats(data, grouping)
    counter = EvalCounter()
    ordering: tuple[str, ...] = ()
    path_counter = _TaggedCounter(counter, "path")
    if adjacent_only:
        ordering, part, model0 = _ordered_full_model(data, grouping, stats, path_counter)
    else:
        part = Partition.singletons(grouping.levels)
        model0 = fit_stats(stats, part, path_counter)

    steps = [PathStep(None, model0)]
    cand_counter = _TaggedCounter(counter, "candidates")
    while part.size > 1:
        pairs = _candidate_pairs(part, adjacent_only)
        parts = [part.merge(a, b) for a, b in pairs]
        models = _fit_candidates(stats, parts, cand_counter)
        best = min(
            range(len(pairs)),
            key=lambda i: (-models[i].loglik, pairs[i][0], pairs[i][1]),
        )
        part = parts[best]
        model = fit_stats(stats, part, path_counter)
        steps.append(PathStep(pairs[best], model))
    return MergingPath(
        steps=tuple(steps),
        strategy="fast-adaptive" if adjacent_only else "adaptive",
        evaluations=counter.total,
        evaluation_breakdown=counter.breakdown(),
        ordering=ordering,
        levels=grouping.levels,
        n_obs=data.n,
    )


def _ordered_full_model(data, grouping, stats, path_counter):
    """Full model plus the level ordering used by the fast strategies.

    For survival the ordering statistic needs the full fit itself, so that
    fit is done first (counted) and reused; the reordered singleton model is
    a re-evaluation of the same likelihood and is not counted.
    """
    if data.kind == SURVIVAL:
        base = fit_stats(stats, Partition.singletons(grouping.levels), path_counter)
        ordering = ordering_statistic(data, grouping, stats=stats, full_model=base)
        part = Partition.singletons(ordering)
        model0 = fit_stats(stats, part)
    else:
        ordering = ordering_statistic(data, grouping, stats=stats)
        part = Partition.singletons(ordering)
        model0 = fit_stats(stats, part, path_counter)
    return ordering, part, model0


def _lrt_distance(base_loglik: float, merged_loglik: float) -> float:
    return max(0.0, 2.0 * (base_loglik - merged_loglik))


def _drive_fixed(data, grouping) -> MergingPath:
    stats = LevelStats(data, grouping)
    counter = EvalCounter()
    levels = grouping.levels
    part = Partition.singletons(levels)
    path_counter = _TaggedCounter(counter, "path")
    dist_counter = _TaggedCounter(counter, "distances")
    model0 = fit_stats(stats, part, path_counter)

    # static pairwise LRT distances: merge (i, j) with all others singleton
    dist: dict[frozenset[str], float] = {}
    for i in range(len(levels)):
        for j in range(i + 1, len(levels)):
            merged = part.merge(f"({levels[i]})", f"({levels[j]})")
            m = fit_stats(stats, merged, dist_counter)
            dist[frozenset((levels[i], levels[j]))] = _lrt_distance(
                model0.loglik, m.loglik
            )

    def linkage(ca, cb) -> float:
        return max(
            dist[frozenset((a, b))] for a in ca.members for b in cb.members
        )

    steps = [PathStep(None, model0)]
    while part.size > 1:
        clusters = part.clusters
        best = None
        for i in range(len(clusters)):
            for j in range(i + 1, len(clusters)):
                key = (
                    linkage(clusters[i], clusters[j]),
                    clusters[i].label,
                    clusters[j].label,
                )
                if best is None or key < best[0]:
                    best = (key, clusters[i].label, clusters[j].label)
        _, la, lb = best
        part = part.merge(la, lb)
        model = fit_stats(stats, part, path_counter)
        steps.append(PathStep((la, lb), model))
    return MergingPath(
        steps=tuple(steps),
        strategy="fixed",
        evaluations=counter.total,
        evaluation_breakdown=counter.breakdown(),
        ordering=(),
        levels=levels,
        n_obs=data.n,
    )


def _drive_fast_fixed(data, grouping) -> MergingPath:
    stats = LevelStats(data, grouping)
    counter = EvalCounter()
    path_counter = _TaggedCounter(counter, "path")
    dist_counter = _TaggedCounter(counter, "distances")

    ordering, part, model0 = _ordered_full_model(data, grouping, stats, path_counter)

    labels = list(part.labels)
    dist = []
    for i in range(len(labels) - 1):
        m = fit_stats(stats, part.merge(labels[i], labels[i + 1]), dist_counter)
        dist.append(_lrt_distance(model0.loglik, m.loglik))

    steps = [PathStep(None, model0)]
    while part.size > 1:
        i = min(
            range(len(dist)),
            key=lambda j: (dist[j], labels[j], labels[j + 1]),
        )
        la, lb = labels[i], labels[i + 1]
        d_ab = dist[i]
        part = part.merge(la, lb)
        model = fit_stats(stats, part, path_counter)
        steps.append(PathStep((la, lb), model))
        labels[i : i + 2] = [la + lb]
        left = dist[i - 1] if i > 0 else None
        right = dist[i + 1] if i + 1 < len(dist) else None
        dist[i : i + 2] = []  # drop the merged adjacency; reinsert below
        # Complete-linkage update for the two refreshed adjacencies.  Only
        # one fresh LRT distance per merge keeps the O(k) fit budget: the
        # tighter inherited side is re-measured against the new cluster, the
        # other side falls back to the merged pair's own distance.
        new_left = new_right = None
        if left is not None and (right is None or left <= right):
            fresh = _fresh_distance(stats, part, labels[i - 1], labels[i], model, dist_counter)
            new_left = max(left, fresh)
            if right is not None:
                new_right = max(right, d_ab)
        elif right is not None:
            fresh = _fresh_distance(stats, part, labels[i], labels[i + 1], model, dist_counter)
            new_right = max(right, fresh)
            if left is not None:
                new_left = max(left, d_ab)
        if new_right is not None:
            dist.insert(i, new_right)
        if new_left is not None:
            dist[i - 1] = new_left
    return MergingPath(
        steps=tuple(steps),
        strategy="fast-fixed",
        evaluations=counter.total,
        evaluation_breakdown=counter.breakdown(),
        ordering=ordering,
        levels=grouping.levels,
        n_obs=data.n,
    )


def _fresh_distance(stats, part, label_a, label_b, base_model, counter) -> float:
    m = fit_stats(stats, part.merge(label_a, label_b), counter)
    return _lrt_distance(base_model.loglik, m.loglik)
