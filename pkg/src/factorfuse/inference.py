"""LRT statistics, chi-square tail probabilities, GIC, and partition cuts."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .data import Partition
from .engine import MergingPath
from .errors import FactorFuseError, NotNested, NumericalInconsistency
from .families import FittedModel

LRT_NOISE_TOL = 1e-9


# ------------------------------------------------------------------ #
# Chi-square upper tail via the regularized incomplete gamma function
# ------------------------------------------------------------------ #


def _gamma_p_series(a: float, x: float) -> float:
    """Lower regularized gamma P(a, x) by power series; for x < a + 1."""
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(1000):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * 1e-15:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))

def _gamma_q_contfrac(a: float, x: float) -> float:
    """Upper regularized gamma Q(a, x) by continued fraction; for x >= a + 1."""
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 1000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def chi_square_sf(x: float, df: int) -> float:
    """P(X >= x) for X ~ chi-square with ``df`` degrees of freedom."""
    if x < 0:
        raise FactorFuseError("chi-square statistic must be nonnegative")
    if df < 1:
        raise FactorFuseError("degrees of freedom must be >= 1")
    if x == 0.0:
        return 1.0
    a = df / 2.0
    h = x / 2.0
    if h < a + 1.0:
        q = 1.0 - _gamma_p_series(a, h)
    else:
        q = _gamma_q_contfrac(a, h)
    return min(1.0, max(0.0, q))


def chi_square_quantile(p: float, df: int) -> float:
    """x such that P(X <= x) = p, by bisection on the survival function."""
    if not 0.0 < p < 1.0:
        raise FactorFuseError("quantile probability must be in (0, 1)")
    target = 1.0 - p
    lo, hi = 0.0, 1.0
    while chi_square_sf(hi, df) > target:
        hi *= 2.0
        if hi > 1e8:
            break
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if chi_square_sf(mid, df) > target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


# ------------------------------------------------------------------ #
# LRT and history
# ------------------------------------------------------------------ #


def lrt(m_small: FittedModel, m_large: FittedModel) -> float:
    """2 * (loglik_large - loglik_small) for nested models (small = coarser)."""
    if not m_small.partition.is_coarsening_of(m_large.partition):
        raise NotNested("first model must be a coarsening of the second")
    stat = 2.0 * (m_large.loglik - m_small.loglik)
    if stat < 0.0:
        if stat >= -LRT_NOISE_TOL:
            return 0.0
        raise NumericalInconsistency(
            f"nested model has higher loglik by {-stat / 2.0:g}"
        )
    return stat


def global_null_test(path: MergingPath) -> tuple[float, int, float]:
    """k-sample global test: last (single-cluster) model against the full one."""
    stat = lrt(path.steps[-1].model, path.full_model)
    df = path.k - 1
    return stat, df, chi_square_sf(stat, df)


@dataclass(frozen=True)
class HistoryRow:
    step: int
    group_a: str
    group_b: str
    loglik: float
    pval_vs_full: float
    pval_vs_previous: float


def merging_history(path: MergingPath) -> list[HistoryRow]:
    rows = [
        HistoryRow(0, "", "", path.full_model.loglik, 1.0, 1.0)
    ]
    for i in range(1, len(path.steps)):
        step = path.steps[i]
        prev = path.steps[i - 1].model
        stat_prev = lrt(step.model, prev)
        stat_full = lrt(step.model, path.full_model)
        rows.append(
            HistoryRow(
                step=i,
                group_a=step.merged_pair[0],
                group_b=step.merged_pair[1],
                loglik=step.model.loglik,
                pval_vs_full=chi_square_sf(stat_full, i),
                pval_vs_previous=chi_square_sf(stat_prev, 1),
            )
        )
    return rows


# ------------------------------------------------------------------ #
# GIC and optimal-partition selection
# ------------------------------------------------------------------ #


@dataclass(frozen=True)
class GicRow:
    step: int
    loglik: float
    cluster_count: int
    gic: float


@dataclass(frozen=True)
class GicProfile:
    penalty: float
    rows: tuple[GicRow, ...]
    argmin_step: int


def gic_profile(path: MergingPath, penalty: float) -> GicProfile:
    if penalty <= 0:
        raise FactorFuseError("GIC penalty must be positive")
    rows = []
    for i, step in enumerate(path.steps):
        count = step.model.partition.size
        rows.append(
            GicRow(i, step.model.loglik, count, -2.0 * step.model.loglik + penalty * count)
        )
    # earliest step wins ties, favoring the finer partition
    argmin = min(range(len(rows)), key=lambda i: (rows[i].gic, i))
    return GicProfile(penalty=penalty, rows=tuple(rows), argmin_step=argmin)


@dataclass(frozen=True)
class SelectionCriterion:
    """How to pick one model on the path: ``gic``, ``pvalue`` or ``loglik``."""

    kind: str
    value: float

    def __post_init__(self):
        if self.kind not in ("gic", "pvalue", "loglik"):
            raise FactorFuseError(f"unknown selection criterion: {self.kind!r}")
        if self.kind == "gic" and self.value <= 0:
            raise FactorFuseError("GIC penalty must be positive")
        if self.kind == "pvalue" and not 0.0 < self.value < 1.0:
            raise FactorFuseError("p-value threshold must be in (0, 1)")
        if self.kind == "loglik" and not math.isfinite(self.value):
            raise FactorFuseError("log-likelihood threshold must be finite")


def cut_step(path: MergingPath, criterion: SelectionCriterion) -> int:
    """Index of the selected step on the path."""
    if criterion.kind == "gic":
        return gic_profile(path, criterion.value).argmin_step
    if criterion.kind == "pvalue":
        rows = merging_history(path)
        chosen = 0
        for row in rows:
            if row.pval_vs_full > criterion.value:
                chosen = row.step
        return chosen
    full_ll = path.full_model.loglik
    chosen = 0
    for i, step in enumerate(path.steps):
        if step.model.loglik >= full_ll - criterion.value:
            chosen = i
    return chosen


def cut_tree(path: MergingPath, criterion: SelectionCriterion) -> Partition:
    return path.steps[cut_step(path, criterion)].model.partition


def optimal_partition_table(
    path: MergingPath, criterion: SelectionCriterion
) -> list[tuple[str, str]]:
    """(orig level, cluster label) per original level, in level order."""
    part = cut_tree(path, criterion)
    return [(lv, part.label_of(lv)) for lv in path.levels]
