"""Shared fixtures and independent oracles for the test suite.

Oracles here deliberately avoid reusing factorfuse internals: Gaussian and
binomial log-likelihoods are closed-form re-derivations, the Cox oracle is a
golden-section search over the partial likelihood, and the chi-square oracle
integrates the density with adaptive Simpson quadrature.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from factorfuse.data import Grouping, Partition, ResponseData


# ---------------------------------------------------------------------------
# dataset builders


def make_gaussian_data(values_by_level: dict[str, list[float]]):
    vals, labels = [], []
    for lv, vs in values_by_level.items():
        vals.extend(float(v) for v in vs)
        labels.extend([lv] * len(vs))
    data = ResponseData("gaussian1d", np.array(vals))
    return data, Grouping(tuple(labels))


def make_binomial_data(values_by_level: dict[str, list[int]]):
    vals, labels = [], []
    for lv, vs in values_by_level.items():
        vals.extend(float(v) for v in vs)
        labels.extend([lv] * len(vs))
    data = ResponseData("binomial", np.array(vals))
    return data, Grouping(tuple(labels))


def make_survival_data(rows_by_level: dict[str, list[tuple[float, int]]]):
    vals, labels = [], []
    for lv, rows in rows_by_level.items():
        for t, e in rows:
            vals.append([float(t), float(e)])
            labels.append(lv)
    data = ResponseData("survival", np.array(vals))
    return data, Grouping(tuple(labels))


def random_gaussian_dataset(rng, k, n_per_group, spread=2.0):
    means = rng.uniform(0, spread, k)
    by = {}
    for i, m in enumerate(means):
        by[f"G{i + 1}"] = list(rng.normal(m, 1.0, n_per_group))
    return make_gaussian_data(by)


def random_binomial_dataset(rng, k, n_per_group):
    probs = rng.uniform(0.1, 0.9, k)
    by = {}
    for i, p in enumerate(probs):
        by[f"G{i + 1}"] = list(rng.binomial(1, p, n_per_group).astype(float))
    return make_binomial_data(by)


# ---------------------------------------------------------------------------
# closed-form likelihood oracles


def oracle_gaussian_loglik(groups: list[np.ndarray]) -> float:
    allv = np.concatenate(groups)
    n = len(allv)
    rss = sum(float(((g - g.mean()) ** 2).sum()) for g in groups)
    s2 = rss / n
    return -n / 2.0 * (math.log(2 * math.pi) + math.log(s2) + 1.0)


def oracle_binomial_loglik(groups: list[np.ndarray]) -> float:
    total = 0.0
    for g in groups:
        p = float(np.mean(g))
        for y in g:
            if y >= 0.5:
                total += math.log(p) if p > 0 else 0.0
            else:
                total += math.log(1 - p) if p < 1 else 0.0
    return total


def oracle_cox_partial_loglik(times, events, grp01, alpha: float) -> float:
    """Breslow partial log-likelihood for two clusters, cluster 1 at alpha."""
    times = np.asarray(times, float)
    events = np.asarray(events, float)
    eta = np.where(np.asarray(grp01) == 1, alpha, 0.0)
    ll = 0.0
    for i in np.argsort(times, kind="stable"):
        if events[i]:
            risk = times >= times[i]
            ll += eta[i] - math.log(float(np.exp(eta[risk]).sum()))
    return ll


def oracle_cox_alpha(times, events, grp01, lo=-20.0, hi=20.0) -> float:
    """Golden-section maximization of the two-cluster partial likelihood."""
    gr = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c1 = b - gr * (b - a)
    c2 = a + gr * (b - a)
    f1 = oracle_cox_partial_loglik(times, events, grp01, c1)
    f2 = oracle_cox_partial_loglik(times, events, grp01, c2)
    for _ in range(300):
        if f1 > f2:
            b, c2, f2 = c2, c1, f1
            c1 = b - gr * (b - a)
            f1 = oracle_cox_partial_loglik(times, events, grp01, c1)
        else:
            a, c1, f1 = c1, c2, f2
            c2 = a + gr * (b - a)
            f2 = oracle_cox_partial_loglik(times, events, grp01, c2)
    return (a + b) / 2


# ---------------------------------------------------------------------------
# chi-square quadrature oracle


def _chi2_pdf(x: float, df: int) -> float:
    if x <= 0:
        return 0.0
    half = df / 2.0
    return math.exp((half - 1) * math.log(x) - x / 2 - half * math.log(2) - math.lgamma(half))


def _simpson(f, a, b, n=2000):
    xs = np.linspace(a, b, 2 * n + 1)
    ys = np.array([f(x) for x in xs])
    h = (b - a) / (2 * n)
    return h / 3 * (ys[0] + ys[-1] + 4 * ys[1:-1:2].sum() + 2 * ys[2:-1:2].sum())


def oracle_chi2_sf(x: float, df: int) -> float:
    """Upper tail by quadrature of the density over [x, far-tail cutoff]."""
    if x <= 0:
        return 1.0
    hi = max(x, df) + 80.0 + 12.0 * math.sqrt(2.0 * df)
    lo = max(x, 1e-12)
    return float(_simpson(lambda t: _chi2_pdf(t, df), lo, hi, n=4000))


# ---------------------------------------------------------------------------
# greedy brute-force path oracle (shares nothing with the engine)


def _oracle_fit_loglik(kind, values_by_level, partition_members) -> float:
    groups = []
    for members in partition_members:
        g = np.concatenate([np.asarray(values_by_level[lv], float) for lv in members])
        groups.append(g)
    if kind == "gaussian1d":
        return oracle_gaussian_loglik(groups)
    if kind == "binomial":
        return oracle_binomial_loglik(groups)
    raise ValueError(kind)


def oracle_greedy_path(kind, values_by_level: dict[str, list[float]]):
    """Exhaustive greedy merge sequence: at each step try every pair, keep the
    merge with the highest post-merge loglik, ties broken lexicographically by
    the pair's cluster labels."""
    clusters = [((lv,), f"({lv})") for lv in sorted(values_by_level)]
    sequence = []
    while len(clusters) > 1:
        cands = []
        for i in range(len(clusters)):
            for j in range(i + 1, len(clusters)):
                a, b = clusters[i], clusters[j]
                trial = [c[0] for c in clusters if c not in (a, b)]
                trial.append(a[0] + b[0])
                ll = _oracle_fit_loglik(kind, values_by_level, trial)
                cands.append((ll, a[1], b[1], i, j))
        top = max(c[0] for c in cands)
        # exact analytic ties can differ by float rounding between this
        # oracle and the engine; break near-ties lexicographically
        tied = [c for c in cands if c[0] >= top - 1e-9]
        _, _, _, i, j = min(tied, key=lambda c: (c[1], c[2]))
        a, b = clusters[i], clusters[j]
        sequence.append((a[1], b[1]))
        merged = (a[0] + b[0], a[1] + b[1])
        clusters = [c for c in clusters if c not in (a, b)]
        clusters.insert(i, merged)
    return sequence


# ---------------------------------------------------------------------------
# pytest fixtures


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def gaussian_three_groups():
    by = {
        "A": [0.1, -0.2, 0.3, 0.05, -0.1],
        "B": [0.2, 0.0, -0.3, 0.15, 0.1],
        "C": [3.1, 2.8, 3.3, 3.0, 2.9],
    }
    return make_gaussian_data(by)


def singletons_of(grouping: Grouping) -> Partition:
    return Partition.singletons(grouping.levels)
