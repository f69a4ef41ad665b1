"""Run measurements and cross-run statistics.

GNP is the largest pairwise behavior distance in a population and GNT the sum
over all pairs. Bin scores track how well the four-peaks stepping stones are
found and kept. The cross-run helpers summarize final values and compare
strategies with a Mann-Whitney U test.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import pairwise_distances


def _distances(population) -> np.ndarray:
    if isinstance(population, np.ndarray):
        b = population if population.ndim == 2 else population[:, None]
    else:
        b = np.vstack([np.atleast_1d(getattr(m, "behavior", m)) for m in population]).astype(float)
    if len(b) < 2:
        raise ValueError("global novelty needs at least two members")
    d = pairwise_distances(b)
    return d[np.triu_indices(len(b), 1)]


def gnp(population) -> float:
    """Largest behavior distance between any two members.

    Accepts individuals, raw behavior vectors, or an (n, dim) array.
    """
    return float(_distances(population).max())


def gnt(population) -> float:
    """Total behavior distance over all unordered pairs."""
    return float(_distances(population).sum())


@dataclass(frozen=True)
class BinSpec:
    intervals: tuple[tuple[float, float], ...]

    def __post_init__(self):
        ordered = sorted(self.intervals)
        for (lo, hi), (nlo, _) in zip(ordered, ordered[1:]):
            if nlo <= hi:
                raise ValueError(f"bins overlap: [{lo}, {hi}] and [{nlo}, ...]")
        for lo, hi in ordered:
            if hi < lo:
                raise ValueError(f"empty bin [{lo}, {hi}]")

    @classmethod
    def around_peaks(cls, centers: Sequence[float], width: float) -> "BinSpec":
        return cls(tuple((c - width / 2.0, c + width / 2.0) for c in centers))

    def locate(self, behavior) -> int | None:
        """Index of the (closed) interval containing a 1-D behavior, else None."""
        x = float(np.atleast_1d(behavior)[0])
        for i, (lo, hi) in enumerate(self.intervals):
            if lo <= x <= hi:
                return i
        return None


@dataclass
class BinHistory:
    """Best fitness ever seen per bin, updated at every evaluation."""

    spec: BinSpec
    best: list = field(default_factory=list)

    def __post_init__(self):
        if not self.best:
            self.best = [None] * len(self.spec.intervals)

    def observe(self, individual) -> None:
        i = self.spec.locate(individual.behavior)
        if i is not None and (self.best[i] is None or individual.fitness > self.best[i]):
            self.best[i] = individual.fitness

    def total(self) -> float:
        return float(sum(b for b in self.best if b is not None))


def bin_scores(history: BinHistory, population, bins: BinSpec | None = None) -> tuple[float, float]:
    """``(total, current)``: best-ever per bin summed, and best in ``population`` per bin summed."""
    bins = history.spec if bins is None else bins
    members = list(population)
    if not members:
        return history.total(), 0.0
    x = np.array([float(np.atleast_1d(m.behavior)[0]) for m in members])
    f = np.array([m.fitness for m in members])
    current = 0.0
    for lo, hi in bins.intervals:
        inside = (x >= lo) & (x <= hi)
        if inside.any():
            current += float(f[inside].max())
    return history.total(), current


@dataclass
class RunLog:
    """Per-iteration measurements plus the final population."""

    COLUMNS = ("iteration", "best_fitness", "total_bin_score", "current_bin_score", "gnp", "gnt", "w")

    rows: list[tuple] = field(default_factory=list)
    final_population: list = field(default_factory=list)

    def record(self, iteration: int, best_fitness: float, total_bin: float, current_bin: float,
               gnp_value: float, gnt_value: float, w: float) -> None:
        self.rows.append((iteration, best_fitness, total_bin, current_bin, gnp_value, gnt_value, w))

    def column(self, name: str) -> np.ndarray:
        return np.array([r[self.COLUMNS.index(name)] for r in self.rows], dtype=float)

    @property
    def final(self) -> dict:
        return dict(zip(self.COLUMNS, self.rows[-1]))


# ---------------------------------------------------------------------------
# cross-run statistics

def mean_stderr(samples: Sequence[float]) -> tuple[float, float]:
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValueError("mean_stderr needs at least one sample")
    if x.size == 1:
        return float(x[0]), 0.0
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def _midranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    sv = values[order]
    i = 0
    while i < len(sv):
        j = i
        while j + 1 < len(sv) and sv[j + 1] == sv[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def u_statistic(a: Sequence[float], b: Sequence[float]) -> float:
    """Pairs with a_i > b_j, ties counting one half."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    diff = a[:, None] - b[None, :]
    return float((diff > 0).sum() + 0.5 * (diff == 0).sum())


def _exact_rank_sum_counts(ranks2: np.ndarray, n: int) -> np.ndarray:
    """counts[s] = number of size-n subsets of the pooled doubled midranks summing to s."""
    top = int(ranks2.sum())
    dp = np.zeros((n + 1, top + 1), dtype=np.int64)
    dp[0, 0] = 1
    for r in ranks2:
        # right-hand side is evaluated before assignment, so each rank is used at most once
        dp[1:, r:] = dp[1:, r:] + dp[:-1, :top + 1 - r]
    return dp[n]


EXACT_MAX_SIZE = 20


def mann_whitney_u(a: Sequence[float], b: Sequence[float], alternative: str = "greater",
                   method: str = "auto") -> tuple[float, float]:
    """Mann-Whitney U test of ``a`` against ``b``.

    ``alternative`` is ``"greater"`` (a tends to exceed b), ``"less"`` or
    ``"two-sided"``. The exact null distribution is the permutation
    distribution of the observed midranks (ties handled exactly); it is used
    when both samples have at most 20 values, otherwise a tie-corrected normal
    approximation with continuity correction.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n, m = len(a), len(b)
    if n == 0 or m == 0:
        raise ValueError("both samples must be non-empty")
    if alternative not in ("greater", "less", "two-sided"):
        raise ValueError(f"unknown alternative {alternative!r}")
    u = u_statistic(a, b)
    if method == "auto":
        method = "exact" if max(n, m) <= EXACT_MAX_SIZE else "asymptotic"

    if method == "exact":
        ranks2 = np.rint(2 * _midranks(np.concatenate([a, b]))).astype(int)
        counts = _exact_rank_sum_counts(ranks2, n)
        total = counts.sum()
        u2 = np.arange(len(counts)) - n * (n + 1)  # doubled U for each doubled rank sum
        target = int(round(2 * u))
        ge = counts[u2 >= target].sum()
        le = counts[u2 <= target].sum()
        p_greater, p_less = float(ge / total), float(le / total)
    elif method == "asymptotic":
        ranks = _midranks(np.concatenate([a, b]))
        _, counts = np.unique(ranks, return_counts=True)
        N = n + m
        tie = (counts ** 3 - counts).sum() / (N * (N - 1))
        sd = math.sqrt(n * m / 12.0 * ((N + 1) - tie))
        mu = n * m / 2.0
        if sd == 0:
            p_greater = p_less = 1.0
        else:
            p_greater = _norm_sf((u - mu - 0.5) / sd)
            p_less = _norm_sf((mu - u - 0.5) / sd)
    else:
        raise ValueError(f"unknown method {method!r}")

    if alternative == "greater":
        return u, p_greater
    if alternative == "less":
        return u, p_less
    return u, min(1.0, 2.0 * min(p_greater, p_less))


def _norm_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))
