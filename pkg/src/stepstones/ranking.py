"""Ranking and replacement strategies.

Every strategy answers the same question for the steady-state loop: given the
current population plus freshly evaluated offspring, which individuals
survive?  Fitness, novelty and LSNF delete by a scalar score; NSGA-NF and NSLC
use NSGA-II ordering over two objectives; MAP-Elites keeps one elite per bin;
BDMA-2 sorts by behavior domination and fills the rest of the population by
novelty.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import (
    ConfigError,
    DegeneratePopulationError,
    Individual,
    NoveltyArchive,
    Population,
    behavior_matrix,
    cross_distances,
    fitness_vector,
    l2_distance,
    pairwise_distances,
    upper_pairs,
)

KINDS = ("fitness", "novelty", "lsnf", "nsga_nf", "nslc", "map_elites", "bdma2", "bdma2a")

DISPLAY_NAMES = {
    "fitness": "Fitness",
    "novelty": "Novelty",
    "lsnf": "LSNF",
    "nsga_nf": "NSGA-NF",
    "nslc": "NSLC",
    "map_elites": "MAP-Elites",
    "bdma2": "BDMA-2",
    "bdma2a": "BDMA-2a",
}

_ALIASES = {
    "fitness": "fitness", "novelty": "novelty", "ns": "novelty", "lsnf": "lsnf",
    "nsganf": "nsga_nf", "nslc": "nslc", "mapelites": "map_elites", "me": "map_elites",
    "bdma2": "bdma2", "bdma2a": "bdma2a",
}

# relative nudge that moves w just past the domination boundary (e == 0 still dominates)
W_MARGIN = 1e-9


def canonical_kind(name: str) -> str:
    key = name.lower().replace("-", "").replace("_", "").replace(" ", "")
    try:
        return _ALIASES[key]
    except KeyError:
        raise ConfigError(f"unknown strategy {name!r}; choose from "
                          + ", ".join(DISPLAY_NAMES.values())) from None


@dataclass(frozen=True)
class NoveltyParams:
    k: int = 5
    p_add: float = 0.01
    use_archive: bool = True

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError(f"novelty k must be >= 1, got {self.k}")
        if not 0.0 <= self.p_add <= 1.0:
            raise ConfigError(f"p_add must lie in [0, 1], got {self.p_add}")


@dataclass(frozen=True)
class LsnfParams:
    p: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ConfigError(f"LSNF p must lie in [0, 1], got {self.p}")


@dataclass(frozen=True)
class DominationParams:
    """``w`` scales behavior distance; for BDMA-2a it is only the starting value."""

    w: float = 1.0
    dom_slots: int = 10
    nov_slots: int = 10

    def __post_init__(self):
        if not self.w > 0:
            raise ConfigError(f"w must be positive, got {self.w}")
        if self.dom_slots < 0 or self.nov_slots < 0:
            raise ConfigError("slot counts must be non-negative")

    @property
    def capacity(self) -> int:
        return self.dom_slots + self.nov_slots


@dataclass(frozen=True)
class RankingStrategy:
    kind: str
    novelty: NoveltyParams = field(default_factory=NoveltyParams)
    lsnf: LsnfParams = field(default_factory=LsnfParams)
    domination: DominationParams = field(default_factory=DominationParams)
    bin_width: float = 1.0
    # NSGA-NF only: novelty with k = pool size and no archive
    behavioral_diversity: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", canonical_kind(self.kind))
        if not self.bin_width > 0:
            raise ConfigError(f"bin_width must be positive, got {self.bin_width}")

    @property
    def name(self) -> str:
        return DISPLAY_NAMES[self.kind]

    @property
    def uses_archive(self) -> bool:
        if self.kind == "nsga_nf" and self.behavioral_diversity:
            return False
        return self.kind in ("novelty", "lsnf", "nsga_nf", "nslc") and self.novelty.use_archive


# ---------------------------------------------------------------------------
# novelty

def novelty_scores(behaviors: np.ndarray, k: int, archive: np.ndarray | None = None,
                   ids: np.ndarray | None = None, archive_owners: np.ndarray | None = None,
                   dist: np.ndarray | None = None) -> np.ndarray:
    """Mean distance from each row of ``behaviors`` to its ``k`` nearest others.

    Neighbors are the other rows plus the archive entries; an archive entry
    contributed by the same individual (matched through ``ids`` and
    ``archive_owners``) is skipped. With fewer than ``k`` neighbors available
    the mean is taken over all of them.
    """
    n = len(behaviors)
    d = pairwise_distances(behaviors) if dist is None else dist.copy()
    np.fill_diagonal(d, np.inf)
    if archive is not None and len(archive):
        da = cross_distances(behaviors, archive)
        if ids is not None and archive_owners is not None:
            da[np.asarray(ids)[:, None] == np.asarray(archive_owners)[None, :]] = np.inf
        d = np.hstack([d, da])
    kk = min(k, d.shape[1])
    if kk == 0:
        raise DegeneratePopulationError("novelty needs at least one other behavior")
    nearest = np.partition(d, kk - 1, axis=1)[:, :kk] if kk < d.shape[1] else d
    finite = np.isfinite(nearest)
    counts = finite.sum(axis=1)
    if np.any(counts == 0):
        raise DegeneratePopulationError("novelty needs at least one other behavior")
    nearest = np.sort(np.where(finite, nearest, 0.0), axis=1)
    return nearest.sum(axis=1) / counts if n else np.empty(0)


def novelty_score(x: Individual, population: Sequence[Individual],
                  archive: NoveltyArchive | None, k: int) -> float:
    """Novelty of ``x`` against ``population`` (minus ``x``) and the archive."""
    others = [m for m in population if m is not x]
    pool = [m.behavior for m in others]
    if archive is not None:
        pool += [b for b, owner in zip(archive.behaviors, archive.owners) if owner != x.id]
    if not pool:
        raise DegeneratePopulationError("novelty needs at least one other behavior")
    d = cross_distances(x.behavior[None, :], np.vstack(pool))[0]
    return float(np.sort(d)[:k].mean())


def _pool_novelty(pool: Sequence[Individual], k: int, archive: NoveltyArchive | None,
                  behaviors: np.ndarray, dist: np.ndarray | None = None) -> np.ndarray:
    if archive is not None and len(archive):
        return novelty_scores(behaviors, k, archive.as_array(behaviors.shape[1]),
                              np.array([m.id for m in pool]), np.array(archive.owners),
                              dist=dist)
    return novelty_scores(behaviors, k, dist=dist)


# ---------------------------------------------------------------------------
# scalar-score strategies

def _order_by_score(scores: np.ndarray, ids: np.ndarray) -> list[int]:
    # best first; equal scores keep the older (smaller id) individual ahead
    return list(np.lexsort((ids, -scores)))


def _normalize(v: np.ndarray) -> np.ndarray:
    lo, hi = v.min(), v.max()
    if hi == lo:
        return np.zeros_like(v)
    return (v - lo) / (hi - lo)


def lsnf_scores(fitness: np.ndarray, novelty: np.ndarray, p: float) -> np.ndarray:
    """Weighted sum of per-call min-max normalized fitness and novelty."""
    return (1.0 - p) * _normalize(fitness) + p * _normalize(novelty)


def lsnf_rank(individuals: Sequence[Individual], params: LsnfParams, novelty: np.ndarray) -> list[int]:
    """Indices of ``individuals`` from best to worst; the last one is deleted first."""
    if len(individuals) < 2:
        raise ValueError("LSNF ranking needs at least two individuals")
    scores = lsnf_scores(fitness_vector(individuals), np.asarray(novelty, dtype=float), params.p)
    return _order_by_score(scores, np.array([m.id for m in individuals]))


# ---------------------------------------------------------------------------
# behavior domination

def domination_effect(x: Individual, y: Individual, d=None, *, w: float = 1.0) -> float:
    """Fitness advantage of ``x`` over ``y`` minus their behavior distance.

    ``d`` is either a precomputed distance or a callable on two behaviors;
    by default the ``w``-scaled Euclidean distance is used.
    """
    if d is None:
        dist = w * l2_distance(x.behavior, y.behavior)
    elif callable(d):
        dist = d(x.behavior, y.behavior)
    else:
        dist = float(d)
    return x.fitness - y.fitness - dist


def dominates(x: Individual, y: Individual, d=None, *, w: float = 1.0) -> bool:
    return domination_effect(x, y, d, w=w) >= 0


def effect_matrix(fitness: np.ndarray, dist: np.ndarray) -> np.ndarray:
    """E[i, j] = f_i - f_j - dist[i, j] for an already scaled distance matrix."""
    return fitness[:, None] - fitness[None, :] - dist


def strict_from_weak(weak: np.ndarray) -> np.ndarray:
    """i strictly dominates j: i weakly dominates j and not the other way round.

    This drops the diagonal and any mutually dominating (equivalent) pair, so
    duplicates share a front instead of blocking each other.
    """
    return weak & ~weak.T


def behavior_domination_matrix(fitness: np.ndarray, behaviors: np.ndarray, w: float,
                               dist: np.ndarray | None = None) -> np.ndarray:
    if dist is None:
        dist = pairwise_distances(behaviors)
    return strict_from_weak(effect_matrix(fitness, w * dist) >= 0)


def pareto_domination_matrix(objectives: np.ndarray) -> np.ndarray:
    """Maximization Pareto dominance: >= on every objective and > on one."""
    a = objectives[:, None, :]
    b = objectives[None, :, :]
    return np.all(a >= b, axis=2) & np.any(a > b, axis=2)


@dataclass
class Front:
    rank: int
    members: list


def nondominated_fronts(dom: np.ndarray) -> list[np.ndarray]:
    """Fast non-dominated sort over a boolean matrix ``dom[i, j]`` = i dominates j.

    Returns index arrays, front 0 first. Raises ValueError if the relation has
    a cycle (some individuals can never be placed).
    """
    n = len(dom)
    remaining = dom.sum(axis=0)
    current = np.flatnonzero(remaining == 0)
    fronts = []
    placed = 0
    while current.size:
        fronts.append(current)
        placed += current.size
        released = dom[current].sum(axis=0)
        remaining = remaining - released
        current = np.flatnonzero((remaining == 0) & (released > 0))
    if placed != n:
        raise ValueError("dominance relation is not a strict partial order (cycle detected)")
    return fronts


def fast_nondominated_sort(individuals: Sequence, relation: Callable[[object, object], bool]) -> list[Front]:
    """Sort arbitrary items into fronts under a pairwise dominance predicate.

    ``relation(a, b)`` may be weak (reflexive, like behavior domination); it is
    made strict before sorting.
    """
    n = len(individuals)
    weak = np.zeros((n, n), dtype=bool)
    for i, a in enumerate(individuals):
        for j, b in enumerate(individuals):
            if i != j:
                weak[i, j] = bool(relation(a, b))
    fronts = nondominated_fronts(strict_from_weak(weak))
    return [Front(rank=r, members=[individuals[i] for i in f]) for r, f in enumerate(fronts)]


# ---------------------------------------------------------------------------
# NSGA-II machinery

def crowding_distance(objectives: np.ndarray) -> np.ndarray:
    n, m = objectives.shape
    crowd = np.zeros(n)
    if n <= 2:
        crowd[:] = np.inf
        return crowd
    for j in range(m):
        order = np.argsort(objectives[:, j], kind="stable")
        col = objectives[order, j]
        crowd[order[0]] = crowd[order[-1]] = np.inf
        span = col[-1] - col[0]
        if span > 0:
            crowd[order[1:-1]] += (col[2:] - col[:-2]) / span
    return crowd


def nsga2_rank(objectives: np.ndarray, ids: Sequence[int]) -> list[int]:
    """Indices ordered by (front ascending, crowding descending, id ascending).

    The final index is the individual NSGA-II would discard first.
    """
    objectives = np.asarray(objectives, dtype=float)
    ids = np.asarray(ids)
    fronts = nondominated_fronts(pareto_domination_matrix(objectives))
    rank = np.empty(len(objectives), dtype=int)
    crowd = np.empty(len(objectives))
    for r, f in enumerate(fronts):
        rank[f] = r
        crowd[f] = crowding_distance(objectives[f])
    return list(np.lexsort((ids, -crowd, rank)))


def local_competition_scores(fitness: np.ndarray, behaviors: np.ndarray, k: int,
                             dist: np.ndarray | None = None) -> np.ndarray:
    """Per individual: how many of its k behavior-nearest neighbors it strictly outperforms."""
    if k < 1:
        raise ConfigError("k must be >= 1")
    d = pairwise_distances(behaviors) if dist is None else dist.copy()
    np.fill_diagonal(d, np.inf)
    kk = min(k, len(fitness) - 1)
    if kk <= 0:
        return np.zeros(len(fitness), dtype=int)
    nbrs = np.argsort(d, axis=1, kind="stable")[:, :kk]
    return (fitness[nbrs] < fitness[:, None]).sum(axis=1)


def local_competition_score(x: Individual, population: Sequence[Individual], k: int) -> int:
    members = list(population)
    if not any(m is x for m in members):
        members.append(x)
    i = next(j for j, m in enumerate(members) if m is x)
    return int(local_competition_scores(fitness_vector(members), behavior_matrix(members), k)[i])


# ---------------------------------------------------------------------------
# MAP-Elites

@dataclass
class EliteMap:
    bin_width: float | np.ndarray = 1.0
    bins: dict = field(default_factory=dict)

    def bin_of(self, behavior) -> tuple[int, ...]:
        return tuple(int(c) for c in np.floor(np.asarray(behavior) / self.bin_width))

    def offer(self, candidate: Individual) -> bool:
        key = self.bin_of(candidate.behavior)
        incumbent = self.bins.get(key)
        if incumbent is None or candidate.fitness > incumbent.fitness:
            self.bins[key] = candidate
            return True
        return False

    def elites(self) -> list[Individual]:
        return sorted(self.bins.values(), key=lambda m: m.id)

    def __len__(self) -> int:
        return len(self.bins)


def map_elites_offer(elite_map: EliteMap, candidate: Individual) -> tuple[EliteMap, bool]:
    accepted = elite_map.offer(candidate)
    return elite_map, accepted


# ---------------------------------------------------------------------------
# BDMA-2

def _thin_front(members: list[int], need: int, fitness: np.ndarray, ids: np.ndarray,
                dist: np.ndarray) -> list[int]:
    m = len(members)
    sub = np.full((m, m), np.inf)
    iu, ju = upper_pairs(m)
    idx = np.asarray(members)
    sub[iu, ju] = dist[idx[iu], idx[ju]]
    alive = np.ones(m, dtype=bool)
    for _ in range(m - need):
        # row-major argmin: among equally close pairs, the earliest in pool order
        i, j = divmod(int(np.argmin(sub)), m)
        a, b = members[i], members[j]
        if fitness[a] != fitness[b]:
            loser = i if fitness[a] < fitness[b] else j
        else:
            loser = i if ids[a] > ids[b] else j
        alive[loser] = False
        sub[loser, :] = np.inf
        sub[:, loser] = np.inf
    return [members[i] for i in np.flatnonzero(alive)]


def bdma2_select(pool: Sequence[Individual], params: DominationParams, k: int = 5,
                 w: float | None = None, capacity: int | None = None) -> list[Individual]:
    """Survivors of ``pool``: ``dom_slots`` by behavior domination, the rest by novelty.

    Phase 1 fills front by front; the first front that does not fit is thinned
    by repeatedly dropping the less fit member of its closest pair. Phase 2
    ranks every individual left over by novelty within the pool (no external
    archive). Slots phase 1 cannot fill pass to phase 2. Survivors are returned
    in pool order.
    """
    w = params.w if w is None else w
    capacity = params.capacity if capacity is None else capacity
    pool = list(pool)
    if len(pool) <= capacity:
        return pool
    fitness = fitness_vector(pool)
    behaviors = behavior_matrix(pool)
    ids = np.array([m.id for m in pool])
    dist = pairwise_distances(behaviors)
    fronts = nondominated_fronts(behavior_domination_matrix(fitness, behaviors, w, dist))

    dom_slots = min(params.dom_slots, capacity)
    selected: list[int] = []
    for front in fronts:
        if len(selected) >= dom_slots:
            break
        if len(selected) + len(front) <= dom_slots:
            selected.extend(int(i) for i in front)
        else:
            selected.extend(_thin_front([int(i) for i in front], dom_slots - len(selected),
                                        fitness, ids, dist))
    chosen = set(selected)
    rest = np.array([i for i in range(len(pool)) if i not in chosen], dtype=int)
    nov_slots = capacity - len(selected)
    if nov_slots > 0 and rest.size:
        nov = novelty_scores(behaviors, k, dist=dist)
        order = np.lexsort((ids[rest], -nov[rest]))
        chosen.update(int(i) for i in rest[order[:nov_slots]])
    return [pool[i] for i in sorted(chosen)]


def _gnp_pair(ids: np.ndarray, dist: np.ndarray) -> tuple[int, int]:
    iu, ju = upper_pairs(len(ids))
    d = dist[iu, ju]
    best = np.flatnonzero(d == d.max())
    lo = np.minimum(ids[iu[best]], ids[ju[best]])
    hi = np.maximum(ids[iu[best]], ids[ju[best]])
    pick = best[np.lexsort((hi, lo))[0]]
    return int(iu[pick]), int(ju[pick])


def bdma2a_adapt_w(population: Sequence[Individual], previous_w: float) -> float:
    """Smallest w (plus a relative margin) at which neither member of the most
    distant pair is dominated by anyone in ``population``.

    Falls back to ``previous_w`` when no fitter individual threatens either
    endpoint, or when a fitter individual shares an endpoint's behavior exactly
    (no finite w helps).
    """
    members = list(population)
    if len(members) < 2:
        raise ValueError("w adaptation needs at least two individuals")
    fitness = fitness_vector(members)
    dist = pairwise_distances(behavior_matrix(members))
    u, v = _gnp_pair(np.array([m.id for m in members]), dist)
    thresholds = []
    for y in (u, v):
        gap = fitness - fitness[y]
        fitter = gap > 0
        if not fitter.any():
            continue
        d = dist[y, fitter]
        if np.any(d == 0):
            return previous_w
        thresholds.append(float(np.max(gap[fitter] / d)))
    if not thresholds:
        return previous_w
    return max(thresholds) * (1.0 + W_MARGIN)


# ---------------------------------------------------------------------------
# unified replacement

@dataclass
class CullResult:
    population: Population
    archive: NoveltyArchive | None
    deleted: list[int]
    w: float | None = None


def rank_and_cull(strategy: RankingStrategy, population: Population, offspring: Sequence[Individual],
                  archive: NoveltyArchive | None = None, elite_map: EliteMap | None = None,
                  w: float | None = None) -> CullResult:
    """Merge offspring into the population and cut back to capacity.

    MAP-Elites ignores capacity: offspring are offered to ``elite_map`` and the
    returned population is the current set of elites. For BDMA-2a, ``w`` is the
    previous value and the adapted one is reported in the result.
    """
    kind = strategy.kind
    if kind not in KINDS:
        raise ConfigError(f"unknown strategy kind {kind!r}")
    pool = list(population.members) + list(offspring)

    if kind == "map_elites":
        if elite_map is None:
            raise ConfigError("MAP-Elites replacement needs an EliteMap")
        before = {m.id for m in elite_map.bins.values()}
        for child in offspring:
            elite_map.offer(child)
        elites = elite_map.elites()
        now = {m.id for m in elites}
        deleted = sorted((before - now) | ({c.id for c in offspring} - now))
        return CullResult(Population(elites, population.capacity), archive, deleted)

    capacity = population.capacity
    if len(pool) <= capacity:
        return CullResult(Population(pool, capacity), archive, [],
                          w if kind in ("bdma2", "bdma2a") else None)

    if kind in ("bdma2", "bdma2a"):
        cur_w = strategy.domination.w if w is None else w
        if kind == "bdma2a":
            cur_w = bdma2a_adapt_w(pool, cur_w)
        survivors = bdma2_select(pool, strategy.domination, k=strategy.novelty.k,
                                 w=cur_w, capacity=capacity)
        kept = {m.id for m in survivors}
        deleted = [m.id for m in pool if m.id not in kept]
        return CullResult(Population(survivors, capacity), archive, deleted, cur_w)

    fitness = fitness_vector(pool)
    ids = np.array([m.id for m in pool])
    if kind == "fitness":
        order = _order_by_score(fitness, ids)
    else:
        behaviors = behavior_matrix(pool)
        dist = pairwise_distances(behaviors)
        if kind == "nsga_nf" and strategy.behavioral_diversity:
            nov = novelty_scores(behaviors, len(pool), dist=dist)
        else:
            arch = archive if strategy.uses_archive else None
            nov = _pool_novelty(pool, strategy.novelty.k, arch, behaviors, dist)
        if kind == "novelty":
            order = _order_by_score(nov, ids)
        elif kind == "lsnf":
            order = _order_by_score(lsnf_scores(fitness, nov, strategy.lsnf.p), ids)
        elif kind == "nsga_nf":
            order = nsga2_rank(np.column_stack([fitness, nov]), ids)
        else:  # nslc
            lc = local_competition_scores(fitness, behaviors, strategy.novelty.k, dist)
            order = nsga2_rank(np.column_stack([lc, nov]), ids)

    keep = sorted(int(i) for i in order[:capacity])
    deleted = [int(ids[i]) for i in order[capacity:]]
    return CullResult(Population([pool[i] for i in keep], capacity), archive, deleted)
