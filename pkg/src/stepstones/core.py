"""Shared data model: individuals, populations, the novelty archive and
behavior-distance primitives."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

GENE_LOW = 0.0
GENE_HIGH = 150.0


class ConfigError(ValueError):
    """Invalid configuration or incompatible inputs (fatal before a run starts)."""


class DegeneratePopulationError(ValueError):
    """Raised when a score needs neighbors and none are available."""


@dataclass(frozen=True, eq=False)
class Individual:
    """An evaluated solution. Fitness and behavior are computed once at birth."""

    genome: np.ndarray
    fitness: float
    behavior: np.ndarray
    id: int

    def __repr__(self) -> str:
        b = np.array2string(self.behavior, precision=4)
        return f"Individual(id={self.id}, fitness={self.fitness:.6g}, behavior={b})"


def make_individual(genome, fitness: float, behavior, id: int) -> Individual:
    g = np.array(genome, dtype=float)
    b = np.atleast_1d(np.array(behavior, dtype=float))
    g.setflags(write=False)
    b.setflags(write=False)
    return Individual(genome=g, fitness=float(fitness), behavior=b, id=int(id))


@dataclass
class Population:
    members: list[Individual]
    capacity: int

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self) -> Iterator[Individual]:
        return iter(self.members)

    def __getitem__(self, i):
        return self.members[i]

    def ids(self) -> list[int]:
        return [m.id for m in self.members]


def behavior_matrix(individuals: Sequence[Individual]) -> np.ndarray:
    return np.array([ind.behavior for ind in individuals], dtype=float)


@lru_cache(maxsize=64)
def upper_pairs(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Row/column indices of the strict upper triangle of an n x n matrix."""
    return np.triu_indices(n, 1)


def fitness_vector(individuals: Sequence[Individual]) -> np.ndarray:
    return np.fromiter((ind.fitness for ind in individuals), dtype=float,
                       count=len(individuals))


def l2_distance(a, b) -> float:
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if a.shape != b.shape:
        raise ConfigError(f"behavior dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.sum((a - b) ** 2)))


def pairwise_distances(behaviors: np.ndarray) -> np.ndarray:
    """Symmetric (n, n) matrix of Euclidean distances between rows."""
    diff = behaviors[:, None, :] - behaviors[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def cross_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape[1] != b.shape[1]:
        raise ConfigError(f"behavior dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def k_nearest(target, pool, k: int) -> list[tuple[float, int]]:
    """Nearest ``k`` entries of ``pool`` to ``target``'s behavior.

    ``target`` may be an Individual or a raw behavior vector. Ties in distance
    resolve to the lower pool index. The caller is responsible for excluding
    the target's own entry from the pool.
    """
    if k < 1:
        raise ConfigError("k must be >= 1")
    behavior = target.behavior if isinstance(target, Individual) else target
    behavior = np.atleast_1d(np.asarray(behavior, dtype=float))
    if len(pool) == 0:
        return []
    pool = np.asarray(pool, dtype=float)
    if pool.ndim == 1:
        pool = pool[:, None]
    d = cross_distances(behavior[None, :], pool)[0]
    order = np.lexsort((np.arange(len(d)), d))[:k]
    return [(float(d[i]), int(i)) for i in order]


@dataclass
class NoveltyArchive:
    """Grow-only sample of past behaviors, each candidate added with ``p_add``.

    The id of the contributing individual is kept alongside each behavior so an
    individual never counts its own archived copy as a neighbor.
    """

    p_add: float = 0.01
    behaviors: list[np.ndarray] = field(default_factory=list)
    owners: list[int] = field(default_factory=list)

    def __post_init__(self):
        if not 0.0 <= self.p_add <= 1.0:
            raise ConfigError(f"p_add must lie in [0, 1], got {self.p_add}")

    def __len__(self) -> int:
        return len(self.behaviors)

    def add(self, individual: Individual) -> None:
        self.behaviors.append(individual.behavior)
        self.owners.append(individual.id)

    def as_array(self, dim: int) -> np.ndarray:
        if not self.behaviors:
            return np.empty((0, dim))
        return np.vstack(self.behaviors)


def maybe_archive(archive: NoveltyArchive, individual: Individual,
                  rng: np.random.Generator) -> NoveltyArchive:
    # One draw per call regardless of p_add keeps the random stream aligned.
    if rng.random() < archive.p_add:
        archive.add(individual)
    return archive
