"""Steady-state evolutionary loop shared by every ranking strategy.

One offspring per iteration: two uniformly chosen parents, uniform crossover,
Gaussian mutation clamped to the gene range, evaluation, optional archiving,
then replacement through :func:`rank_and_cull`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    GENE_HIGH,
    GENE_LOW,
    ConfigError,
    Individual,
    NoveltyArchive,
    Population,
    behavior_matrix,
    make_individual,
    maybe_archive,
    pairwise_distances,
    upper_pairs,
)
from .domains import make_domain
from .metrics import BinHistory, RunLog, bin_scores
from .ranking import EliteMap, RankingStrategy, rank_and_cull


@dataclass(frozen=True)
class EAParams:
    population_size: int = 20
    offspring_per_iteration: int = 1
    crossover_probability: float = 1.0
    mutation_sigma: float = 1.0
    iterations: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 2:
            raise ConfigError("population_size must be at least 2")
        if self.offspring_per_iteration < 1:
            raise ConfigError("offspring_per_iteration must be at least 1")
        if not 0.0 <= self.crossover_probability <= 1.0:
            raise ConfigError("crossover_probability must lie in [0, 1]")
        if not self.mutation_sigma > 0:
            raise ConfigError("mutation_sigma must be positive")
        if self.iterations < 0:
            raise ConfigError("iterations must be non-negative")


@dataclass
class RunState:
    domain: object
    strategy: RankingStrategy
    params: EAParams
    rng: np.random.Generator
    population: Population
    archive: NoveltyArchive | None = None
    elite_map: EliteMap | None = None
    w: float = math.nan
    iteration: int = 0
    next_id: int = 0
    best_fitness: float = -math.inf
    bin_history: BinHistory | None = None
    log: RunLog = field(default_factory=RunLog)


def uniform_crossover(p1, p2, rng: np.random.Generator) -> np.ndarray:
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    if p1.shape != p2.shape:
        raise ConfigError("parents must have equal length")
    take_first = rng.random(p1.shape) < 0.5
    return np.where(take_first, p1, p2)


def gaussian_mutate(genome, sigma: float, rng: np.random.Generator) -> np.ndarray:
    g = np.asarray(genome, dtype=float)
    return np.clip(g + rng.normal(0.0, sigma, g.shape), GENE_LOW, GENE_HIGH)


def _evaluate(state: RunState, genome) -> Individual:
    fitness, behavior = state.domain.evaluate(genome, state.rng)
    ind = make_individual(genome, fitness, behavior, state.next_id)
    state.next_id += 1
    if ind.fitness > state.best_fitness:
        state.best_fitness = ind.fitness
    if state.bin_history is not None:
        state.bin_history.observe(ind)
    return ind


def initialize_population(domain, params: EAParams, rng: np.random.Generator,
                          state: RunState | None = None) -> Population:
    """``population_size`` evaluated individuals with genes drawn from [0, 1)."""
    if state is None:
        state = RunState(domain, RankingStrategy("fitness"), params, rng, Population([], params.population_size))
    members = [_evaluate(state, rng.random(domain.genome_dim)) for _ in range(params.population_size)]
    return Population(members, params.population_size)


def _record(state: RunState) -> None:
    members = state.population.members
    total = current = 0.0
    if state.bin_history is not None:
        total, current = bin_scores(state.bin_history, members)
    if len(members) >= 2:
        d = pairwise_distances(behavior_matrix(members))
        upper = d[upper_pairs(len(members))]
        g_p, g_t = float(upper.max()), float(upper.sum())
    else:
        g_p = g_t = 0.0
    state.log.record(state.iteration, state.best_fitness, total, current, g_p, g_t, state.w)


def new_state(domain, strategy: RankingStrategy, params: EAParams) -> RunState:
    rng = np.random.default_rng(params.seed)
    state = RunState(domain, strategy, params, rng, Population([], params.population_size))
    if domain.bins is not None:
        state.bin_history = BinHistory(domain.bins)
    if strategy.uses_archive:
        state.archive = NoveltyArchive(p_add=strategy.novelty.p_add)
    if strategy.kind in ("bdma2", "bdma2a"):
        state.w = strategy.domination.w
    state.population = initialize_population(domain, params, rng, state)
    if strategy.kind == "map_elites":
        state.elite_map = EliteMap(strategy.bin_width)
        for m in state.population:
            state.elite_map.offer(m)
        state.population = Population(state.elite_map.elites(), params.population_size)
    _record(state)
    return state


def _parents(state: RunState) -> tuple[Individual, Individual]:
    members = state.population.members
    i, j = state.rng.integers(len(members), size=2)
    return members[i], members[j]


def step(state: RunState) -> RunState:
    params = state.params
    offspring = []
    for _ in range(params.offspring_per_iteration):
        p1, p2 = _parents(state)
        if state.rng.random() < params.crossover_probability:
            genome = uniform_crossover(p1.genome, p2.genome, state.rng)
        else:
            genome = p1.genome.copy()
        genome = gaussian_mutate(genome, params.mutation_sigma, state.rng)
        child = _evaluate(state, genome)
        if state.archive is not None:
            # every evaluated offspring is an archive candidate
            maybe_archive(state.archive, child, state.rng)
        offspring.append(child)

    w = state.w if state.strategy.kind in ("bdma2", "bdma2a") else None
    result = rank_and_cull(state.strategy, state.population, offspring, state.archive,
                           state.elite_map, w=w)
    state.population = result.population
    if result.w is not None:
        state.w = result.w
    state.iteration += 1
    _record(state)
    return state


@dataclass(frozen=True)
class RunConfig:
    domain: str = "four_peaks"
    strategy: RankingStrategy = field(default_factory=lambda: RankingStrategy("bdma2"))
    params: EAParams = field(default_factory=EAParams)
    s: float | None = None
    D: int | None = None
    ackley_variant: str | None = None
    toe_scale: float | None = None

    def build_domain(self):
        return make_domain(self.domain, s=self.s, D=self.D, variant=self.ackley_variant,
                           toe_scale=self.toe_scale)


def run(config: RunConfig, on_step=None) -> RunLog:
    """Execute ``config.params.iterations`` steps and return the full log.

    Row 0 describes the initial population. ``on_step(state)`` is called after
    every iteration when given.
    """
    domain = config.build_domain()
    if not isinstance(config.strategy, RankingStrategy):
        raise ConfigError("strategy must be a RankingStrategy")
    state = new_state(domain, config.strategy, config.params)
    for _ in range(config.params.iterations):
        step(state)
        if on_step is not None:
            on_step(state)
    state.log.final_population = list(state.population.members)
    return state.log
