import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stepstones.core import ConfigError, DegeneratePopulationError, NoveltyArchive, Population
from stepstones.ranking import (
    DominationParams,
    EliteMap,
    LsnfParams,
    NoveltyParams,
    RankingStrategy,
    W_MARGIN,
    bdma2_select,
    bdma2a_adapt_w,
    canonical_kind,
    crowding_distance,
    domination_effect,
    dominates,
    fast_nondominated_sort,
    local_competition_score,
    lsnf_rank,
    map_elites_offer,
    novelty_score,
    novelty_scores,
    nsga2_rank,
    rank_and_cull,
)

from conftest import ind

P_LAYOUT = [(0, 0), (10, 11), (11, 10), (21, 0)]
P_PRIME_LAYOUT = [(0, 0), (10, 11), (11, 10), (22, 0)]


def population(layout):
    return [ind(b, f, i) for i, (b, f) in enumerate(layout)]


def peel_fronts(n, rel):
    """Brute-force oracle: repeatedly strip the items no remaining item strictly dominates."""
    strict = lambda i, j: rel(i, j) and not rel(j, i)  # noqa: E731
    left, fronts = set(range(n)), []
    while left:
        front = {j for j in left if not any(strict(i, j) for i in left if i != j)}
        fronts.append(front)
        left -= front
    return fronts


# ---------------------------------------------------------------------------
# novelty


def test_novelty_score_examples():
    p = population(P_LAYOUT)
    assert novelty_score(p[0], p, None, 2) == 10.5
    q = population(P_PRIME_LAYOUT)
    assert novelty_score(q[3], q, NoveltyArchive(), 2) == 11.5
    same = [ind(3.0, i, i) for i in range(4)]
    assert novelty_score(same[1], same, None, 2) == 0.0


def test_novelty_score_degenerate():
    x = ind(0, 0, 0)
    with pytest.raises(DegeneratePopulationError):
        novelty_score(x, [x], None, 3)


def test_novelty_score_fewer_than_k_neighbors():
    p = population(P_LAYOUT)
    assert novelty_score(p[0], p, None, 10) == pytest.approx((10 + 11 + 21) / 3)


def test_novelty_skips_own_archive_entry():
    p = population(P_LAYOUT)
    archive = NoveltyArchive(p_add=1.0)
    archive.add(p[0])
    assert novelty_score(p[0], p, archive, 2) == 10.5
    stranger = ind(0.5, 0, 99)
    archive.add(stranger)
    assert novelty_score(p[0], p, archive, 2) == pytest.approx((0.5 + 10) / 2)
    vec = novelty_scores(np.array([[0.0], [10.0], [11.0], [21.0]]), 2,
                         archive.as_array(1), np.arange(4), np.array(archive.owners))
    assert vec[0] == pytest.approx(5.25)


def test_vector_and_scalar_novelty_agree(rng):
    b = rng.normal(size=(15, 3))
    pop = [ind(row, 0, i) for i, row in enumerate(b)]
    vec = novelty_scores(b, 4)
    for i, x in enumerate(pop):
        assert vec[i] == pytest.approx(novelty_score(x, pop, None, 4))


# ---------------------------------------------------------------------------
# LSNF


def _lsnf_worst(layout, k=2):
    pop = population(layout)
    nov = novelty_scores(np.array([[b] for b, _ in layout], dtype=float), k)
    return lsnf_rank(pop, LsnfParams(0.5), nov)[-1]


def test_lsnf_deletes_x2_from_p_and_x0_from_p_prime():
    assert _lsnf_worst(P_LAYOUT) == 2
    assert _lsnf_worst(P_PRIME_LAYOUT) == 0


def test_lsnf_normalized_terms_match_worked_values():
    from stepstones.ranking import _normalize

    nov = novelty_scores(np.array([[0.0], [10.0], [11.0], [22.0]]), 2)
    assert np.allclose(_normalize(nov), [10 / 12, 0, 1 / 12, 1])
    assert np.allclose(_normalize(np.array([0.0, 11, 10, 0])), [0, 1, 10 / 11, 0])


def test_lsnf_identical_individuals_delete_largest_id():
    pop = [ind(1.0, 2.0, i) for i in (4, 9, 2)]
    order = lsnf_rank(pop, LsnfParams(), np.zeros(3))
    assert pop[order[-1]].id == 9


def test_lsnf_rejects_bad_p():
    with pytest.raises(ConfigError):
        LsnfParams(p=1.2)


# ---------------------------------------------------------------------------
# domination


def test_domination_effect_examples():
    x, y = ind(0, 5, 0), ind(0, 3, 1)
    assert domination_effect(x, y, 1) == 1
    assert domination_effect(x, x, 0) == 0
    assert domination_effect(y, x, 1) == -3


def test_dominates_examples():
    x, y = ind(0, 5, 0), ind(0, 3, 1)
    assert dominates(x, y, 1)
    assert dominates(x, y, 2)
    assert not dominates(x, y, 2.5)


def test_effect_identities(rng):
    for _ in range(200):
        x, y = ind(rng.normal(size=2), rng.normal(), 0), ind(rng.normal(size=2), rng.normal(), 1)
        w = rng.uniform(0.1, 10)
        assert domination_effect(x, x, w=w) == 0
        d = w * np.linalg.norm(x.behavior - y.behavior)
        assert domination_effect(x, y, w=w) + domination_effect(y, x, w=w) == pytest.approx(-2 * d)


def test_callable_distance():
    x, y = ind(0, 5, 0), ind(7, 3, 1)
    assert domination_effect(x, y, lambda a, b: 0.0) == 2


# millesimal grid: avoids squared differences underflowing to zero
finite = st.integers(-10**6, 10**6).map(lambda v: v / 1000)


@given(finite, finite, finite, finite, finite, finite, st.sampled_from([0.1, 1.0, 16.0]))
def test_partial_order_property(f1, b1, f2, b2, f3, b3, w):
    x, y, z = ind(b1, f1, 0), ind(b2, f2, 1), ind(b3, f3, 2)
    assert dominates(x, x, w=w)
    if dominates(x, y, w=w) and dominates(y, x, w=w):
        assert f1 == f2 and b1 == b2
    if dominates(x, y, w=w) and dominates(y, z, w=w):
        # exact in real arithmetic; allow rounding slack in floating point
        assert domination_effect(x, z, w=w) >= -1e-9 * (1 + abs(f1) + abs(f3) + w * (abs(b1) + abs(b2) + abs(b3)))


# ---------------------------------------------------------------------------
# sorting


def test_single_front_when_nothing_dominates():
    fronts = fast_nondominated_sort(list("abcd"), lambda a, b: False)
    assert len(fronts) == 1 and fronts[0].members == list("abcd")


def test_pareto_fronts_on_p_prime():
    nov = novelty_scores(np.array([[0.0], [10.0], [11.0], [22.0]]), 2)
    objs = [(f, n) for (_, f), n in zip(P_PRIME_LAYOUT, nov)]
    pareto = lambda a, b: all(p >= q for p, q in zip(a, b)) and any(p > q for p, q in zip(a, b))  # noqa: E731
    fronts = fast_nondominated_sort(list(range(4)), lambda i, j: pareto(objs[i], objs[j]))
    assert [set(f.members) for f in fronts] == [{1, 2, 3}, {0}]


@pytest.mark.parametrize("seed", range(40))
def test_sort_matches_peeling_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 40))
    f = np.round(rng.normal(size=n) * 4)
    b = np.round(rng.normal(size=n) * 4)
    w = float(rng.choice([0.1, 1, 16]))
    rel = lambda i, j: f[i] - f[j] - w * abs(b[i] - b[j]) >= 0  # noqa: E731
    fronts = fast_nondominated_sort(list(range(n)), rel)
    assert [set(fr.members) for fr in fronts] == peel_fronts(n, rel)
    for fr in fronts:
        for i, j in itertools.permutations(fr.members, 2):
            assert not (rel(i, j) and not rel(j, i))


def test_sort_detects_cycles():
    with pytest.raises(ValueError):
        fast_nondominated_sort([0, 1, 2], lambda a, b: (b - a) % 3 == 1)


# ---------------------------------------------------------------------------
# NSGA-II and local competition


def test_local_competition_examples():
    for layout in (P_LAYOUT, P_PRIME_LAYOUT):
        pop = population(layout)
        assert [local_competition_score(x, pop, 2) for x in pop] == [0, 2, 1, 0]
    flat = [ind(b, 1.0, i) for i, b in enumerate([0, 3, 9, 4])]
    assert [local_competition_score(x, flat, 2) for x in flat] == [0, 0, 0, 0]


def test_nsga_nf_deletes_x2_from_p():
    nov = novelty_scores(np.array([[b] for b, _ in P_LAYOUT], dtype=float), 2)
    objs = np.column_stack([[f for _, f in P_LAYOUT], nov])
    assert objs[1].tolist() == [11, 5.5] and objs[2].tolist() == [10, 5.5]
    assert nsga2_rank(objs, range(4))[-1] == 2


def test_nslc_deletes_x0_from_p_prime():
    nov = novelty_scores(np.array([[b] for b, _ in P_PRIME_LAYOUT], dtype=float), 2)
    objs = np.column_stack([[0, 2, 1, 0], nov])
    assert objs[3].tolist() == [0, 11.5] and objs[0].tolist() == [0, 10.5]
    assert nsga2_rank(objs, range(4))[-1] == 0


def test_nsga2_single_individual():
    assert nsga2_rank(np.array([[1.0, 2.0]]), [5]) == [0]
    assert crowding_distance(np.array([[1.0, 2.0]]))[0] == math.inf


def test_crowding_distance_standard_values():
    objs = np.array([[0.0, 4.0], [1.0, 3.0], [3.0, 1.0], [4.0, 0.0]])
    c = crowding_distance(objs)
    assert c[0] == c[3] == math.inf
    assert c[1] == pytest.approx(2 * 3 / 4)
    assert c[2] == pytest.approx(2 * 3 / 4)


# ---------------------------------------------------------------------------
# MAP-Elites


def test_map_elites_offer_examples():
    m = EliteMap(1.0)
    m, ok = map_elites_offer(m, ind(3.2, 5, 0))
    assert ok
    m, ok = map_elites_offer(m, ind(3.9, 5, 1))
    assert not ok and m.bins[(3,)].id == 0
    m, ok = map_elites_offer(m, ind(3.1, 6, 2))
    assert ok and m.bins[(3,)].id == 2


def test_map_elites_bin_count_bound(rng):
    m = EliteMap(1.0)
    for i, x in enumerate(rng.uniform(0, 150, 20_000)):
        m.offer(ind(x, rng.random(), i))
    m.offer(ind(150.0, 1.0, -1))
    assert len(m) <= 151
    assert all(0 <= key[0] <= 150 for key in m.bins)


# ---------------------------------------------------------------------------
# BDMA-2 / BDMA-2a


def test_bdma2_thins_overflowing_front():
    pool = [ind(0, 5, 0), ind(10, 5, 1), ind(11, 5.5, 2), ind(30, 5, 3), ind(50, 5, 4)]
    params = DominationParams(w=1.0, dom_slots=4, nov_slots=0)
    survivors = bdma2_select(pool, params)
    assert [m.id for m in survivors] == [0, 2, 3, 4]


def test_bdma2_thinning_fitness_tie_drops_larger_id():
    pool = [ind(0, 5, 0), ind(10, 5, 1), ind(11, 5, 2), ind(30, 5, 3), ind(50, 5, 4)]
    survivors = bdma2_select(pool, DominationParams(w=1.0, dom_slots=4, nov_slots=0))
    assert [m.id for m in survivors] == [0, 1, 3, 4]


def test_bdma2_dominated_offspring_never_displaces_front0(rng):
    incumbents = [ind(10 * i, 100.0, i) for i in range(6)]
    child = ind(0.5, 1.0, 6)
    params = DominationParams(w=1.0, dom_slots=6, nov_slots=0)
    assert [m.id for m in bdma2_select(incumbents + [child], params)] == list(range(6))


def test_bdma2_phase_two_takes_most_novel_leftover():
    pool = [ind(0, 10, 0), ind(1, 1, 1), ind(5, 1, 2), ind(30, 1, 3)]
    # w tiny: id 0 dominates everyone; front 1 = {1, 2, 3} is thinned to id 1,
    # then the novelty slot goes to the isolated id 3
    survivors = bdma2_select(pool, DominationParams(w=1e-6, dom_slots=2, nov_slots=1), k=1)
    assert [m.id for m in survivors] == [0, 1, 3]


def test_bdma2_select_is_deterministic(rng):
    pool = [ind(rng.normal(size=2) * 5, rng.normal(), i) for i in range(21)]
    params = DominationParams(w=0.3)
    first = [m.id for m in bdma2_select(pool, params)]
    for _ in range(3):
        assert [m.id for m in bdma2_select(pool, params)] == first
    assert len(first) == 20


def test_bdma2a_two_point_example():
    w = bdma2a_adapt_w([ind(0, 0, 0), ind(10, 5, 1)], previous_w=1.0)
    assert w == pytest.approx(0.5 * (1 + W_MARGIN), rel=1e-15)
    assert w > 0.5


def test_bdma2a_keeps_previous_w_when_endpoints_are_fittest():
    # the endpoints share the top fitness, so nobody is strictly fitter than either
    pop = [ind(0, 10, 0), ind(5, 1, 1), ind(20, 10, 2)]
    assert bdma2a_adapt_w(pop, previous_w=3.25) == 3.25


def test_bdma2a_coincident_fitter_keeps_previous_w():
    pop = [ind(0, 0, 0), ind(0, 5, 1), ind(10, 7, 2)]
    assert bdma2a_adapt_w(pop, previous_w=2.0) == 2.0


def test_bdma2a_postcondition_random(rng):
    for _ in range(300):
        n = int(rng.integers(2, 25))
        pop = [ind(rng.uniform(0, 150, size=2), rng.uniform(0, 200), i) for i in range(n)]
        w = bdma2a_adapt_w(pop, previous_w=1.0)
        d = [[np.linalg.norm(a.behavior - b.behavior) for b in pop] for a in pop]
        far = max(((i, j) for i in range(n) for j in range(i + 1, n)), key=lambda p: d[p[0]][p[1]])
        for y in far:
            for z in range(n):
                if z != y and pop[z].fitness > pop[y].fitness:
                    assert not dominates(pop[z], pop[y], w=w)


def test_non_domination_stability_under_edits(rng):
    for _ in range(100):
        pop = [ind(rng.normal(size=2) * 3, rng.normal() * 3, i) for i in range(8)]
        w = float(rng.uniform(0.1, 4))
        before = dominates(pop[0], pop[1], w=w)
        for i in range(2, 8):
            pop[i] = ind(rng.normal(size=2) * 50, rng.normal() * 50, 100 + i)
        assert dominates(pop[0], pop[1], w=w) == before


# ---------------------------------------------------------------------------
# rank_and_cull


def test_fitness_cull_removes_worst_with_youngest_on_tie():
    pop = Population([ind(0, 3, 0), ind(1, 1, 1), ind(2, 5, 2)], 3)
    res = rank_and_cull(RankingStrategy("fitness"), pop, [ind(3, 1, 3)])
    assert res.deleted == [3]
    assert len(res.population) == 3


def test_novelty_cull_on_p_deletes_larger_id_of_tie():
    members = population(P_LAYOUT)
    strat = RankingStrategy("novelty", novelty=NoveltyParams(k=2, use_archive=False))
    res = rank_and_cull(strat, Population(members[:3], 3), [members[3]])
    assert res.deleted == [2]


def test_bdma2_domination_of_gnp_member_unaffected_by_moving_x3():
    w = 1.0
    for layout in (P_LAYOUT, P_PRIME_LAYOUT):
        pop = population(layout)
        threats = [z.id for z in pop if z is not pop[0] and dominates(z, pop[0], w=w)]
        assert threats == [1]


def test_bdma2a_cull_reports_adapted_w():
    pop = Population([ind(0, 0, 0), ind(10, 5, 1)], 2)
    strat = RankingStrategy("bdma2a", domination=DominationParams(w=1.0, dom_slots=1, nov_slots=1))
    res = rank_and_cull(strat, pop, [ind(4, 1, 2)], w=1.0)
    assert res.w == pytest.approx(0.5 * (1 + W_MARGIN))
    assert len(res.population) == 2


def test_map_elites_cull_uses_map():
    m = EliteMap(1.0)
    start = [ind(0.5, 1, 0), ind(5.5, 1, 1)]
    for x in start:
        m.offer(x)
    res = rank_and_cull(RankingStrategy("map_elites"), Population(start, 2), [ind(5.2, 2, 2)], elite_map=m)
    assert [x.id for x in res.population] == [0, 2]
    assert res.deleted == [1]
    with pytest.raises(ConfigError):
        rank_and_cull(RankingStrategy("map_elites"), Population(start, 2), [])


def test_behavioral_diversity_toggle_disables_archive():
    s = RankingStrategy("nsga_nf", behavioral_diversity=True)
    assert not s.uses_archive
    pop = population(P_LAYOUT)
    res = rank_and_cull(s, Population(pop[:3], 3), [pop[3]])
    assert len(res.population) == 3


def test_strategy_names():
    assert canonical_kind("BDMA-2a") == "bdma2a"
    assert canonical_kind("NSGA-NF") == "nsga_nf"
    assert RankingStrategy("MAP-Elites").name == "MAP-Elites"
    with pytest.raises(ConfigError):
        canonical_kind("simulated_annealing")
