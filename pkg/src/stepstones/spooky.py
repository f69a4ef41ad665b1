"""Four-individual scenario where a small move on one edge of behavior space
flips which distant individual LSNF, NSGA-NF and NSLC delete."""
from __future__ import annotations

from dataclasses import dataclass

from .core import Population, make_individual
from .metrics import gnp, gnt
from .ranking import NoveltyParams, RankingStrategy, rank_and_cull

# (name, behavior offset, fitness offset); x3 and x4 are the two variants of the moved individual
_LAYOUT = {
    "x0": (0.0, 0.0),
    "x1": (10.0, 11.0),
    "x2": (11.0, 10.0),
    "x3": (21.0, 0.0),
    "x4": (22.0, 0.0),
}

EXPECTED = {
    "P": ("x2", 21.0, 41.0),
    "P'": ("x0", 12.0, 24.0),
}

STRATEGIES = ("lsnf", "nsga_nf", "nslc")


def build_populations(b0: float = 0.0, f0: float = 0.0) -> dict[str, list]:
    ind = {name: make_individual([b0 + b], f0 + f, [b0 + b], i)
           for i, (name, (b, f)) in enumerate(_LAYOUT.items())}
    return {
        "P": [ind["x0"], ind["x1"], ind["x2"], ind["x3"]],
        "P'": [ind["x0"], ind["x1"], ind["x2"], ind["x4"]],
    }


def _name_of(individual) -> str:
    return list(_LAYOUT)[individual.id]


@dataclass
class Verdict:
    strategy: str
    population: str
    deleted: str
    gnp: float
    gnt: float

    @property
    def ok(self) -> bool:
        return (self.deleted, self.gnp, self.gnt) == EXPECTED[self.population]


def evaluate(k: int = 2) -> list[Verdict]:
    """Delete one individual from P and from P' with each strategy (empty archive)."""
    pops = build_populations()
    verdicts = []
    for kind in STRATEGIES:
        strategy = RankingStrategy(kind, novelty=NoveltyParams(k=k, use_archive=False))
        for label, members in pops.items():
            res = rank_and_cull(strategy, Population(members, len(members) - 1), [])
            (dead,) = [m for m in members if m.id in res.deleted]
            kept = res.population.members
            verdicts.append(Verdict(strategy.name, label, _name_of(dead), gnp(kept), gnt(kept)))
    return verdicts
