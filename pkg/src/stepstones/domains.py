"""Benchmark environments: four peaks, ETF claws and focused Ackley.

Each domain evaluates a genome once and returns ``(fitness, behavior)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import ConfigError
from .metrics import BinSpec

FOUR_PEAKS = ((50.0, 10.0, 5.0), (150.0, 40.0, 3.0), (100.0, 70.0, 8.0), (200.0, 130.0, 5.0))


def gaussian_bump(x, mu: float, sigma: float):
    return np.exp(-((x - mu) ** 2) / (2.0 * sigma ** 2))


def four_peaks_fitness(x) -> float:
    return float(sum(a * gaussian_bump(x, mu, s) for a, mu, s in FOUR_PEAKS))


def four_peaks_evaluate(x) -> tuple[float, np.ndarray]:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return four_peaks_fitness(x[0]), x[:1].copy()


@dataclass(frozen=True)
class FourPeaksDomain:
    name: str = "four_peaks"
    genome_dim: int = 1
    behavior_dim: int = 1
    default_sigma: float = 1.0
    default_w: float = 16.0
    bins: BinSpec = field(default_factory=lambda: BinSpec.around_peaks([p[1] for p in FOUR_PEAKS], 10.0))

    def evaluate(self, genome, rng=None) -> tuple[float, np.ndarray]:
        return four_peaks_evaluate(genome)

    def label(self) -> str:
        return "four_peaks"


# ---------------------------------------------------------------------------
# ETF

ETF_EPSILON = 0.2
# toe length of claw i is ETF_TOE_SCALE * i; at 1 a fitness-only search hops from
# the first diagonal tip to the second heel by mutation alone
ETF_TOE_SCALE = 2.0


def heel_fitnesses(n: int) -> list[float]:
    h = [1.0]
    for i in range(1, n):
        h.append(2.0 * (h[-1] + i))
    return h


@dataclass(frozen=True)
class Claw:
    index: int
    heel: tuple[float, float]
    heel_fitness: float
    vertical_tip: tuple[float, float]
    horizontal_tip: tuple[float, float]
    diagonal_tip: tuple[float, float]


def etf_geometry(i: int, toe_scale: float = ETF_TOE_SCALE) -> Claw:
    """Claw ``i`` (1-based): toes of length ``toe_scale * i``; the next heel sits
    at heel + (L, L).

    Crossing the vertical tip (x from heel) with the horizontal tip (y from heel)
    yields the next heel, which is the point of the domain.
    """
    if i < 1:
        raise ConfigError("claw index starts at 1")
    # heel_i = (1, 1) + sum_{j<i} (L_j, L_j)
    c = 1.0 + toe_scale * i * (i - 1) / 2.0
    L = toe_scale * i
    h = heel_fitnesses(i)[-1]
    diag = c + L / math.sqrt(2.0)
    return Claw(i, (c, c), h, (c, c + L), (c + L, c), (diag, diag))


def etf_claw_count(upper: float = 150.0, toe_scale: float = ETF_TOE_SCALE) -> int:
    """Number of claws whose toes fit entirely inside [0, upper]^2."""
    i = 1
    while 1.0 + toe_scale * (i + 1) * (i + 2) / 2.0 <= upper:
        i += 1
    return i


@dataclass(frozen=True)
class EtfDomain:
    s: float = 100.0
    toe_scale: float = ETF_TOE_SCALE
    epsilon: float = ETF_EPSILON
    name: str = "etf"
    genome_dim: int = 2
    behavior_dim: int = 1
    default_sigma: float = 0.1
    bins: BinSpec | None = None

    def __post_init__(self):
        if not self.s > 0:
            raise ConfigError(f"ETF stretch s must be positive, got {self.s}")
        starts, ends, f0, f1 = [], [], [], []
        if not self.toe_scale > 0:
            raise ConfigError(f"toe_scale must be positive, got {self.toe_scale}")
        for i in range(1, etf_claw_count(toe_scale=self.toe_scale) + 1):
            claw = etf_geometry(i, self.toe_scale)
            for tip, gain in ((claw.vertical_tip, i), (claw.horizontal_tip, i), (claw.diagonal_tip, 2 * i)):
                starts.append(claw.heel)
                ends.append(tip)
                f0.append(claw.heel_fitness)
                f1.append(claw.heel_fitness + gain)
        starts = np.array(starts)
        seg = np.array(ends) - starts
        object.__setattr__(self, "_starts", starts)
        object.__setattr__(self, "_seg", seg)
        object.__setattr__(self, "_seg_len2", np.einsum("ij,ij->i", seg, seg))
        object.__setattr__(self, "_f0", np.array(f0))
        object.__setattr__(self, "_gain", np.array(f1) - np.array(f0))

    @property
    def default_w(self) -> float:
        return {100.0: 0.005, 1000.0: 0.0005, 10000.0: 0.00005}.get(float(self.s), 0.5 / self.s)

    def fitness(self, x) -> float:
        p = np.asarray(x, dtype=float)[:2]
        rel = p - self._starts
        t = np.clip(np.einsum("ij,ij->i", rel, self._seg) / self._seg_len2, 0.0, 1.0)
        off = rel - t[:, None] * self._seg
        near = np.einsum("ij,ij->i", off, off) <= (self.epsilon / 2.0) ** 2
        if not near.any():
            return 0.0
        return float(np.max(self._f0[near] + t[near] * self._gain[near]))

    def evaluate(self, genome, rng=None) -> tuple[float, np.ndarray]:
        g = np.asarray(genome, dtype=float)
        return self.fitness(g), np.array([self.s * g[0] + g[1]])

    def label(self) -> str:
        return f"etf_s{self.s:g}"


def etf_evaluate(x, s: float = 100.0, toe_scale: float = ETF_TOE_SCALE) -> tuple[float, np.ndarray]:
    return EtfDomain(s=s, toe_scale=toe_scale).evaluate(x)


# ---------------------------------------------------------------------------
# focused Ackley

ACKLEY_A = 500.0
ACKLEY_B = 0.0005
ACKLEY_C = math.pi
ACKLEY_VARIANTS = ("standard", "inverted")


def ackley_value(x0: float, x1: float, a: float = ACKLEY_A, b: float = ACKLEY_B, c: float = ACKLEY_C,
                 variant: str = "standard") -> float:
    """Two-dimensional Ackley function.

    ``standard`` is the usual Ackley value (zero at the origin, rising with
    radius through a lattice of local maxima). ``inverted`` is ``e - standard``,
    which peaks at the origin with value e.
    """
    r = math.sqrt((x0 * x0 + x1 * x1) / 2.0)
    inner = a * math.exp(-b * r) + math.exp((math.cos(c * x0) + math.cos(c * x1)) / 2.0) - a
    if variant == "inverted":
        return inner
    if variant == "standard":
        return math.e - inner
    raise ConfigError(f"unknown Ackley variant {variant!r}")


@dataclass(frozen=True)
class FocusedAckleyDomain:
    D: int = 10
    variant: str = "standard"
    a: float = ACKLEY_A
    b: float = ACKLEY_B
    c: float = ACKLEY_C
    name: str = "focused_ackley"
    default_sigma: float = 0.25
    bins: BinSpec | None = None

    def __post_init__(self):
        if int(self.D) != self.D or self.D < 2:
            raise ConfigError(f"focused Ackley needs integer D >= 2, got {self.D}")
        object.__setattr__(self, "D", int(self.D))
        if self.variant not in ACKLEY_VARIANTS:
            raise ConfigError(f"unknown Ackley variant {self.variant!r}")

    @property
    def genome_dim(self) -> int:
        return self.D

    @property
    def behavior_dim(self) -> int:
        return self.D

    @property
    def default_w(self) -> float:
        return {10: 0.005, 20: 0.0005, 30: 0.00005}.get(self.D, 0.005 * 10.0 ** (-(self.D - 10) / 10.0))

    def in_region(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(abs(x[0] - x[1]) < 2.0 and x[2:].sum() < self.D / 2.0)

    def evaluate(self, genome, rng: np.random.Generator | None = None) -> tuple[float, np.ndarray]:
        x = np.array(genome, dtype=float)
        if self.in_region(x):
            f = ackley_value(x[0], x[1], self.a, self.b, self.c, self.variant)
        else:
            if rng is None:
                raise ValueError("out-of-region evaluation needs a random stream")
            f = float(rng.random())
        return f, x

    def label(self) -> str:
        return f"focused_ackley_D{self.D}"


def focused_ackley_evaluate(x, rng: np.random.Generator, D: int | None = None,
                            variant: str = "standard") -> tuple[float, np.ndarray]:
    x = np.asarray(x, dtype=float)
    return FocusedAckleyDomain(D=D or len(x), variant=variant).evaluate(x, rng)


DOMAIN_NAMES = ("four_peaks", "etf", "focused_ackley")


def make_domain(name: str, s: float | None = None, D: int | None = None, variant: str | None = None,
                toe_scale: float | None = None):
    key = name.lower().replace("-", "_")
    if key in ("four_peaks", "fourpeaks"):
        return FourPeaksDomain()
    if key == "etf":
        kw = {} if toe_scale is None else {"toe_scale": float(toe_scale)}
        return EtfDomain(s=100.0 if s is None else float(s), **kw)
    if key in ("focused_ackley", "ackley"):
        kw = {} if variant is None else {"variant": variant}
        return FocusedAckleyDomain(D=10 if D is None else D, **kw)
    raise ConfigError(f"unknown domain {name!r}; choose from {', '.join(DOMAIN_NAMES)}")
