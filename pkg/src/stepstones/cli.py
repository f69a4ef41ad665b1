"""Command-line front end: single runs, experiment suites and the spooky check.

Exit status is 0 on success, 1 on configuration or I/O errors and 2 when the
spooky-action scenario disagrees with its reference values.
"""
from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

from . import spooky
from .core import ConfigError
from .domains import make_domain
from .evolution import EAParams, RunConfig, run
from .metrics import mann_whitney_u, mean_stderr
from .ranking import (
    DISPLAY_NAMES,
    DominationParams,
    LsnfParams,
    NoveltyParams,
    RankingStrategy,
    canonical_kind,
)
from .results import format_cell, format_table, write_run_csv

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SPOOKY = 2

SUITES = ("four_peaks", "etf", "ackley", "all")
FOUR_PEAKS_STRATEGIES = tuple(DISPLAY_NAMES)
TABLE_STRATEGIES = ("fitness", "novelty", "nslc", "bdma2", "bdma2a")
ETF_S_VALUES = (100.0, 1000.0, 10000.0)
ACKLEY_D_VALUES = (10, 20, 30)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to launch one or more seeded runs.

    ``None`` means "use the domain's default" for ``w`` and ``sigma``.
    """

    domain: str = "four_peaks"
    strategies: tuple[str, ...] = ("bdma2",)
    s: float | None = None
    D: int | None = None
    toe_scale: float | None = None
    ackley_variant: str | None = None
    w: float | None = None
    k: int = 5
    p_add: float = 0.01
    lsnf_p: float = 0.5
    bin_width: float = 1.0
    dom_slots: int = 10
    nov_slots: int = 10
    population_size: int = 20
    iterations: int = 10_000
    sigma: float | None = None
    seed: int = 0
    seeds: int = 10
    thin: int = 1
    workers: int = 1
    out: Path = field(default_factory=lambda: Path("results"))

    def __post_init__(self):
        object.__setattr__(self, "strategies", tuple(canonical_kind(s) for s in self.strategies))
        if not self.strategies:
            raise ConfigError("at least one strategy is required")
        if self.seeds < 1:
            raise ConfigError("seeds must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.thin < 1:
            raise ConfigError("thin must be >= 1")
        # building once validates the domain overrides before any run starts
        self.build_domain()

    def build_domain(self):
        return make_domain(self.domain, s=self.s, D=self.D, variant=self.ackley_variant,
                           toe_scale=self.toe_scale)

    def strategy(self, kind: str) -> RankingStrategy:
        domain = self.build_domain()
        w = self.w if self.w is not None else getattr(domain, "default_w", 1.0)
        return RankingStrategy(
            kind,
            novelty=NoveltyParams(k=self.k, p_add=self.p_add),
            lsnf=LsnfParams(p=self.lsnf_p),
            domination=DominationParams(w=w, dom_slots=self.dom_slots, nov_slots=self.nov_slots),
            bin_width=self.bin_width,
        )

    def run_config(self, kind: str, run_index: int) -> RunConfig:
        domain = self.build_domain()
        params = EAParams(
            population_size=self.population_size,
            mutation_sigma=self.sigma if self.sigma is not None else domain.default_sigma,
            iterations=self.iterations,
            seed=self.seed + run_index,
        )
        return RunConfig(self.domain, self.strategy(kind), params, s=self.s, D=self.D,
                         ackley_variant=self.ackley_variant, toe_scale=self.toe_scale)

    def jobs(self) -> list[tuple[str, int]]:
        return [(kind, i) for kind in self.strategies for i in range(self.seeds)]


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _coerce(key: str, raw: str):
    kind = _FIELD_TYPES[key]
    if key == "strategies":
        return tuple(p.strip() for p in raw.split(",") if p.strip())
    if key == "out":
        return Path(raw)
    if raw.lower() in ("none", ""):
        return None
    try:
        if "int" in kind:
            return int(raw)
        if "float" in kind:
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r}") from None
    return raw


def read_config_file(path: Path | str) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    values = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, raw = (p.strip() for p in line.split("=", 1))
        key = key.replace("-", "_")
        if key == "strategy":
            key = "strategies"
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _coerce(key, raw)
    return values


# ---------------------------------------------------------------------------
# execution

def _execute(job) -> tuple[str, int, dict]:
    cfg, kind, index = job
    run_cfg = cfg.run_config(kind, index)
    log = run(run_cfg)
    label = run_cfg.build_domain().label()
    path = cfg.out / f"{kind}_{label}_seed{run_cfg.params.seed}.csv"
    write_run_csv(path, log, thin=cfg.thin)
    return kind, index, log.final


def execute(cfg: ExperimentConfig) -> dict[str, list[dict]]:
    """Run every (strategy, seed) pair of ``cfg`` and write one CSV per run.

    Results come back keyed by strategy, ordered by run index, whatever order
    the workers finish in.
    """
    try:
        cfg.out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {cfg.out}: {exc}") from None
    jobs = [(cfg, kind, i) for kind, i in cfg.jobs()]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            done = list(pool.map(_execute, jobs))
    else:
        done = [_execute(j) for j in jobs]
    out: dict[str, list[dict]] = {kind: [None] * cfg.seeds for kind in cfg.strategies}
    for kind, index, final in done:
        out[kind][index] = final
    return out


def summarize(results: dict[str, list[dict]], columns=("best_fitness",)) -> str:
    header = ["strategy", *columns]
    rows = []
    for kind, finals in results.items():
        cells = [format_cell(*mean_stderr([f[c] for f in finals])) for c in columns]
        rows.append([DISPLAY_NAMES[kind], *cells])
    return format_table(header, rows)


def pvalue_table(results: dict[str, list[dict]], column: str = "best_fitness") -> str:
    """One-sided p-values that each reference strategy beats each other strategy."""
    refs = [r for r in ("bdma2", "bdma2a") if r in results]
    header = ["strategy", *(f"p({DISPLAY_NAMES[r]} >)" for r in refs)]
    rows = []
    for kind, finals in results.items():
        cells = []
        for ref in refs:
            if ref == kind:
                cells.append("-")
                continue
            a = [f[column] for f in results[ref]]
            b = [f[column] for f in finals]
            _, p = mann_whitney_u(a, b, alternative="greater")
            cells.append(f"{p:.4g}")
        rows.append([DISPLAY_NAMES[kind], *cells])
    return format_table(header, rows)


def _write_summary(path: Path, text: str) -> None:
    try:
        path.write_text(text + "\n", encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc}") from None


def cmd_run(cfg: ExperimentConfig) -> int:
    results = execute(cfg)
    domain = cfg.build_domain()
    columns = ("best_fitness", "total_bin_score", "current_bin_score") if domain.bins else ("best_fitness",)
    text = f"{domain.label()}  ({cfg.seeds} seeds, {cfg.iterations} iterations)\n" + summarize(results, columns)
    _write_summary(cfg.out / "summary.txt", text)
    print(text)
    return EXIT_OK


def suite_cells(name: str) -> list[tuple[str, dict]]:
    """(cell label, config overrides) pairs making up a named suite."""
    if name == "four_peaks":
        return [("four_peaks", {"domain": "four_peaks", "strategies": FOUR_PEAKS_STRATEGIES})]
    if name == "etf":
        return [(f"etf s={s:g}", {"domain": "etf", "s": s, "strategies": TABLE_STRATEGIES})
                for s in ETF_S_VALUES]
    if name == "ackley":
        return [(f"focused_ackley D={d}", {"domain": "focused_ackley", "D": d, "strategies": TABLE_STRATEGIES})
                for d in ACKLEY_D_VALUES]
    if name == "all":
        return [c for part in SUITES[:-1] for c in suite_cells(part)]
    raise ConfigError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")


def _table_layout(cells: list[tuple[str, dict[str, list[dict]]]]) -> str:
    """Strategies as rows and suite cells as columns, each entry ``mean (stderr)``."""
    kinds = list(dict.fromkeys(k for _, res in cells for k in res))
    header = ["strategy", *(label for label, _ in cells)]
    rows = []
    for kind in kinds:
        row = [DISPLAY_NAMES[kind]]
        for _, res in cells:
            finals = res.get(kind)
            row.append(format_cell(*mean_stderr([f["best_fitness"] for f in finals])) if finals else "-")
        rows.append(row)
    return format_table(header, rows)


def cmd_suite(name: str, base: ExperimentConfig) -> int:
    cells = suite_cells(name)
    finished = []
    sections = []
    for label, overrides in cells:
        sub = label.replace(" ", "_").replace("=", "")
        cfg = replace(base, **overrides, out=base.out / sub)
        res = execute(cfg)
        finished.append((label, res))
        block = [f"== {label}", "max fitness", summarize(res)]
        if cfg.build_domain().bins:
            block += ["bin scores", summarize(res, ("total_bin_score", "current_bin_score"))]
        block += ["one-sided Mann-Whitney U p-values", pvalue_table(res)]
        sections.append("\n".join(block))
    text = "\n\n".join([_table_layout(finished), *sections])
    _write_summary(base.out / f"summary_{name}.txt", text)
    print(text)
    return EXIT_OK


def cmd_spooky(k: int = 2) -> int:
    verdicts = spooky.evaluate(k=k)
    rows = []
    for v in verdicts:
        want = spooky.EXPECTED[v.population]
        rows.append([v.strategy, v.population, v.deleted, f"{v.gnp:g}", f"{v.gnt:g}",
                     f"{want[0]} {want[1]:g} {want[2]:g}", "ok" if v.ok else "MISMATCH"])
    print(format_table(["strategy", "population", "deleted", "GNP", "GNT", "expected", "status"], rows))
    return EXIT_OK if all(v.ok for v in verdicts) else EXIT_SPOOKY


# ---------------------------------------------------------------------------
# argument parsing

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="flat key = value file; flags override it")
    p.add_argument("--out", type=Path)
    p.add_argument("--seeds", type=int, help="number of seeded runs per cell")
    p.add_argument("--seed", type=int, help="base seed; run i uses seed + i")
    p.add_argument("--iterations", type=int)
    p.add_argument("--workers", type=int, help="process pool size")
    p.add_argument("--thin", type=int, help="write every n-th CSV row")
    p.add_argument("--toe-scale", dest="toe_scale", type=float)
    p.add_argument("--ackley-variant", dest="ackley_variant", choices=("standard", "inverted"))


class _Parser(argparse.ArgumentParser):
    # usage errors are configuration errors; status 2 is reserved for the spooky gate
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stepstones",
                                     description="Behavior domination and quality-diversity experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one domain with one or more strategies")
    _add_common(r)
    r.add_argument("--domain")
    r.add_argument("--strategy", dest="strategies", help="strategy name or comma-separated list")
    r.add_argument("--s", type=float, help="ETF behavior stretch")
    r.add_argument("--D", type=int, help="focused Ackley dimension")
    r.add_argument("--w", type=float, help="behavior distance weight (BDMA-2a: initial value)")
    r.add_argument("--k", type=int, help="novelty neighbors")
    r.add_argument("--p-add", dest="p_add", type=float)
    r.add_argument("--lsnf-p", dest="lsnf_p", type=float)
    r.add_argument("--sigma", type=float, help="mutation standard deviation")
    r.add_argument("--bin-width", dest="bin_width", type=float)
    r.add_argument("--dom-slots", dest="dom_slots", type=int)
    r.add_argument("--nov-slots", dest="nov_slots", type=int)
    r.add_argument("--population-size", dest="population_size", type=int)

    s = sub.add_parser("suite", help="run a predefined experiment matrix")
    s.add_argument("name", help="|".join(SUITES))
    _add_common(s)

    sp = sub.add_parser("spooky", help="check the spooky-action deletions")
    sp.add_argument("--k", type=int, default=2)
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    values = read_config_file(args.config) if getattr(args, "config", None) else {}
    for key in _FIELD_TYPES:
        v = getattr(args, key, None)
        if v is None:
            continue
        values[key] = _coerce(key, v) if key == "strategies" else v
    return ExperimentConfig(**values)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "spooky":
            return cmd_spooky(args.k)
        cfg = config_from_args(args)
        if args.command == "run":
            return cmd_run(cfg)
        return cmd_suite(args.name, cfg)
    except (ConfigError, OSError) as exc:
        print(f"stepstones: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
