"""CSV run logs and plain-text summary tables."""
from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable, Sequence

from .metrics import RunLog

CSV_HEADER = ("iteration", "best_fitness", "total_bin_score", "current_bin_score", "gnp", "gnt", "w")


def _fmt(v) -> str:
    if isinstance(v, int):
        return str(v)
    # repr gives the shortest string that parses back to the same double
    return repr(float(v))


def write_run_csv(path: Path | str, log: RunLog, thin: int = 1) -> Path:
    """Write one run's log; with ``thin > 1`` only every ``thin``-th iteration
    (plus the last) is written."""
    if thin < 1:
        raise ValueError("thin must be >= 1")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    last = log.rows[-1][0] if log.rows else None
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in log.rows:
            if row[0] % thin == 0 or row[0] == last:
                writer.writerow([_fmt(v) for v in row])
    return path


def read_run_csv(path: Path | str) -> list[tuple]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != CSV_HEADER:
            raise ValueError(f"unexpected header {header}")
        return [(int(r[0]),) + tuple(float(v) for v in r[1:]) for r in reader]


def format_cell(mean: float, stderr: float, digits: int = 2) -> str:
    if math.isnan(mean):
        return "-"
    return f"{mean:.{digits}f} ({stderr:.{digits}f})"


def format_table(header: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    rows = [list(map(str, r)) for r in rows]
    widths = [max(len(str(h)), *(len(r[i]) for r in rows)) if rows else len(str(h))
              for i, h in enumerate(header)]
    lines = ["  ".join(str(h).ljust(w) for h, w in zip(header, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for r in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)))
    return "\n".join(lines)
