"""Results-file schema: parse and re-serialise exactly.

Format: header ``t,mean_cum_regret,ci_halfwidth,n_reps``, one comma-separated
row per checkpoint, decimal points, LF endings, UTF-8.  Floats are written
with repr so that write(parse(file)) reproduces the input byte for byte
(modulo trailing whitespace).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

HEADER = "t,mean_cum_regret,ci_halfwidth,n_reps"


class SchemaError(ValueError):
    """Raised with file and line context on malformed input."""

    def __init__(self, path, lineno: int, msg: str):
        super().__init__(f"{path}:{lineno}: {msg}")
        self.path = path
        self.lineno = lineno


@dataclass(frozen=True)
class ResultsTable:
    """Parsed results rows: checkpoints, mean curve, CI half-widths."""

    t: np.ndarray
    mean_cum_regret: np.ndarray
    ci_halfwidth: np.ndarray
    n_reps: np.ndarray

    def __post_init__(self) -> None:
        if len(self.t) == 0:
            raise ValueError("results table is empty")
        if np.any(np.diff(self.t) <= 0):
            raise ValueError("round indices must be strictly increasing")
        if np.any(self.mean_cum_regret < 0):
            raise ValueError("mean regret must be nonnegative")

    def __len__(self) -> int:
        return len(self.t)

    def tail(self, tail_len: int) -> "ResultsTable":
        """Rows with t in the closing window of length tail_len."""
        cut = self.t[-1] - tail_len
        keep = self.t > cut
        return ResultsTable(self.t[keep], self.mean_cum_regret[keep],
                            self.ci_halfwidth[keep], self.n_reps[keep])


def parse_results(path: str | Path) -> ResultsTable:
    """Read one results file, reporting violations with line numbers."""
    path = Path(path)
    ts: list[int] = []
    means: list[float] = []
    cis: list[float] = []
    reps: list[int] = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").rstrip()
        if header != HEADER:
            raise SchemaError(path, 1, f"expected header {HEADER!r}, got {header!r}")
        for lineno, line in enumerate(fh, start=2):
            row = line.rstrip("\n").rstrip()
            if not row:
                continue
            parts = row.split(",")
            if len(parts) != 4:
                raise SchemaError(path, lineno, f"expected 4 columns, got {len(parts)}")
            try:
                t = int(parts[0])
                mean = float(parts[1])
                ci = float(parts[2])
                n = int(parts[3])
            except ValueError as exc:
                raise SchemaError(path, lineno, str(exc)) from None
            if ts and t <= ts[-1]:
                raise SchemaError(path, lineno, f"round index {t} does not increase")
            if mean < 0:
                raise SchemaError(path, lineno, f"negative mean regret {mean}")
            ts.append(t)
            means.append(mean)
            cis.append(ci)
            reps.append(n)
    if not ts:
        raise SchemaError(path, 1, "no data rows")
    return ResultsTable(np.array(ts), np.array(means), np.array(cis), np.array(reps))


def write_results(table: ResultsTable, path: str | Path) -> Path:
    """Serialise a table back to the exact file format."""
    path = Path(path)
    lines = [HEADER]
    for t, m, c, n in zip(table.t, table.mean_cum_regret, table.ci_halfwidth,
                          table.n_reps):
        lines.append(f"{int(t)},{float(m)!r},{float(c)!r},{int(n)}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return path
