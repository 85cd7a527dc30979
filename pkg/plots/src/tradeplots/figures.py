"""The two figure types: regret curves with bands, log-log tails."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .io import ResultsTable


def plot_regret(tables: Sequence[ResultsTable], labels: Sequence[str],
                out_path: str | Path) -> Path:
    """One mean-regret curve per table with a shaded 95% CI band.

    Output format follows the extension of out_path.
    """
    if not tables:
        raise ValueError("need at least one results table")
    if len(tables) != len(labels):
        raise ValueError("one label per table required")
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for table, label in zip(tables, labels):
        ax.plot(table.t, table.mean_cum_regret, label=label)
        ax.fill_between(table.t,
                        table.mean_cum_regret - table.ci_halfwidth,
                        table.mean_cum_regret + table.ci_halfwidth,
                        alpha=0.25)
    ax.set_xlabel("round t")
    ax.set_ylabel("cumulative regret")
    ax.legend()
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path)
    plt.close(fig)
    return out_path


def reference_lines(table: ResultsTable, d: int, tail_len: int):
    """Log-log reference lines of slope (d-1)/d and 1 through the window start.

    Returns (log_t, log_regret, theory_line, linear_line); both lines are
    anchored at the first tail point so only slopes differ.
    """
    window = table.tail(tail_len)
    if np.any(window.mean_cum_regret <= 0):
        raise ValueError("nonpositive regret in tail window")
    log_t = np.log(window.t.astype(float))
    log_r = np.log(window.mean_cum_regret)
    theory = log_r[0] + ((d - 1) / d) * (log_t - log_t[0])
    linear = log_r[0] + 1.0 * (log_t - log_t[0])
    return log_t, log_r, theory, linear


def plot_loglog(table: ResultsTable, d: int, tail_len: int,
                out_path: str | Path) -> Path:
    """Scatter of log t vs log R_t on the tail with reference slopes."""
    log_t, log_r, theory, linear = reference_lines(table, d, tail_len)
    fig, ax = plt.subplots(figsize=(5.2, 4.2))
    ax.scatter(log_t, log_r, s=4, label="measured regret")
    ax.plot(log_t, theory, "--", color="tab:green",
            label=f"slope (d-1)/d = {(d - 1) / d:.3f}")
    ax.plot(log_t, linear, "--", color="tab:red", label="slope 1")
    ax.set_xlabel("log t")
    ax.set_ylabel("log cumulative regret")
    ax.legend()
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path)
    plt.close(fig)
    return out_path
