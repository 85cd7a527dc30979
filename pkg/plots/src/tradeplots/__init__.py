"""Figure rendering for tradelab results files.

Reads the experiment runner's CSV output and draws the two figure types:
mean-regret curves with confidence bands, and log-log tail plots with
theoretical reference slopes.  No statistics beyond log/CI-band arithmetic
happen here; every plotted value traces back to a file row.
"""

from .io import ResultsTable, parse_results, write_results
from .figures import plot_loglog, plot_regret

__all__ = ["ResultsTable", "parse_results", "write_results",
           "plot_loglog", "plot_regret"]
