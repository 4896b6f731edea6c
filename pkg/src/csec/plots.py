"""Render convergence figures next to the trace CSVs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

Y_LABELS = {
    "power_iteration": "normalized MSE to dominant eigenvector",
    "linreg": "normalized objective",
}


def render_convergence_figure(rows_by_scheme: dict, app: str, path: Path) -> Path:
    """Error metric vs cumulative simulated time, one line per scheme."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for name, rows in rows_by_scheme.items():
        if not rows:
            continue
        # last row of each iteration carries that iterate's error
        per_iter = {}
        for row in rows:
            per_iter[row.iteration] = (row.cum_time, row.error_metric)
        times, errors = zip(*(per_iter[k] for k in sorted(per_iter)))
        ax.plot(times, errors, marker="o", markersize=2.5, label=name)
    ax.set_xlabel("cumulative simulated time")
    ax.set_ylabel(Y_LABELS.get(app, "error metric"))
    ax.set_yscale("log")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def render_trace_files(csv_paths, app: str, path: Path) -> Path:
    """Same figure, but reading already-written trace CSVs."""
    import csv

    rows_by_scheme: dict = {}

    class _Row:
        __slots__ = ("iteration", "cum_time", "error_metric")

        def __init__(self, iteration, cum_time, error_metric):
            self.iteration = iteration
            self.cum_time = cum_time
            self.error_metric = error_metric

    for p in csv_paths:
        with open(p, newline="", encoding="utf-8") as fh:
            for rec in csv.DictReader(fh):
                rows_by_scheme.setdefault(rec["scheme"], []).append(_Row(
                    int(rec["iteration"]),
                    float(rec["cum_time"]),
                    float(rec["error_metric"]),
                ))
    return render_convergence_figure(rows_by_scheme, app, path)
