"""Figure rendering for experiment reports.

Lives at the CLI reporting layer: the harness itself only emits delimited
data, and these helpers turn a finished report into the budget-sweep
picture next to it.
"""

from __future__ import annotations

from pathlib import Path

from .harness import ExperimentReport

__all__ = ["render_budget_sweep"]


def render_budget_sweep(report: ExperimentReport, path: str | Path) -> Path | None:
    """Plot final accuracy against the token budget, one line per
    (mode, max_tries) series. Exhaustive cells have no budget axis and are
    skipped. Returns None when the report has nothing to plot.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    series: dict[tuple[str, int], list[tuple[int, float]]] = {}
    for cell in report.cells:
        if cell.mode == "exhaustive":
            continue
        series.setdefault((cell.mode, cell.max_tries), []).append(
            (cell.max_tokens, cell.final_acc)
        )
    if not series:
        return None

    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for (mode, tries), points in sorted(series.items()):
        points.sort()
        ax.plot(
            [x for x, _ in points],
            [y for _, y in points],
            marker="o",
            label=f"{mode}, tries={tries}",
        )
    ax.set_xlabel("max tokens perturbed")
    ax.set_ylabel("final accuracy")
    ax.set_ylim(0.0, 1.0)
    ax.grid(True, alpha=0.4)
    ax.legend()
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
