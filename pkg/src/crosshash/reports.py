"""Machine-readable CSV reports and the matplotlib figures rendered next to them.

CSV cells are written with shortest round-trip float repr so repeated runs
with the same seed produce byte-identical files.  Figures are rendered with
the Agg backend (no display needed); matplotlib is imported lazily so the
pure-library path never pays for it.
"""

from __future__ import annotations

import os
from typing import Iterable

from .retrieval import PRPoint
from .training import IterationStats


def _cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path, header: list[str], rows: Iterable[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_cell(v) for v in row) + "\n")


class TrainingLog:
    """Streaming per-iteration loss CSV; rows are flushed as they arrive so the
    log survives a mid-run divergence abort."""

    HEADER = ["iteration", "total", "likelihood", "quantization", "balance", "seconds"]

    def __init__(self, path):
        self._fh = open(path, "w", encoding="utf-8", newline="\n")
        self._fh.write(",".join(self.HEADER) + "\n")
        self._fh.flush()
        self.rows: list[IterationStats] = []

    def append(self, stats: IterationStats) -> None:
        self.rows.append(stats)
        self._fh.write(
            ",".join(
                [
                    str(stats.iteration),
                    repr(stats.total),
                    repr(stats.likelihood),
                    repr(stats.quantization),
                    repr(stats.balance),
                    repr(stats.seconds),
                ]
            )
            + "\n"
        )
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


def write_map_summary(
    path,
    task: str,
    code_length: int,
    map_value: float,
    queries_evaluated: int,
    queries_excluded: int,
) -> None:
    _write_csv(
        path,
        ["task", "code_length", "map", "queries_evaluated", "queries_excluded"],
        [[task, code_length, map_value, queries_evaluated, queries_excluded]],
    )


def write_pr_points(path, task: str, code_length: int, points: list[PRPoint]) -> None:
    _write_csv(
        path,
        ["task", "code_length", "radius", "precision", "recall", "f_measure"],
        [[task, code_length, p.radius, p.precision, p.recall, p.f_measure] for p in points],
    )


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_pr_curve(path, points: list[PRPoint], title: str) -> None:
    """Recall-vs-precision curve over the radius sweep, saved to ``path``."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot([p.recall for p in points], [p.precision for p in points], "o-", lw=1.5, ms=4)
    ax.set_xlabel("recall")
    ax.set_ylabel("precision")
    ax.set_xlim(-0.02, 1.02)
    ax.set_ylim(-0.02, 1.02)
    ax.grid(alpha=0.3)
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_training_log(path, rows: list[IterationStats], title: str) -> None:
    """Total loss and its three terms over the outer iterations."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    iters = [r.iteration for r in rows]
    ax.plot(iters, [r.total for r in rows], lw=2, label="total")
    ax.plot(iters, [r.likelihood for r in rows], lw=1, label="likelihood")
    ax.plot(iters, [r.quantization for r in rows], lw=1, label="quantization")
    ax.plot(iters, [r.balance for r in rows], lw=1, label="balance")
    ax.set_xlabel("outer iteration")
    ax.set_ylabel("loss")
    ax.grid(alpha=0.3)
    ax.legend()
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def default_figure_path(csv_path) -> str:
    root, _ = os.path.splitext(str(csv_path))
    return root + ".png"
