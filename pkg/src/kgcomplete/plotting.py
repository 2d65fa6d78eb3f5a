"""Figures for loop reports and vanilla/loop comparisons, written straight to file."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

GOLDEN = (5**0.5 - 1.0) / 2.0

STYLE = {
    "font.size": 10,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.frameon": False,
    "savefig.dpi": 120,
    "savefig.bbox": "tight",
    # fixed metadata so reruns write identical files
    "svg.hashsalt": "kgcomplete",
}


def new_figure(width: float = 6.0, height: float | None = None, ncols: int = 1):
    height = height or width * GOLDEN / max(1, ncols) * 1.4
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, ncols, figsize=(width, height))
    return fig, axes


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with plt.rc_context(STYLE):
        fig.savefig(path, metadata={"Software": None} if path.suffix == ".png" else None)
    plt.close(fig)
    return path


def plot_loop_report(report, path: str | Path) -> Path:
    """KG size per iteration (left) and per-iteration additions by source (right)."""
    fig, (ax_size, ax_add) = new_figure(9.0, ncols=2)
    its = list(range(len(report.sizes)))
    ax_size.plot(its, report.sizes, marker="o", color="C0")
    ax_size.set_xlabel("iteration")
    ax_size.set_ylabel("triples")
    ax_size.set_title("graph size")
    ax_size.set_xticks(its)

    x = [it.iteration for it in report.iterations]
    acc = [it.accepted for it in report.iterations]
    inf = [it.inferred for it in report.iterations]
    ax_add.bar(x, acc, color="C1", label="accepted (KGE)")
    ax_add.bar(x, inf, bottom=acc, color="C2", label="inferred (rules)")
    ax_add.set_xlabel("iteration")
    ax_add.set_ylabel("new triples")
    ax_add.set_title(f"additions ({report.termination})")
    if x:
        ax_add.set_xticks(x)
    ax_add.legend()
    fig.tight_layout()
    return _save(fig, path)


def plot_comparison(comparison: dict, path: str | Path, labels=("vanilla", "star")) -> Path:
    """Grouped bars of each metric for the two pipelines."""
    fig, ax = new_figure(6.0)
    names = list(comparison)
    xs = range(len(names))
    w = 0.38
    a = [comparison[n]["vanilla"] for n in names]
    b = [comparison[n]["star"] for n in names]
    ax.bar([x - w / 2 for x in xs], a, w, label=labels[0], color="0.6")
    ax.bar([x + w / 2 for x in xs], b, w, label=labels[1], color="C0")
    ax.set_xticks(list(xs))
    ax.set_xticklabels([n.upper() if n == "mrr" else n.capitalize() for n in names])
    ax.set_ylim(0, 1)
    ax.set_ylabel("score")
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def plot_metrics(rows: list, path: str | Path) -> Path:
    """Bars of MRR and Hits@k for one or more ``(name, EvalResult)`` rows."""
    comp_metrics = ("mrr", "hits@1", "hits@3", "hits@10")
    fig, ax = new_figure(6.0)
    w = 0.8 / max(1, len(rows))
    for i, (name, res) in enumerate(rows):
        vals = [res.metric(m) for m in comp_metrics]
        ax.bar([x + (i - (len(rows) - 1) / 2) * w for x in range(4)], vals, w, label=name, color=f"C{i}")
    ax.set_xticks(range(4))
    ax.set_xticklabels(["MRR", "Hits@1", "Hits@3", "Hits@10"])
    ax.set_ylim(0, 1)
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)
