"""Deterministic, self-contained SVG figures of recorded observables."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .. import stats

MAX_PATHS_DRAWN = 10

LABELS = {"H": "<H>_t", "N": "<N>_t", "Va": "V^a_t", "P0": "P_0,t"}


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    matplotlib.rcParams.update({"svg.hashsalt": "coherent-collapse",
                                "svg.fonttype": "none", "path.simplify": False})
    return plt


def observable_figure(path: Path, times: np.ndarray, values: np.ndarray,
                      title: str, ylabel: str) -> Path:
    """Sample paths (up to ten) plus the ensemble mean with a 1 SE band."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for row in values[:MAX_PATHS_DRAWN]:
        ax.plot(times, row, lw=0.8, alpha=0.7)
    if len(values) > 1:
        mean, se = stats.mean_and_se(values)
        ax.plot(times, mean, color="black", lw=1.6, label=f"mean of {len(values)}")
        ax.fill_between(times, mean - se, mean + se, color="black", alpha=0.15, lw=0)
        ax.legend(loc="best", frameon=False)
    ax.set_xlabel("t")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def write_observable_figures(result, out: Path) -> list[Path]:
    written = []
    name = result.summary.name
    for obs in result.columns:
        vals = stats.stack_series(result.records, obs)
        if np.iscomplexobj(vals):
            vals = np.abs(vals)
            label = f"|{obs}|"
        else:
            label = LABELS.get(obs, obs)
        written.append(observable_figure(out / f"{obs}.svg", result.records[0].times,
                                         vals, f"{name}: {label}", label))
    return written
