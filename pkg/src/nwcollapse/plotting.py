"""Optional figure rendering for CLI runs (``--figures``).

Figures are written to PNG files next to the CSV output with the
non-interactive Agg backend.  matplotlib is imported only when a figure is
requested, so the numerical commands never depend on it.
"""

from __future__ import annotations

import os

import numpy as np


def _pyplot():
    import matplotlib
    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt
    return plt


def _save(fig, out_dir, name):
    path = os.path.join(out_dir, name)
    fig.savefig(path, dpi=120, bbox_inches="tight", metadata={"Software": None})
    return path


def line_figure(out_dir, name, x, series, xlabel, ylabel, logx=False, logy=False,
                errors=None, title=None):
    """Plot one or more named series against ``x`` and save as PNG.

    Parameters
    ----------
    series : dict
        ``label -> y values``.
    errors : dict, optional
        ``label -> standard errors`` drawn as error bars.
    """
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, y in series.items():
        y = np.asarray(y, dtype=float)
        if errors and label in errors:
            ax.errorbar(x, y, yerr=errors[label], fmt="o", ms=3, capsize=2, label=label)
        else:
            ax.plot(x, y, label=label)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if len(series) > 1:
        ax.legend(fontsize="small")
    ax.grid(alpha=0.3)
    path = _save(fig, out_dir, name)
    plt.close(fig)
    return path


def heatmap_figure(out_dir, name, values, row_labels, col_labels, title):
    """Log10 heat map of a table."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 2 + 0.4 * len(row_labels)))
    data = np.log10(np.asarray(values, dtype=float))
    im = ax.imshow(data, aspect="auto", cmap="viridis")
    ax.set_xticks(range(len(col_labels)), [f"{c:g}" for c in col_labels])
    ax.set_yticks(range(len(row_labels)), [str(r) for r in row_labels])
    ax.set_xlabel("mu [keV]")
    ax.set_title(title)
    fig.colorbar(im, ax=ax, label="log10 value")
    path = _save(fig, out_dir, name)
    plt.close(fig)
    return path
