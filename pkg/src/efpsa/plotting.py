"""Figure rendering for the command-line report paths.

Each report subcommand writes a PNG next to its delimited output.  Rendering
is deterministic: the Agg backend, a fixed style, and stripped PNG metadata
keep reruns byte-identical.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

_SAVEFIG_KW = {"dpi": 120, "metadata": {"Software": None}}


def _save(fig, path) -> str:
    path = Path(path)
    fig.savefig(path, **_SAVEFIG_KW)
    plt.close(fig)
    return path.name


def line_figure(
    path,
    series,
    *,
    xlabel: str,
    ylabel: str,
    title: str,
    logx: bool = False,
    logy: bool = False,
) -> str:
    """Render labelled (x, y) series to one axes.

    ``series`` is a list of (label, x, y) triples.  Returns the file name.
    """
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for label, x, y in series:
        ax.plot(x, y, label=label)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    if len(series) > 1:
        ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)
