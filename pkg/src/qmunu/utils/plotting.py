"""SVG figures for verification runs."""

from logging import getLogger
from pathlib import Path
from typing import Dict, Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib as mpl  # noqa: E402
import matplotlib.pyplot as plt  # noqa: E402

logger = getLogger(__name__)

# Fixed salt and no date keep repeated runs byte-identical
mpl.rcParams["svg.hashsalt"] = "qmunu"
mpl.rcParams["svg.fonttype"] = "none"
SVG_METADATA = {"Date": None}


def _new_axes(width: float = 6.0, height: Optional[float] = None):
    golden_ratio = 0.618
    fig, ax = plt.subplots(figsize=(width, height or width * golden_ratio))
    return fig, ax


def _save(fig, output_dir: str, filename: str) -> Path:
    output_path = Path(output_dir)
    output_path.mkdir(parents=True, exist_ok=True)
    file_path = output_path / f"{filename}.svg"
    fig.tight_layout()
    fig.savefig(file_path, format="svg", metadata=SVG_METADATA)
    plt.close(fig)
    logger.info(f"Wrote figure {file_path}")
    return file_path


def plot_series(
    output_dir: str,
    filename: str,
    x: Sequence[float],
    series: Dict[str, Sequence[float]],
    xlabel: str,
    ylabel: str,
    title: str = "",
    logy: bool = False,
) -> Path:
    """
    Line plot of one or more named series against a shared x axis.

    Returns:
        Path to the written SVG
    """
    fig, ax = _new_axes()
    for label in sorted(series):
        ax.plot(x, series[label], marker="o", markersize=3, label=label)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.legend(frameon=False)
    return _save(fig, output_dir, filename)


def plot_pmf_comparison(
    output_dir: str,
    filename: str,
    empirical: Sequence[float],
    reference: Sequence[float],
    xlabel: str = "s",
    title: str = "",
) -> Path:
    """Bars of an empirical pmf next to the reference pmf."""
    fig, ax = _new_axes()
    support = range(len(reference))
    ax.bar([s - 0.2 for s in support], list(empirical)[: len(reference)], width=0.4, label="empirical")
    ax.bar([s + 0.2 for s in support], reference, width=0.4, label="reference")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("probability")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False)
    return _save(fig, output_dir, filename)
