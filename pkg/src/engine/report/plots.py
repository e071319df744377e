"""
SVG line charts of report ratios against n and against the dipole width.
"""

import logging
import re
from pathlib import Path
from typing import Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

logger = logging.getLogger(__name__)

plt.rcParams["svg.hashsalt"] = "mazyalab"
plt.rcParams["svg.fonttype"] = "path"

DIPOLE_LABEL = re.compile(r"^dipole-w([0-9.eE+-]+)$")


def _save(fig, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    logger.info(f"Wrote {path}")
    return path


def _finish(ax, has_data: bool, xlabel: str) -> None:
    ax.set_xlabel(xlabel)
    ax.set_ylabel("ratio")
    if has_data:
        ax.set_yscale("log")
        ax.legend(fontsize="small")
    else:
        ax.text(0.5, 0.5, "no positive ratios", ha="center", va="center", transform=ax.transAxes)


def plot_ratio_vs_n(df: pd.DataFrame, path: Union[str, Path]) -> Path:
    """Largest ratio over the test family per statement and n."""
    rows = df[(df["n"] >= 0) & (df["ratio"] > 0) & np.isfinite(df["ratio"])]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for statement, group in rows.groupby("statement_id", sort=True):
        series = group.groupby("n")["ratio"].max().sort_index()
        ax.plot(series.index.to_numpy(), series.to_numpy(), marker="o", label=statement)
    _finish(ax, not rows.empty, "n")
    return _save(fig, path)


def plot_ratio_vs_width(df: pd.DataFrame, path: Union[str, Path]) -> Path:
    """Ratio of unscaled dipoles against their width, one line per statement and n."""
    widths = df["f_id"].astype(str).str.extract(DIPOLE_LABEL)[0]
    rows = df.assign(width=pd.to_numeric(widths, errors="coerce"))
    rows = rows[rows["width"].notna() & (rows["ratio"] > 0) & np.isfinite(rows["ratio"])]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for (statement, n), group in rows.groupby(["statement_id", "n"], sort=True):
        group = group.sort_values("width")
        label = statement if n < 0 else f"{statement} n={n}"
        ax.plot(group["width"].to_numpy(), group["ratio"].to_numpy(), marker="o", label=label)
    if not rows.empty:
        ax.set_xscale("log", base=2)
    _finish(ax, not rows.empty, "dipole width")
    return _save(fig, path)


def plot_reports(df: pd.DataFrame, directory: Union[str, Path]) -> list:
    directory = Path(directory)
    df = df.astype({"n": "int64", "ratio": "float64"})
    return [plot_ratio_vs_n(df, directory / "ratio_vs_n.svg"),
            plot_ratio_vs_width(df, directory / "ratio_vs_width.svg")]
