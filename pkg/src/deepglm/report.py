"""Figure rendering to SVG files with numeric companion CSVs.

Every figure writer saves a self-contained SVG and, beside it, a CSV
carrying the exact numbers that were drawn, so downstream checks never
parse image files.  Paths are returned as (svg_path, csv_path).
"""

from __future__ import annotations

import csv
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

import numpy as np  # noqa: E402

_SAVE_KW = {"format": "svg", "metadata": {"Date": None}}


def _csv_path(path) -> str:
    base, _ = os.path.splitext(str(path))
    return base + ".csv"


def _write_rows(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def figure_histogram(values, path, bins: int = 50, title: str = "",
                     xlabel: str = ""):
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise ValueError("histogram needs nonempty data")
    counts, edges = np.histogram(values, bins=bins)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.bar(edges[:-1], counts, width=np.diff(edges), align="edge",
           color="#4878a8", edgecolor="white", linewidth=0.3)
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("count")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    csv_path = _csv_path(path)
    _write_rows(csv_path, ["bin_left", "bin_right", "count"],
                [(repr(float(edges[i])), repr(float(edges[i + 1])), int(c))
                 for i, c in enumerate(counts)])
    return str(path), csv_path


def figure_scatter(x, y, path, labels=None, title: str = "",
                   xlabel: str = "", ylabel: str = ""):
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.size == 0 or x.size != y.size:
        raise ValueError("scatter needs matching nonempty x and y")
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    if labels is None:
        ax.scatter(x, y, s=6, color="#4878a8", alpha=0.6, linewidths=0)
    else:
        labels = np.asarray(labels)
        for value, color in zip(np.unique(labels), ("#4878a8", "#c44e52",
                                                    "#55a868", "#8172b2")):
            keep = labels == value
            ax.scatter(x[keep], y[keep], s=6, alpha=0.7, linewidths=0,
                       color=color, label=str(value))
        ax.legend(frameon=False, fontsize=8)
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    csv_path = _csv_path(path)
    if labels is None:
        _write_rows(csv_path, ["x", "y"],
                    [(repr(float(a)), repr(float(b))) for a, b in zip(x, y)])
    else:
        _write_rows(csv_path, ["x", "y", "label"],
                    [(repr(float(a)), repr(float(b)), str(l))
                     for a, b, l in zip(x, y, labels)])
    return str(path), csv_path


def figure_raster(codes, path, extent=(-5.0, 5.0, -5.0, 5.0), title: str = ""):
    """Region raster: integer code per grid cell, CSV of the code matrix."""
    codes = np.asarray(codes)
    if codes.size == 0:
        raise ValueError("raster needs nonempty data")
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    ax.imshow(codes.T, origin="lower", extent=extent, cmap="tab20",
              interpolation="nearest", aspect="auto")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    csv_path = _csv_path(path)
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        for row in codes:
            writer.writerow([int(v) for v in row])
    return str(path), csv_path


def figure_trace(series: dict, path, title: str = "", xlabel: str = "step",
                 ylabel: str = "value", logy: bool = False):
    """Line chart of one or more named series over a shared step axis."""
    if not series or all(len(v) == 0 for v in series.values()):
        raise ValueError("trace needs nonempty data")
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    for name, values in series.items():
        values = np.asarray(values, dtype=np.float64)
        ax.plot(np.arange(1, len(values) + 1), values, label=str(name),
                linewidth=1.2)
    if logy:
        ax.set_yscale("log")
    if len(series) > 1:
        ax.legend(frameon=False, fontsize=8)
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    csv_path = _csv_path(path)
    names = list(series)
    longest = max(len(v) for v in series.values())
    rows = []
    for i in range(longest):
        row = [i + 1]
        for name in names:
            vals = series[name]
            row.append(repr(float(vals[i])) if i < len(vals) else "")
        rows.append(row)
    _write_rows(csv_path, ["step"] + names, rows)
    return str(path), csv_path


def emit_figure(kind: str, data: dict, path):
    """Dispatch on kind in {histogram, scatter, raster, trace}.

    data carries the keyword arguments of the matching figure_* function;
    empty data is refused so callers surface a config error.
    """
    writers = {"histogram": figure_histogram, "scatter": figure_scatter,
               "raster": figure_raster, "trace": figure_trace}
    if kind not in writers:
        raise ValueError(f"unknown figure kind: {kind!r}")
    return writers[kind](path=path, **data)
