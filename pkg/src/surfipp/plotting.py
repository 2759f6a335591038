"""Rendering of comparison curves (mean with confidence band) to SVG files."""

import csv
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

_COLORS = {"ipp": "tab:blue", "coverage": "tab:orange", "random": "tab:green",
           "mgp": "tab:blue", "identity": "tab:orange", "random_spd": "tab:green"}


def read_band_csv(path):
    """Parse a band CSV (t, then <m>_mean/<m>_lo/<m>_hi per method)."""
    with open(path, "r", encoding="ascii") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], rows[1:]
    cols = {name: [float(r[i]) for r in data] for i, name in enumerate(header)}
    methods = sorted({name[:-5] for name in header if name.endswith("_mean")})
    return cols, methods


def plot_metric_bands(csv_path, svg_path, ylabel, title=None) -> None:
    """One SVG line chart: per-method mean curve with shaded 95% band."""
    cols, methods = read_band_csv(csv_path)
    t = cols["t"]
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    for m in methods:
        color = _COLORS.get(m)
        ax.plot(t, cols[f"{m}_mean"], label=m, color=color)
        ax.fill_between(t, cols[f"{m}_lo"], cols[f"{m}_hi"], alpha=0.2, color=color,
                        linewidth=0)
    ax.set_xlabel("time [s]")
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(svg_path, format="svg")
    plt.close(fig)


_METRIC_LABELS = {"trace": "covariance trace", "rmse": "RMSE"}


def render_results_dir(results_dir, out_dir=None) -> list:
    """Render an SVG per band CSV found in ``results_dir``; returns paths."""
    out_dir = out_dir or results_dir
    rendered = []
    for name in sorted(os.listdir(results_dir)):
        if not name.endswith(".csv"):
            continue
        stem = name[:-4]
        metric = stem.rsplit("_", 1)[-1]
        if metric not in _METRIC_LABELS:
            continue
        with open(os.path.join(results_dir, name), "r", encoding="ascii") as fh:
            header = fh.readline()
        if "_mean" not in header:
            continue
        svg = os.path.join(out_dir, f"{stem}.svg")
        plot_metric_bands(os.path.join(results_dir, name), svg,
                          _METRIC_LABELS[metric], stem.replace("_", " "))
        rendered.append(svg)
    return rendered
