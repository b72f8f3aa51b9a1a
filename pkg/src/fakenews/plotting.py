"""Static SVG rendering of path and share CSVs."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["PlotSpec", "emit_plot", "CATEGORY_COLORS"]

CATEGORY_COLORS = {"cat1": "tab:blue", "cat2": "tab:orange", "cat3": "tab:green"}

_RC = {
    "svg.hashsalt": "fakenews",
    "svg.fonttype": "none",
    "font.size": 10,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


@dataclass
class PlotSpec:
    series: list[str]
    labels: list[str] | None = None
    release_times: list[float] = field(default_factory=list)
    title: str = ""
    ylabel: str = ""
    ylim: tuple[float, float] | None = None


def _read_columns(path: Path) -> dict[str, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise ValueError(f"{path}: empty CSV")
        rows = [[float(v) for v in row] for row in reader]
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return {name: data[:, i] for i, name in enumerate(header)}


def _color(name: str):
    for key, color in CATEGORY_COLORS.items():
        if name.endswith(key):
            return color
    return None


def emit_plot(csv_path, spec: PlotSpec, out_path) -> Path:
    """Render ``spec.series`` against the ``t`` column of ``csv_path`` as an SVG.

    Each series is tagged ``id="series-<column>"`` and each release marker
    ``id="release-<i>"`` in the SVG, so the output can be checked structurally.
    """
    if not spec.series:
        raise ValueError("plot needs at least one series")
    cols = _read_columns(Path(csv_path))
    missing = [c for c in ["t", *spec.series] if c not in cols]
    if missing:
        raise ValueError(f"{csv_path}: missing column(s) {', '.join(missing)}")
    labels = spec.labels or spec.series
    if len(labels) != len(spec.series):
        raise ValueError("one label per series required")

    out_path = Path(out_path)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6.4, 3.6))
        for name, label in zip(spec.series, labels):
            (line,) = ax.plot(cols["t"], cols[name], label=label, color=_color(name), lw=1.2)
            line.set_gid(f"series-{name}")
        for i, tau in enumerate(spec.release_times):
            ax.axvline(tau, color="0.6", lw=0.8, ls="--").set_gid(f"release-{i}")
        ax.set_xlabel("t")
        ax.set_ylabel(spec.ylabel)
        if spec.ylim:
            ax.set_ylim(*spec.ylim)
        if spec.title:
            ax.set_title(spec.title)
        ax.legend(frameon=False, fontsize=8)
        fig.tight_layout()
        fig.savefig(out_path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return out_path
