"""The four figure types over analysis-bundle CSVs.

Each renderer takes a validated Table and returns a matplotlib Figure; no
renderer computes anything beyond axis scaling. render() is the one entry
point: it validates, draws, saves the image, and in dump-back mode re-emits
the exact plotted table next to it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
# SVG element ids default to object identity; a fixed salt keeps the byte
# output a pure function of the inputs
matplotlib.rcParams["svg.hashsalt"] = "figkit"

import matplotlib.pyplot as plt
import numpy as np

from .tables import FigureInputError, Table, read_table

FIGURE_IDS = ("importance_scatter", "acquisition_sweep", "mi_strip",
              "rsa_heatmap")


@dataclass(frozen=True)
class FigureSpec:
    figure_id: str
    inputs: tuple[str, ...]
    output: str
    style: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.figure_id not in FIGURE_IDS:
            raise FigureInputError(
                f"unknown figure_id {self.figure_id!r} "
                f"(expected one of {', '.join(FIGURE_IDS)})")
        if len(self.inputs) != 1:
            raise FigureInputError(
                f"{self.figure_id} takes exactly one input CSV, "
                f"got {len(self.inputs)}")

    @classmethod
    def from_dict(cls, d: dict) -> "FigureSpec":
        unknown = set(d) - {"figure_id", "inputs", "output", "style"}
        if unknown:
            raise FigureInputError(f"unknown spec fields: {sorted(unknown)}")
        try:
            inputs = d["inputs"]
            if isinstance(inputs, str):
                inputs = [inputs]
            return cls(figure_id=d["figure_id"], inputs=tuple(inputs),
                       output=d["output"], style=dict(d.get("style", {})))
        except KeyError as e:
            raise FigureInputError(f"spec is missing field {e.args[0]!r}") from None


def _new_figure(style: dict):
    width = float(style.get("width", 6.0))
    height = float(style.get("height", 4.5))
    return plt.subplots(figsize=(width, height))


def importance_scatter(table: Table, style: dict):
    """h_i(t) against per-unit importance, one color per task; axes in [0, 1]."""
    tasks = table.strings("task")
    x = table.floats("h_value")
    y = table.floats("importance")
    fig, ax = _new_figure(style)
    order = list(dict.fromkeys(tasks))
    cmap = plt.get_cmap("tab20")
    for k, name in enumerate(order):
        sel = np.array([t == name for t in tasks])
        ax.scatter(x[sel], y[sel], s=18, color=cmap(k % 20), label=name)
    ax.set_xlim(0.0, 1.0)
    ax.set_ylim(0.0, 1.0)
    ax.set_xlabel("h_value")
    ax.set_ylabel("importance")
    if len(order) <= 12:
        ax.legend(fontsize="x-small", ncols=2)
    return fig


def acquisition_sweep(table: Table, style: dict):
    """Rank correlation against acquisition threshold, one line per measure."""
    measures = table.strings("measure")
    x = table.floats("threshold")
    y = table.floats("spearman")
    fig, ax = _new_figure(style)
    for name in dict.fromkeys(measures):
        sel = np.array([m == name for m in measures])
        ax.plot(x[sel], y[sel], marker="o", markersize=3, label=name)
    ax.set_ylim(-1.0, 1.0)
    ax.axhline(0.0, color="0.8", lw=0.8, zorder=0)
    ax.set_xlabel("threshold")
    ax.set_ylabel("spearman")
    ax.legend(fontsize="x-small")
    return fig


def mi_strip(table: Table, style: dict):
    """Normalized information per scope; the full-mask bar stands apart."""
    scopes = table.strings("scope")
    values = table.floats("In")
    fig, ax = _new_figure(style)
    pos = np.arange(len(scopes))
    colors = ["#b2432f" if s == "full" else "#4878a8" for s in scopes]
    ax.bar(pos, values, color=colors)
    ax.set_xticks(pos, scopes, rotation=90, fontsize="x-small")
    ax.set_ylim(0.0, 1.0)
    ax.set_xlabel("scope")
    ax.set_ylabel("In")
    return fig


def rsa_heatmap(table: Table, style: dict):
    """Symmetric metric-by-metric correlation heatmap with a unit diagonal."""
    labels, values = table.matrix()
    fig, ax = _new_figure(style)
    im = ax.imshow(values, vmin=0.0, vmax=1.0, cmap="viridis")
    ax.set_xticks(range(len(labels)), labels, rotation=45,
                  ha="right", fontsize="x-small")
    ax.set_yticks(range(len(labels)), labels, fontsize="x-small")
    for i in range(len(labels)):
        for j in range(len(labels)):
            ax.text(j, i, f"{values[i, j]:.2f}", ha="center", va="center",
                    fontsize="x-small",
                    color="white" if values[i, j] < 0.6 else "black")
    fig.colorbar(im, ax=ax, shrink=0.85)
    return fig


_REQUIRED = {
    "importance_scatter": ("task", "unit", "h_value", "importance"),
    "acquisition_sweep": ("threshold", "measure", "spearman"),
    "mi_strip": ("scope", "In"),
    "rsa_heatmap": (),  # validated structurally by Table.matrix
}

_RENDERERS = {
    "importance_scatter": importance_scatter,
    "acquisition_sweep": acquisition_sweep,
    "mi_strip": mi_strip,
    "rsa_heatmap": rsa_heatmap,
}


def dump_back_path(output: Path | str) -> Path:
    output = Path(output)
    return output.with_name(output.stem + ".data.csv")


def render(spec: FigureSpec, dump_back: bool = False) -> Path:
    """Validate inputs, draw, save; returns the image path.

    All validation happens before the figure is written, so a malformed or
    empty CSV never leaves an image behind. The saved image is a pure
    function of the inputs and style (SVG date metadata is suppressed).
    """
    table = read_table(spec.inputs[0], required=_REQUIRED[spec.figure_id])
    if spec.figure_id == "rsa_heatmap":
        table.matrix()  # structural check up front
    fig = _RENDERERS[spec.figure_id](table, spec.style)
    if "title" in spec.style:
        fig.axes[0].set_title(str(spec.style["title"]))
    out = Path(spec.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    metadata = {"Date": None} if out.suffix == ".svg" else None
    fig.savefig(out, dpi=int(spec.style.get("dpi", 150)),
                bbox_inches="tight", metadata=metadata)
    plt.close(fig)
    if dump_back:
        table.write(dump_back_path(out))
    return out
