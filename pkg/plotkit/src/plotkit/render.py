"""Figure building for the three nearsplit output families.

Kinds: ``nmse`` (log-scale NMSE curves, one line per estimator), ``gainmap``
(Cartesian gain heatmaps with a square at the user location and triangles at
the per-layer focus peaks) and ``fl`` (training trace plus communication-
ratio bars). All validation happens before a figure is created, so a failing
spec never leaves a partial image behind; markers and peaks are read from
the CSVs, never recomputed.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import matplotlib

# Batch renderer: never require a display.
matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.figure import Figure

from .schema import Table, read_table

KINDS = ("nmse", "gainmap", "fl")

# Primary input schema required by each figure kind.
KIND_SCHEMA = {"nmse": "nmse-v1", "gainmap": "gainmap-v1", "fl": "fl-v1"}

# Axis captions keyed by the sweep token in nmse tables.
_SWEEP_LABELS = {
    "snr": "SNR (dB)",
    "bandwidth": "bandwidth (Hz)",
    "none": "operating point",
}


@dataclass(frozen=True)
class PlotSpec:
    """One figure request: input table, figure kind and output image path."""

    input_csv: str
    kind: str
    output_path: str
    x_label: str | None = None
    y_label: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not self.input_csv:
            raise ValueError("input_csv must be a non-empty path")
        if not self.output_path:
            raise ValueError("output_path must be a non-empty path")


def markers_path_for(map_path: str) -> str:
    """Sibling marker table of a gain-map raster: `<stem>_markers<ext>`."""
    stem, ext = os.path.splitext(map_path)
    return f"{stem}_markers{ext}"


def overhead_path_for(trace_path: str) -> str:
    """Sibling overhead table of a training trace: `.._trace` -> `.._overhead`."""
    stem, ext = os.path.splitext(trace_path)
    if stem.endswith("_trace"):
        stem = stem[: -len("_trace")]
        return f"{stem}_overhead{ext}"
    return f"{stem}_overhead{ext}"


def render(spec: PlotSpec) -> str:
    """Build the figure for `spec` and write it to `spec.output_path`."""
    figure = build_figure(spec)
    try:
        figure.savefig(spec.output_path, dpi=150, bbox_inches="tight")
    finally:
        plt.close(figure)
    return spec.output_path


def build_figure(spec: PlotSpec) -> Figure:
    """Validate the input tables and return the assembled matplotlib figure."""
    table = read_table(spec.input_csv, KIND_SCHEMA[spec.kind])
    if spec.kind == "nmse":
        return _figure_nmse(table, spec)
    if spec.kind == "gainmap":
        markers = read_table(markers_path_for(spec.input_csv), "gainmap-markers-v1")
        if markers.header.config_hash != table.header.config_hash:
            raise ValueError(
                "marker table config hash "
                f"{markers.header.config_hash} does not match raster "
                f"{table.header.config_hash}"
            )
        return _figure_gainmap(table, markers, spec)
    overhead = None
    overhead_path = overhead_path_for(spec.input_csv)
    if os.path.exists(overhead_path):
        overhead = read_table(overhead_path, "overhead-v1")
    return _figure_fl(table, overhead, spec)


def _figure_nmse(table: Table, spec: PlotSpec) -> Figure:
    """Log-scale mean-NMSE curves, one line per estimator."""
    series: dict[str, list[tuple[float, float]]] = {}
    sweeps = set()
    for row in table.rows:
        name = row["estimator"]
        if not name:
            raise ValueError(f"{spec.input_csv}: empty estimator column")
        sweeps.add(row["sweep"])
        series.setdefault(name, []).append(
            (float(row["axis_value"]), float(row["mean_nmse"]))
        )
    if len(sweeps) != 1:
        raise ValueError(f"{spec.input_csv}: mixed sweep kinds {sorted(sweeps)}")
    sweep = sweeps.pop()

    figure, axes = plt.subplots(figsize=(6.0, 4.2))
    for name, points in series.items():
        points.sort(key=lambda p: p[0])
        xs = [p[0] for p in points]
        ys = [p[1] for p in points]
        axes.plot(xs, ys, marker="o", label=name)
    axes.set_yscale("log")
    axes.set_xlabel(spec.x_label or _SWEEP_LABELS.get(sweep, sweep))
    axes.set_ylabel(spec.y_label or "NMSE")
    axes.grid(True, which="both", alpha=0.3)
    axes.legend()
    figure.tight_layout()
    return figure


def _layer_arrays(table: Table) -> tuple[np.ndarray, np.ndarray, dict[int, np.ndarray]]:
    """Reassemble the raster rows into per-layer 2-D gain arrays."""
    xs = np.unique(np.asarray([float(r["x_m"]) for r in table.rows]))
    ys = np.unique(np.asarray([float(r["y_m"]) for r in table.rows]))
    layers: dict[int, np.ndarray] = {}
    for row in table.rows:
        m = int(row["m"])
        if m not in layers:
            layers[m] = np.full((xs.size, ys.size), np.nan)
        ix = int(np.searchsorted(xs, float(row["x_m"])))
        iy = int(np.searchsorted(ys, float(row["y_m"])))
        layers[m][ix, iy] = float(row["gain"])
    return xs, ys, layers


def _figure_gainmap(table: Table, markers: Table, spec: PlotSpec) -> Figure:
    """Heatmap per layer; user square and peak triangles from the marker table.

    Each layer panel carries its own peak triangle; the composite layer
    (m = -1, drawn last) additionally overlays every per-subcarrier peak so
    the split is visible on one map.
    """
    xs, ys, layers = _layer_arrays(table)
    order = list(dict.fromkeys(int(r["m"]) for r in table.rows))
    user_rows = [r for r in markers.rows if r["kind"] == "user"]
    peak_rows = [r for r in markers.rows if r["kind"] == "peak"]
    if len(user_rows) != 1:
        raise ValueError("marker table must carry exactly one user row")

    finite = np.concatenate([g[np.isfinite(g)].ravel() for g in layers.values()])
    if finite.size == 0:
        raise ValueError(f"{spec.input_csv}: no finite gain cells")
    vmin, vmax = float(finite.min()), float(finite.max())

    figure, axes_row = plt.subplots(
        1, len(order), figsize=(4.0 * len(order), 3.6), squeeze=False
    )
    mesh = None
    for axes, m in zip(axes_row[0], order):
        mesh = axes.pcolormesh(
            xs, ys, layers[m].T, shading="nearest", vmin=vmin, vmax=vmax
        )
        user = user_rows[0]
        axes.plot(
            float(user["x_m"]), float(user["y_m"]),
            marker="s", color="white", markeredgecolor="black",
            markersize=8, linestyle="none",
        )
        shown = [r for r in peak_rows if int(r["m"]) == m or m == -1]
        for peak in shown:
            axes.plot(
                float(peak["x_m"]), float(peak["y_m"]),
                marker="^", color="red", markeredgecolor="black",
                markersize=7, linestyle="none",
            )
        axes.set_title("composite" if m == -1 else f"subcarrier {m}")
        axes.set_xlabel(spec.x_label or "x (m)")
        axes.set_ylabel(spec.y_label or "y (m)")
        axes.set_aspect("equal")
    figure.colorbar(mesh, ax=list(axes_row[0]), label="array gain", shrink=0.85)
    return figure


def _figure_fl(table: Table, overhead: Table | None, spec: PlotSpec) -> Figure:
    """Training trace panel plus, when the sibling table exists, ratio bars."""
    rounds = [int(r["round"]) for r in table.rows]
    loss = [float(r["train_loss"]) for r in table.rows]
    eval_nmse = [float(r["eval_nmse"]) for r in table.rows]

    n_panels = 2 if overhead is not None else 1
    figure, axes_row = plt.subplots(
        1, n_panels, figsize=(5.2 * n_panels, 4.0), squeeze=False
    )
    axes = axes_row[0][0]
    axes.plot(rounds, loss, label="train loss")
    axes.plot(rounds, eval_nmse, label="eval NMSE")
    axes.set_yscale("log")
    axes.set_xlabel(spec.x_label or "round")
    axes.set_ylabel(spec.y_label or "value")
    axes.grid(True, which="both", alpha=0.3)
    axes.legend()

    if overhead is not None:
        bars = axes_row[0][1]
        labels = [f"{r['source']}\nxi={r['xi']}" for r in overhead.rows]
        ratios = [float(r["ratio"]) for r in overhead.rows]
        bars.bar(range(len(ratios)), ratios)
        bars.set_xticks(range(len(ratios)), labels)
        bars.set_yscale("log")
        bars.set_ylabel("centralized / federated symbols")
        bars.grid(True, axis="y", which="both", alpha=0.3)
    figure.tight_layout()
    return figure
