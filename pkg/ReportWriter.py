"""
Output artifacts: trajectory CSV, flow plot (SVG) and the JSON run report.

All writers are deterministic for identical input so repeated runs produce
byte-identical files.
"""
from __future__ import annotations

import csv
import json
import logging
import sys
from pathlib import Path
from typing import Dict, List, Mapping, Optional, TextIO, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from RicciFlow import FlowTrajectory  # noqa: E402

logger = logging.getLogger(__name__)

# Fixed salt so SVG element ids do not change between runs
SVG_HASH_SALT = "ricci-uniform"


def trajectory_header(edge_count: int) -> List[str]:
    return (
        ["t"]
        + [f"omega_{i}" for i in range(edge_count)]
        + [f"kappa_{i}" for i in range(edge_count)]
        + ["lyapunov"]
    )


def write_trajectory_csv(traj: FlowTrajectory, destination: Union[str, Path, TextIO]) -> None:
    """One row per sample: t, weights, curvatures and the Lyapunov value, in edge order."""
    def emit(handle: TextIO) -> None:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(trajectory_header(traj.graph.edge_count))
        for sample in traj.samples:
            writer.writerow(
                [repr(float(sample.t))]
                + [repr(float(w)) for w in sample.weights]
                + [repr(float(k)) for k in sample.kappa.values]
                + [repr(float(sample.lyapunov))]
            )

    if isinstance(destination, (str, Path)):
        with open(destination, "w", newline="", encoding="utf-8") as csvfile:
            emit(csvfile)
        logger.info("Trajectory saved to %s (%d rows)", destination, len(traj.samples))
    else:
        emit(destination)


def plot_trajectory(
    traj: FlowTrajectory,
    destination: Union[str, Path],
    kappa_bar: Optional[float] = None,
    edge_classes: Optional[Mapping[str, List[int]]] = None,
    title: Optional[str] = None,
) -> None:
    """
    Two panels: weight curves and curvature curves against t, with a dashed
    line at kappa_bar when given. Edges in the same class share a colour.
    """
    plt.rcParams["svg.hashsalt"] = SVG_HASH_SALT
    times = traj.times
    weights = traj.weight_matrix()
    kappas = traj.curvature_matrix()
    edge_count = traj.graph.edge_count

    colour_of: Dict[int, object] = {}
    label_of: Dict[int, str] = {}
    palette = plt.cm.tab10(np.linspace(0, 1, 10))
    if edge_classes:
        for position, (name, indices) in enumerate(edge_classes.items()):
            for i in indices:
                colour_of[i] = palette[position % 10]
                if indices and i == indices[0]:
                    label_of[i] = name
    else:
        for i in range(edge_count):
            colour_of[i] = palette[i % 10]
            label_of[i] = traj.graph.edge_label(i)

    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(10, 9))

    for i in range(edge_count):
        ax1.plot(times, weights[:, i], "-", color=colour_of.get(i, "k"), linewidth=1.2, label=label_of.get(i))
    ax1.set_xlabel("t")
    ax1.set_ylabel("Edge weight")
    ax1.set_title(title or "Edge Weight Evolution")
    ax1.grid(True, alpha=0.3)
    if edge_classes or edge_count <= 15:
        ax1.legend(fontsize=8)

    for i in range(edge_count):
        ax2.plot(times, kappas[:, i], "-", color=colour_of.get(i, "k"), linewidth=1.2)
    if kappa_bar is not None:
        ax2.axhline(y=kappa_bar, color="k", linestyle="--", linewidth=1.0, label=f"kappa_bar = {kappa_bar:.4g}")
        ax2.legend(fontsize=8)
    ax2.set_xlabel("t")
    ax2.set_ylabel("Curvature")
    ax2.set_title("Curvature Convergence")
    ax2.grid(True, alpha=0.3)

    plt.tight_layout()
    plt.savefig(destination, format="svg", metadata={"Date": None})
    plt.close(fig)
    logger.info("Plot saved to %s", destination)


def _json_default(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    return str(value)


def render_report(report: Mapping[str, object]) -> str:
    return json.dumps(_finite(report), indent=2, default=_json_default, allow_nan=False) + "\n"


def write_report(report: Mapping[str, object], destination: Optional[Union[str, Path]] = None) -> None:
    """JSON report to a file, or stdout when no destination is given."""
    text = render_report(report)
    if destination is None:
        sys.stdout.write(text)
        return
    Path(destination).write_text(text, encoding="utf-8")
    logger.info("Report saved to %s", destination)


def _finite(value):
    """Replace non-finite floats (infinite girth) with strings so the JSON stays strict."""
    if isinstance(value, Mapping):
        return {key: _finite(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite(item) for item in value]
    if isinstance(value, (float, np.floating)) and not np.isfinite(value):
        return "inf" if value > 0 else ("-inf" if value < 0 else "nan")
    return value
