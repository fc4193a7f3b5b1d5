"""Log-log scaling figures from sweep summary CSVs.

Input is the flat results format written by the experiment harness: a header

    kind,n,k,d,trial,seed,l2_error,excess_risk,trace_msg,wall_ms,
    l2_error_stderr,excess_risk_stderr

with one ``summary`` row per grid cell carrying the per-cell mean in the
value column and its standard error in the companion ``*_stderr`` column.
This package only reads that file format; it does not import the simulator.

The fitted slope uses weighted least squares on (log x, log mean) with
weights equal to the inverse squared *relative* standard error, so noisy
cells cannot dominate the fit.  Cells without a positive standard error (for
example synthetic exact data) switch the fit to plain least squares.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["PlotSpec", "SummaryPoint", "read_summary_points", "fit_slope",
           "render_scaling_plot"]

X_COLUMNS = ("k", "n", "d")
Y_COLUMNS = ("excess_risk", "l2_error")

_STDERR_OF = {"excess_risk": "excess_risk_stderr", "l2_error": "l2_error_stderr"}


@dataclass(frozen=True)
class SummaryPoint:
    x: float
    mean: float
    stderr: float | None


@dataclass(frozen=True)
class PlotSpec:
    """What to plot: which CSV, which axes, which cells, where to save."""

    csv_path: str
    x: str
    y: str
    fixed: dict = field(default_factory=dict)
    ref_slopes: tuple[float, ...] = ()
    out_path: str = "scaling.png"

    def __post_init__(self):
        if self.x not in X_COLUMNS:
            raise ValueError(f"x axis must be one of {X_COLUMNS}, got {self.x!r}")
        if self.y not in Y_COLUMNS:
            raise ValueError(f"y axis must be one of {Y_COLUMNS}, got {self.y!r}")
        for key in self.fixed:
            if key not in X_COLUMNS:
                raise ValueError(f"can only hold {X_COLUMNS} fixed, got {key!r}")


def read_summary_points(spec: PlotSpec) -> list[SummaryPoint]:
    """Summary rows matching the hold-fixed filters, as (x, mean, stderr)."""
    points = []
    with open(spec.csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            if row.get("kind") != "summary":
                continue
            if any(int(row[k]) != int(v) for k, v in spec.fixed.items()):
                continue
            stderr_raw = row.get(_STDERR_OF[spec.y], "")
            points.append(SummaryPoint(
                x=float(row[spec.x]),
                mean=float(row[spec.y]),
                stderr=float(stderr_raw) if stderr_raw not in ("", None) else None,
            ))
    points.sort(key=lambda p: p.x)
    return points


def fit_slope(points: list[SummaryPoint]) -> tuple[float, float]:
    """Weighted least-squares (slope, intercept) on the log-log points."""
    if len(points) < 2:
        raise ValueError(
            f"need at least 2 cells to fit a slope, got {len(points)}"
        )
    lx = np.log([p.x for p in points])
    ly = np.log([p.mean for p in points])
    if all(p.stderr is not None and p.stderr > 0 for p in points):
        w = np.array([(p.mean / p.stderr) ** 2 for p in points])
    else:
        w = np.ones(len(points))
    wsum = w.sum()
    mx = float(w @ lx) / wsum
    my = float(w @ ly) / wsum
    var = float(w @ (lx - mx) ** 2)
    if var == 0.0:
        raise ValueError("all selected cells share one x value; nothing to fit")
    slope = float(w @ ((lx - mx) * (ly - my))) / var
    return slope, my - slope * mx


def _sibling_format(path: str) -> str | None:
    stem, ext = os.path.splitext(path)
    other = {".png": ".svg", ".svg": ".png"}.get(ext.lower())
    return stem + other if other else None


def render_scaling_plot(spec: PlotSpec) -> tuple[float, list[str]]:
    """Render the figure; returns (fitted slope, written file paths).

    The scatter shows per-cell means with standard-error bars on log-log
    axes, the weighted fit as a solid line, and one dashed reference line
    per requested slope, anchored at the first cell.  The figure is written
    at ``out_path`` and, when that is .png or .svg, in the other of the two
    formats as well.
    """
    points = read_summary_points(spec)
    slope, intercept = fit_slope(points)
    print(f"fitted slope: {slope:.6f}")

    xs = np.array([p.x for p in points])
    means = np.array([p.mean for p in points])
    errs = np.array([p.stderr if p.stderr is not None else 0.0 for p in points])

    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    ax.errorbar(xs, means, yerr=errs, fmt="o", color="tab:blue",
                capsize=3, label="cell means")
    grid = np.geomspace(xs.min(), xs.max(), 64)
    ax.plot(grid, np.exp(intercept) * grid**slope, "-", color="tab:blue",
            alpha=0.8, label=f"fit: slope {slope:+.3f}")
    for ref in spec.ref_slopes:
        anchor = means[0]
        ax.plot(grid, anchor * (grid / xs[0]) ** ref, "--", color="gray",
                alpha=0.8, label=f"reference slope {ref:+g}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(spec.x)
    ax.set_ylabel(spec.y.replace("_", " "))
    fixed_label = ", ".join(f"{k}={v}" for k, v in sorted(spec.fixed.items()))
    ax.set_title(f"{spec.y.replace('_', ' ')} vs {spec.x}"
                 + (f"  ({fixed_label})" if fixed_label else ""))
    ax.legend()
    ax.grid(True, which="both", alpha=0.25)
    fig.tight_layout()

    written = [spec.out_path]
    fig.savefig(spec.out_path)
    sibling = _sibling_format(spec.out_path)
    if sibling is not None:
        fig.savefig(sibling)
        written.append(sibling)
    plt.close(fig)
    return slope, written
