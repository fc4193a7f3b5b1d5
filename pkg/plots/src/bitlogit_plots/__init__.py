"""Scaling figures for bit-budget regression sweeps, from their CSV output."""

from .render import PlotSpec, SummaryPoint, fit_slope, read_summary_points, \
    render_scaling_plot

__version__ = "0.1.0"
