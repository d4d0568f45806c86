"""Render nuvbox CSV/JSON results as static figure files.

This package consumes only the delimited files and JSON sidecars written by
the ``nuvbox`` CLI; it never imports the solver.
"""

from nuvbox_figures.render import FIGURES, PlotSpec, SchemaError, render, renderable_figures

__all__ = ["FIGURES", "PlotSpec", "SchemaError", "render", "renderable_figures"]
