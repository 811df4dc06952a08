"""Figure rendering for the benchmark CSV outputs."""

from .render import FigureSpec, render
from .schemas import FIGURE_KINDS, SchemaError, read_rows

__all__ = ["FigureSpec", "render", "FIGURE_KINDS", "SchemaError", "read_rows"]
