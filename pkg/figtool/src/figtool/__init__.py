"""Figure rendering for simulation sweep CSVs."""

__version__ = "0.1.0"

from .render import FigureSpec, render
