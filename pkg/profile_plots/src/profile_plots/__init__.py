"""Step plots of solver performance-profile curves."""

from .render import build_figure, parse_curves, render_profile

__version__ = "0.1.0"
