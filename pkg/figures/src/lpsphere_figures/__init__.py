"""Rendering of lpsphere experiment artifacts into figures.

This package never recomputes statistics: it reads the run manifest plus
the CSV tables it names, and re-evaluates analytic overlay curves directly
from the parameters embedded in the manifest.
"""

__version__ = "0.1.0"

from .densities import exp_family_density, gen_gaussian_density, scaled_family_density
from .render import PlotSpec, RenderError, render

__all__ = [
    "PlotSpec",
    "RenderError",
    "render",
    "exp_family_density",
    "gen_gaussian_density",
    "scaled_family_density",
]
