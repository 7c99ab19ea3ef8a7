"""Static-figure companion for the abho CLI CSV outputs."""

from .render import KINDS, PlotJob, SchemaMismatch, render

__all__ = ["KINDS", "PlotJob", "SchemaMismatch", "render"]

__version__ = "0.1.0"
