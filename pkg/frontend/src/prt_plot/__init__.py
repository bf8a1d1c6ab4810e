"""Figure renderer for prt report directories."""

from .reader import ArtifactError, read_manifest, read_metadata, read_table
from .render import KINDS, PlotSpec, render, render_manifest

__version__ = "0.1.0"
