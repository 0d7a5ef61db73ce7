"""Figure rendering for drivenjj CSV/JSON artifacts."""

from .render import MissingInput, RenderError, SchemaMismatch, render, render_file

__all__ = ["MissingInput", "RenderError", "SchemaMismatch", "render", "render_file"]
