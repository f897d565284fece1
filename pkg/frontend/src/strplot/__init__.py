"""Rendering frontend for STR sweep meshes (surfaces and summary tables)."""

from .frame import MeshError, MeshFrame, MeshRow, load_mesh
from .render import render_mesh, render_table

__all__ = ["MeshError", "MeshFrame", "MeshRow", "load_mesh",
           "render_mesh", "render_table"]
