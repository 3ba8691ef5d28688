"""Finite-element kernel and measurement harness for scale-dependent local estimates."""

from .mesh import Rect, StructuredMesh, build_mesh, cells_in, layer_count, mesh_size, shrink_by_layers
from .fespace import FEFunction, LagrangeSpace, ScalarField, build_space, interpolate, interior_dofs

__version__ = "0.1.0"

__all__ = [
    "Rect",
    "StructuredMesh",
    "build_mesh",
    "cells_in",
    "layer_count",
    "mesh_size",
    "shrink_by_layers",
    "FEFunction",
    "LagrangeSpace",
    "ScalarField",
    "build_space",
    "interpolate",
    "interior_dofs",
]
