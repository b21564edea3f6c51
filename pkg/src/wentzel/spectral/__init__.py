"""Meshes, P1 assembly, the discrete DtN map and the Wentzel eigensolver."""

from .fem import Assembly, DiscreteFunction, assemble, extend_columns, harmonic_extend, schur_dtn
from .mesh import (
    SHAPES,
    TriMesh,
    gen_mesh,
    polygon_loops,
    random_star_polygon,
    read_mesh,
    shape_mesh,
    star_decagon,
    write_mesh,
)
from .solver import Spectrum, disk_oracle, scaling_check, solve_wentzel, wentzel_operator

__all__ = [
    "Assembly", "DiscreteFunction", "assemble", "extend_columns", "harmonic_extend", "schur_dtn",
    "SHAPES", "TriMesh", "gen_mesh", "polygon_loops", "random_star_polygon", "read_mesh",
    "shape_mesh", "star_decagon", "write_mesh",
    "Spectrum", "disk_oracle", "scaling_check", "solve_wentzel", "wentzel_operator",
]
