"""Axisymmetric finite elements for Hardy quotients with a boundary singularity."""
from .assemble import QuadratureError, SparseSystem, assemble, interpolate
from .eigen import (
    CSV_COLUMNS,
    IndefiniteFormError,
    NonConvergenceError,
    hardy_quotient_of,
    lambda_tau,
    level_trace,
    negative_pivots,
    shell_bound,
    shell_function,
    smallest_eig,
    write_trace_csv,
)
from .mesh import (
    MeridianDomain,
    MeridianMesh,
    build_meridian_mesh,
    dump_mesh,
    load_mesh,
    mesh_levels,
    min_angle_deg,
    refine_uniform,
)

__all__ = [
    "CSV_COLUMNS",
    "IndefiniteFormError",
    "MeridianDomain",
    "MeridianMesh",
    "NonConvergenceError",
    "QuadratureError",
    "SparseSystem",
    "assemble",
    "build_meridian_mesh",
    "dump_mesh",
    "hardy_quotient_of",
    "interpolate",
    "lambda_tau",
    "level_trace",
    "load_mesh",
    "mesh_levels",
    "min_angle_deg",
    "negative_pivots",
    "refine_uniform",
    "shell_bound",
    "shell_function",
    "smallest_eig",
    "write_trace_csv",
]
