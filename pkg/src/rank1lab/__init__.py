"""Numerical laboratory for mean curvature flow of pinched submanifolds in rank-one symmetric spaces."""
__version__ = "0.1.0"

from .ambient import (PointAlgebra, SpaceSpec, curvature, make_space, point_algebra, ricci_check,
                      sectional_curvature)
from .frames import SubspacePair, build_type1, build_type2, split_operators
from .shape import derive_scalars, pinch_constants, pinch_eval, reaction_terms

__all__ = [
    "PointAlgebra", "SpaceSpec", "SubspacePair", "build_type1", "build_type2", "curvature", "derive_scalars",
    "make_space", "pinch_constants", "pinch_eval", "point_algebra", "reaction_terms", "ricci_check",
    "sectional_curvature", "split_operators",
]
